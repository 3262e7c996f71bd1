/*
 * Copyright 2026 The Aures Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Pretraining objectives: contrastive NT-Xent with a projection MLP,
// supervised classification losses, waveform example mixing, and the
// crop -> mix -> log-mel view pipeline that feeds both.

#ifndef AURES_OBJECTIVES_HPP_
#define AURES_OBJECTIVES_HPP_

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aures/dsp.hpp"
#include "aures/layers.hpp"
#include "aures/model.hpp"
#include "aures/tensor.hpp"

namespace aures {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kMixAlpha = 5.0;
inline constexpr double kMixBeta = 2.0;

// Beta(a, b) via the ratio of two gamma draws.
double sample_beta(double a, double b, std::mt19937_64& rng);

// Uniform random permutation without fixed points (n >= 2), by rejection.
std::vector<std::size_t> derangement(std::size_t n, std::mt19937_64& rng);

struct MixResult {
  std::vector<dsp::Waveform> clips;
  std::vector<std::vector<double>> labels;  // empty when no labels were given
  std::vector<double> lambdas;
  std::vector<std::size_t> partners;
};

// clip_i <- l_i * clip_i + (1 - l_i) * clip_partner(i), labels likewise.
// All clips must share one length.
MixResult mix_with(std::span<const dsp::Waveform> clips,
                   std::span<const std::vector<double>> labels, std::span<const double> lambdas,
                   std::span<const std::size_t> partners);

// Draws l_i ~ Beta(5, 2) and a derangement of partners. A batch of one is
// returned unchanged.
MixResult mix_examples(std::span<const dsp::Waveform> clips,
                       std::span<const std::vector<double>> labels, std::mt19937_64& rng);

// NT-Xent over 2N embeddings stacked as [z_a; z_b]. Row i's positive is row
// (i + N) mod 2N; every other row except itself is a negative.
Tensor nt_xent_stacked(const Tensor& z, double temperature = kDefaultTemperature);
Tensor nt_xent(const Tensor& z_a, const Tensor& z_b, double temperature = kDefaultTemperature);

// Mean over rows of -sum_k t_k log softmax(logits)_k; targets may be soft.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

struct SlotLogits {
  Tensor logits;
  Tensor targets;
};

// Single-label: softmax cross-entropy. Multi-label: mean sigmoid BCE over
// N*K. Slot lists: sum of per-slot softmax cross-entropies.
Tensor classification_loss(const Tensor& logits, const Tensor& targets, bool multi_label);
Tensor classification_loss(std::span<const SlotLogits> slots);

// Hidden affine layers with activation, then a linear output layer.
class Projector {
 public:
  Projector() = default;
  Projector(std::size_t in_features, std::size_t hidden, std::size_t layers, std::size_t out,
            std::uint64_t seed);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, nn::ParameterList& out) const;

 private:
  std::vector<nn::Dense> hidden_;
  nn::Dense out_;
};

// 4096-wide hidden layers scaled by the model's width multiplier.
Projector make_projector(const ModelConfig& cfg, std::size_t in_features, std::uint64_t seed,
                         std::size_t out = 256);

// Standardized log-mel views of random crops, optionally mixed.
class ViewGenerator {
 public:
  // Crops of `frames` frames and `n_mels` mel bins.
  ViewGenerator(std::size_t frames, std::size_t n_mels, bool mix);

  // [N, 1, frames, n_mels]. When labels is non-empty, mixed labels are
  // written to mixed_labels.
  Tensor generate(std::span<const dsp::Waveform> clips, std::mt19937_64& rng,
                  std::span<const std::vector<double>> labels = {},
                  std::vector<std::vector<double>>* mixed_labels = nullptr) const;

  // Frontend of a whole clip, no crop or mix: [1, 1, T, n_mels].
  Tensor features(const dsp::Waveform& clip) const;

  std::size_t crop_samples() const { return crop_samples_; }
  std::size_t frames() const { return frames_; }
  std::size_t n_mels() const { return fb_.n_mels; }

 private:
  std::size_t frames_;
  std::size_t crop_samples_;
  dsp::MelFilterbank fb_;
  bool mix_;
};

// nt_xent(projector(features(a)), projector(features(b))), with both views
// run through the backbone as one batch.
Tensor simclr_loss(Model& model, const Projector& projector, const Tensor& view_a,
                   const Tensor& view_b, const nn::ForwardContext& ctx,
                   double temperature = kDefaultTemperature);

}  // namespace aures

#endif  // AURES_OBJECTIVES_HPP_
