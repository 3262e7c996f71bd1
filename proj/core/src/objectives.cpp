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

#include "aures/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "aures/errors.hpp"
#include "aures/ops.hpp"

namespace aures {

namespace {

constexpr double kMaskedLogit = -1e9;

void require_same_shape(const Tensor& logits, const Tensor& targets, const char* what) {
  if (logits.shape() != targets.shape()) {
    throw DimensionError(std::string(what) + ": logits " + shape_string(logits.shape()) +
                         " vs targets " + shape_string(targets.shape()));
  }
}

}  // namespace

double sample_beta(double a, double b, std::mt19937_64& rng) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("beta parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

std::vector<std::size_t> derangement(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) throw UsageError("derangement needs at least 2 elements");
  std::vector<std::size_t> p(n);
  for (;;) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = p[i] == i;
    if (!fixed) return p;
  }
}

MixResult mix_with(std::span<const dsp::Waveform> clips,
                   std::span<const std::vector<double>> labels, std::span<const double> lambdas,
                   std::span<const std::size_t> partners) {
  const std::size_t n = clips.size();
  if (lambdas.size() != n || partners.size() != n) {
    throw DimensionError("mix: lambdas/partners must match the batch size");
  }
  if (!labels.empty() && labels.size() != n) throw DimensionError("mix: one label per clip");
  MixResult out;
  out.lambdas.assign(lambdas.begin(), lambdas.end());
  out.partners.assign(partners.begin(), partners.end());
  out.clips.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = partners[i];
    if (j >= n) throw DimensionError("mix: partner index out of range");
    const auto& a = clips[i].samples;
    const auto& b = clips[j].samples;
    if (a.size() != b.size()) throw DimensionError("mix: clips differ in length");
    const double l = lambdas[i];
    out.clips[i].sample_rate = clips[i].sample_rate;
    out.clips[i].samples.resize(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) out.clips[i].samples[s] = l * a[s] + (1 - l) * b[s];
    if (!labels.empty()) {
      const auto& la = labels[i];
      const auto& lb = labels[j];
      if (la.size() != lb.size()) throw DimensionError("mix: label widths differ");
      std::vector<double> mixed(la.size());
      for (std::size_t k = 0; k < la.size(); ++k) mixed[k] = l * la[k] + (1 - l) * lb[k];
      out.labels.push_back(std::move(mixed));
    }
  }
  return out;
}

MixResult mix_examples(std::span<const dsp::Waveform> clips,
                       std::span<const std::vector<double>> labels, std::mt19937_64& rng) {
  const std::size_t n = clips.size();
  if (n < 2) {
    MixResult out;
    out.clips.assign(clips.begin(), clips.end());
    out.labels.assign(labels.begin(), labels.end());
    out.lambdas.assign(n, 1.0);
    out.partners.assign(n, 0);
    return out;
  }
  std::vector<double> lambdas(n);
  for (double& l : lambdas) l = sample_beta(kMixAlpha, kMixBeta, rng);
  const auto partners = derangement(n, rng);
  return mix_with(clips, labels, lambdas, partners);
}

Tensor nt_xent_stacked(const Tensor& z, double temperature) {
  if (z.rank() != 2 || z.dim(0) % 2 != 0) {
    throw DimensionError("nt_xent: expected [2N, D], got " + shape_string(z.shape()));
  }
  const std::size_t m = z.dim(0);
  const std::size_t n = m / 2;
  if (n < 2) throw UsageError("nt_xent needs N >= 2 pairs so that negatives exist");
  if (!(temperature > 0.0)) throw ConfigError("nt_xent temperature must be positive");

  const Tensor u = l2_normalize_rows(z);
  const Tensor sim = scale(matmul(u, transpose(u)), 1.0 / temperature);
  std::vector<double> diag(m * m, 0.0);
  std::vector<double> positive(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    diag[i * m + i] = kMaskedLogit;
    positive[i * m + (i + n) % m] = 1.0;
  }
  const Tensor logp = log_softmax(add(sim, Tensor({m, m}, std::move(diag))), 1);
  return scale(sum(mul(logp, Tensor({m, m}, std::move(positive)))),
               -1.0 / static_cast<double>(m));
}

Tensor nt_xent(const Tensor& z_a, const Tensor& z_b, double temperature) {
  if (z_a.rank() != 2 || z_a.shape() != z_b.shape()) {
    throw DimensionError("nt_xent: views must both be [N, D], got " +
                         shape_string(z_a.shape()) + " and " + shape_string(z_b.shape()));
  }
  const std::array<Tensor, 2> parts{z_a, z_b};
  return nt_xent_stacked(concat(parts, 0), temperature);
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "cross entropy");
  if (logits.rank() != 2) throw DimensionError("cross entropy: expected [N, K] logits");
  const Tensor constant_targets = targets.detach();
  return scale(sum(mul(log_softmax(logits, 1), constant_targets)),
               -1.0 / static_cast<double>(logits.dim(0)));
}

Tensor classification_loss(const Tensor& logits, const Tensor& targets, bool multi_label) {
  require_same_shape(logits, targets, "classification loss");
  for (double t : targets.values()) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("classification targets must lie in [0, 1]");
  }
  if (multi_label) return sigmoid_bce_with_logits(logits, targets.detach());
  return softmax_cross_entropy(logits, targets);
}

Tensor classification_loss(std::span<const SlotLogits> slots) {
  if (slots.empty()) throw UsageError("classification loss over an empty slot list");
  Tensor total;
  for (const auto& slot : slots) {
    const Tensor l = classification_loss(slot.logits, slot.targets, false);
    total = total.defined() ? add(total, l) : l;
  }
  return total;
}

Projector::Projector(std::size_t in_features, std::size_t hidden, std::size_t layers,
                     std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t width = in_features;
  for (std::size_t i = 0; i < layers; ++i) {
    hidden_.emplace_back(width, hidden, rng);
    width = hidden;
  }
  out_ = nn::Dense(width, out, rng);
  nn::ParameterList params;
  collect("projector", params);
  for (auto& p : params) round_to_precision(p.tensor.mutable_values(), Precision::kF32);
}

Tensor Projector::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : hidden_) h = nn::activation(layer.forward(h));
  return out_.forward(h);
}

void Projector::collect(const std::string& prefix, nn::ParameterList& out) const {
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    hidden_[i].collect(prefix + ".hidden" + std::to_string(i), out);
  }
  out_.collect(prefix + ".out", out);
}

Projector make_projector(const ModelConfig& cfg, std::size_t in_features, std::uint64_t seed,
                         std::size_t out) {
  const auto hidden = static_cast<std::size_t>(std::lround(4096.0 * cfg.width_multiplier));
  return Projector(in_features, std::max<std::size_t>(hidden, 1), 3, out, seed);
}

ViewGenerator::ViewGenerator(std::size_t frames, std::size_t n_mels, bool mix)
    : frames_(frames),
      crop_samples_(dsp::samples_for_frames(frames)),
      fb_(dsp::mel_filterbank({.n_mels = n_mels})),
      mix_(mix) {}

Tensor ViewGenerator::generate(std::span<const dsp::Waveform> clips, std::mt19937_64& rng,
                               std::span<const std::vector<double>> labels,
                               std::vector<std::vector<double>>* mixed_labels) const {
  const std::size_t n = clips.size();
  if (n == 0) throw InputError("view generation on an empty batch");
  std::vector<dsp::Waveform> crops;
  crops.reserve(n);
  for (const auto& clip : clips) crops.push_back(dsp::random_crop_samples(clip, crop_samples_, rng));
  if (mix_) {
    MixResult mixed = mix_examples(crops, labels, rng);
    crops = std::move(mixed.clips);
    if (mixed_labels != nullptr) *mixed_labels = std::move(mixed.labels);
  } else if (mixed_labels != nullptr) {
    mixed_labels->assign(labels.begin(), labels.end());
  }

  const std::size_t per = frames_ * fb_.n_mels;
  std::vector<double> values(n * per);
  for (std::size_t i = 0; i < n; ++i) {
    const dsp::Spectrogram s = dsp::standardize(dsp::log_mel(crops[i], fb_));
    std::copy_n(s.values.begin(), per, values.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor({n, 1, frames_, fb_.n_mels}, std::move(values));
}

Tensor ViewGenerator::features(const dsp::Waveform& clip) const {
  const dsp::Spectrogram s = dsp::standardize(dsp::log_mel(clip, fb_));
  return Tensor({1, 1, s.frames, s.n_mels}, s.values);
}

Tensor simclr_loss(Model& model, const Projector& projector, const Tensor& view_a,
                   const Tensor& view_b, const nn::ForwardContext& ctx, double temperature) {
  if (view_a.shape() != view_b.shape()) {
    throw DimensionError("simclr: views differ in shape");
  }
  const std::array<Tensor, 2> views{view_a, view_b};
  const Tensor feats = model.forward_features(concat(views, 0), ctx);
  return nt_xent_stacked(projector.forward(feats), temperature);
}

}  // namespace aures
