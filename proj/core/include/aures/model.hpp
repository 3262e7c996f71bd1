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

// Two-pathway normalizer-free audio backbone.
//
// The slow pathway sees every 4th spectrogram frame with wide channels; the
// fast pathway sees every frame with 1/8 of the channels. Each pathway has
// four stem convolutions followed by four stages of bottleneck residual
// blocks whose spatial convolution is factored into a time (kT x 1) and a
// frequency (1 x 3) part. Before every stage the fast features are reduced
// in time by a strided 5 x 1 convolution and concatenated onto the slow
// features. Output is the concatenation of both pathways' global averages.
//
// Input layout is [N, 1, T, F] with T frames and F mel bins.

#ifndef AURES_MODEL_HPP_
#define AURES_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aures/layers.hpp"
#include "aures/tensor.hpp"

namespace aures {

inline constexpr std::size_t kNumStages = 4;

struct ModelConfig {
  std::string name = "full";
  std::array<std::size_t, 4> slow_stem_widths{16, 32, 64, 128};
  std::array<std::size_t, 4> slow_block_widths{256, 512, 1536, 1536};
  std::array<std::size_t, 4> fast_stem_widths{2, 4, 8, 16};
  std::array<std::size_t, 4> fast_block_widths{32, 64, 192, 192};
  std::array<std::size_t, 4> block_repeats{1, 2, 6, 3};
  // Time kernel of the factored spatial conv, per stage.
  std::array<std::size_t, 4> slow_time_kernels{1, 1, 3, 3};
  std::array<std::size_t, 4> fast_time_kernels{3, 3, 3, 3};
  std::size_t group_size_slow = 128;
  std::size_t group_size_fast = 16;
  std::size_t slow_temporal_stride = 4;
  std::size_t fusion_kernel = 5;
  double bottleneck_ratio = 0.5;
  double width_multiplier = 1.0;  // applied to every width, floor min(width, 4)
  nn::NormKind norm_kind = nn::NormKind::kNone;
  double sd_rate = 0.1;
  double alpha = 0.2;
  bool include_se = true;
  double se_ratio = 0.5;
  std::size_t input_frames = 400;
  std::size_t input_mels = 128;

  bool operator==(const ModelConfig&) const = default;
};

ModelConfig full_config();
// Width 1/16, one block per stage, group sizes 8/2, 128 x 40 input.
ModelConfig desk_config();
// "full" or "desk".
ModelConfig preset_config(const std::string& name);

// Width after the multiplier.
std::size_t scaled_width(const ModelConfig& cfg, std::size_t width);
// Groups for a grouped conv over `channels` with the given group size;
// throws ConfigError when the channel count is not divisible.
std::size_t group_count(std::size_t channels, std::size_t group_size);
// Throws ConfigError when the config cannot be built.
void validate(const ModelConfig& cfg);

struct ShapeRow {
  std::string stage;
  std::size_t slow_t = 0;
  std::size_t slow_f = 0;
  std::size_t fast_t = 0;
  std::size_t fast_f = 0;
  std::size_t slow_channels = 0;
  std::size_t fast_channels = 0;
};

struct ShapeTrace {
  std::vector<ShapeRow> rows;  // data layer, stem1-4, block1-4
  std::size_t feature_dim = 0;
};

// Per-stage extents for an input of frames x mels, computed without
// allocating parameters. Throws ShapeError naming the stage that fails.
ShapeTrace shape_trace(const ModelConfig& cfg, std::size_t frames, std::size_t mels);
inline ShapeTrace shape_trace(const ModelConfig& cfg) {
  return shape_trace(cfg, cfg.input_frames, cfg.input_mels);
}

// Frame counts must be multiples of this so the fast pathway stays exactly
// slow_temporal_stride times longer than the slow one through both strided
// stems.
std::size_t frame_multiple(const ModelConfig& cfg);

// Zero pads the time axis of [N, 1, T, F] up to a multiple of `multiple`.
Tensor pad_frames(const Tensor& batch, std::size_t multiple);

// NF residual scaling: input scale beta for each block of a stage sequence
// under the analytic variance bookkeeping (variance reset to 1 at the first
// block of every stage, then growing by alpha^2 per block).
std::vector<std::vector<double>> nf_betas(const std::array<std::size_t, 4>& repeats, double alpha);

class Model {
 public:
  // Deterministic given seed. All parameters are rounded to float32 so that
  // checkpoints round-trip exactly.
  Model(const ModelConfig& cfg, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // [N, 1, T, F] -> [N, feature_dim]. Training mode updates batch-norm
  // running statistics and draws stochastic depth masks from ctx.rng.
  Tensor forward_features(const Tensor& batch, const nn::ForwardContext& ctx);

  struct FeatureMaps {
    Tensor slow;  // [N, C_slow, T/16, F/32]
    Tensor fast;  // [N, C_fast, T/4, F/32]
  };
  // Final residual-stream maps of both pathways, before global pooling.
  FeatureMaps forward_maps(const Tensor& batch, const nn::ForwardContext& ctx);

  // Fast-to-slow lateral connection in front of block stage `stage` (0-based).
  Tensor fuse(std::size_t stage, const Tensor& slow, const Tensor& fast) const;

  // Every tensor under its dotted name, including non-trainable buffers.
  nn::ParameterList named_parameters() const;
  std::vector<Tensor> trainable_parameters() const;
  std::size_t parameter_count() const;
  // Trainable parameter counts grouped by "pathway.stage" prefix.
  std::map<std::string, std::size_t> parameter_breakdown() const;

  const ModelConfig& config() const { return cfg_; }
  std::size_t feature_dim() const;

  struct Stem {
    nn::WSConv2d conv;
    nn::Normalizer norm;
  };

  struct Block {
    nn::WSConv2d conv0;
    nn::SeparableConvTF spatial;
    nn::WSConv2d conv2;
    std::array<nn::Normalizer, 4> norms;
    nn::SqueezeExcite se;
    nn::WSConv2d shortcut;
    bool has_se = false;
    bool transition = false;
    std::size_t stride_f = 1;
    double beta = 1.0;
  };

  struct Pathway {
    std::array<Stem, 4> stems;
    std::array<std::vector<Block>, 4> stages;
  };

 private:
  Tensor run_stem(Pathway& p, std::size_t index, const Tensor& x, bool training);
  Tensor run_block(Block& b, const Tensor& x, const nn::ForwardContext& ctx);

  ModelConfig cfg_;
  Pathway slow_;
  Pathway fast_;
  std::array<nn::WSConv2d, 4> fusion_;
};

}  // namespace aures

#endif  // AURES_MODEL_HPP_
