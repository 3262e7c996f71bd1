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

#include "aures/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aures/errors.hpp"
#include "aures/ops.hpp"

namespace aures {

namespace {

using nn::NormKind;

// Stem kernels (kT, kF) and strides per pathway; the slow pathway keeps its
// first three stems frequency-only.
struct StemSpec {
  std::size_t kt, kf, stride;
};
constexpr std::array<StemSpec, 4> kSlowStems{{{1, 3, 2}, {1, 3, 1}, {1, 3, 1}, {3, 3, 2}}};
constexpr std::array<StemSpec, 4> kFastStems{{{3, 3, 2}, {3, 3, 1}, {3, 3, 1}, {3, 3, 2}}};
constexpr std::array<std::size_t, 4> kStageStrideF{1, 2, 2, 2};
constexpr const char* kStemNames[] = {"stem1", "stem2", "stem3", "stem4"};
constexpr const char* kBlockNames[] = {"block1", "block2", "block3", "block4"};

std::size_t extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                   const std::string& stage) {
  try {
    return conv_output_extent(in, k, stride, pad);
  } catch (const ConfigError& e) {
    throw ShapeError("input too small at " + stage + ": " + e.what());
  }
}

// Weight standardization zeroes a 1x1 kernel over one input channel and
// leaves only a rank-1 map over two, so scaled-down widths are floored at 4
// (never above the unscaled width).
constexpr std::size_t kMinWidth = 4;

std::size_t mid_width(const ModelConfig& cfg, std::size_t out) {
  return std::max<std::size_t>(
      std::min(out, kMinWidth),
      static_cast<std::size_t>(std::lround(static_cast<double>(out) * cfg.bottleneck_ratio)));
}

void check_ratio(const ModelConfig& cfg, std::size_t slow_t, std::size_t fast_t,
                 const std::string& stage) {
  if (fast_t != cfg.slow_temporal_stride * slow_t) {
    throw ShapeError("temporal ratio broken at " + stage + ": fast T " + std::to_string(fast_t) +
                     " vs slow T " + std::to_string(slow_t) + "; use a frame count divisible by " +
                     std::to_string(frame_multiple(cfg)));
  }
}

}  // namespace

ModelConfig full_config() { return ModelConfig{}; }

std::size_t frame_multiple(const ModelConfig& cfg) { return 4 * cfg.slow_temporal_stride; }

Tensor pad_frames(const Tensor& batch, std::size_t multiple) {
  if (batch.rank() != 4) throw DimensionError("pad_frames expects [N, C, T, F]");
  if (multiple == 0) throw ConfigError("pad_frames: multiple must be positive");
  const std::size_t n = batch.dim(0) * batch.dim(1);
  const std::size_t t = batch.dim(2);
  const std::size_t f = batch.dim(3);
  const std::size_t padded = (t + multiple - 1) / multiple * multiple;
  if (padded == t) return batch;
  std::vector<double> out(n * padded * f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(batch.values().begin() + static_cast<std::ptrdiff_t>(i * t * f), t * f,
                out.begin() + static_cast<std::ptrdiff_t>(i * padded * f));
  }
  return Tensor({batch.dim(0), batch.dim(1), padded, f}, std::move(out));
}

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.name = "desk";
  cfg.width_multiplier = 1.0 / 16.0;
  cfg.block_repeats = {1, 1, 1, 1};
  cfg.group_size_slow = 8;
  cfg.group_size_fast = 2;
  cfg.input_frames = 128;
  cfg.input_mels = 40;
  return cfg;
}

ModelConfig preset_config(const std::string& name) {
  if (name == "full") return full_config();
  if (name == "desk") return desk_config();
  throw ConfigError("unknown preset '" + name + "' (expected full or desk)");
}

std::size_t scaled_width(const ModelConfig& cfg, std::size_t width) {
  return std::max<std::size_t>(
      std::min(width, kMinWidth),
      static_cast<std::size_t>(std::lround(static_cast<double>(width) * cfg.width_multiplier)));
}

std::size_t group_count(std::size_t channels, std::size_t group_size) {
  if (group_size == 0) throw ConfigError("group size must be positive");
  if (channels <= group_size) return 1;
  if (channels % group_size != 0) {
    throw ConfigError("group size " + std::to_string(group_size) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  return channels / group_size;
}

void validate(const ModelConfig& cfg) {
  if (!(cfg.width_multiplier > 0.0)) throw ConfigError("width_multiplier must be positive");
  if (cfg.slow_temporal_stride == 0) throw ConfigError("slow_temporal_stride must be positive");
  if (cfg.fusion_kernel == 0) throw ConfigError("fusion_kernel must be positive");
  if (!(cfg.sd_rate >= 0.0 && cfg.sd_rate < 1.0)) throw ConfigError("sd_rate must be in [0, 1)");
  for (std::size_t s = 0; s < kNumStages; ++s) {
    if (cfg.block_repeats[s] == 0) throw ConfigError("every stage needs at least one block");
    group_count(mid_width(cfg, scaled_width(cfg, cfg.slow_block_widths[s])), cfg.group_size_slow);
    group_count(mid_width(cfg, scaled_width(cfg, cfg.fast_block_widths[s])), cfg.group_size_fast);
  }
}

ShapeTrace shape_trace(const ModelConfig& cfg, std::size_t frames, std::size_t mels) {
  validate(cfg);
  ShapeTrace trace;
  std::size_t st = (frames + cfg.slow_temporal_stride - 1) / cfg.slow_temporal_stride;
  std::size_t sf = mels;
  std::size_t ft = frames;
  std::size_t ff = mels;
  trace.rows.push_back({"data layer", st, sf, ft, ff, 1, 1});
  for (std::size_t i = 0; i < 4; ++i) {
    const StemSpec& s = kSlowStems[i];
    const StemSpec& f = kFastStems[i];
    st = extent(st, s.kt, s.stride, s.kt / 2, kStemNames[i]);
    sf = extent(sf, s.kf, s.stride, s.kf / 2, kStemNames[i]);
    ft = extent(ft, f.kt, f.stride, f.kt / 2, kStemNames[i]);
    ff = extent(ff, f.kf, f.stride, f.kf / 2, kStemNames[i]);
    trace.rows.push_back({kStemNames[i], st, sf, ft, ff, scaled_width(cfg, cfg.slow_stem_widths[i]),
                          scaled_width(cfg, cfg.fast_stem_widths[i])});
  }
  for (std::size_t s = 0; s < kNumStages; ++s) {
    check_ratio(cfg, st, ft, std::string(kBlockNames[s]) + " fusion");
    sf = extent(sf, 3, kStageStrideF[s], 1, kBlockNames[s]);
    ff = extent(ff, 3, kStageStrideF[s], 1, kBlockNames[s]);
    trace.rows.push_back({kBlockNames[s], st, sf, ft, ff,
                          scaled_width(cfg, cfg.slow_block_widths[s]),
                          scaled_width(cfg, cfg.fast_block_widths[s])});
  }
  trace.feature_dim = trace.rows.back().slow_channels + trace.rows.back().fast_channels;
  return trace;
}

std::vector<std::vector<double>> nf_betas(const std::array<std::size_t, 4>& repeats,
                                          double alpha) {
  std::vector<std::vector<double>> betas;
  double expected_std = 1.0;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    std::vector<double> stage;
    for (std::size_t b = 0; b < repeats[s]; ++b) {
      stage.push_back(1.0 / expected_std);
      // A transition block's shortcut is a fresh conv of the normalized input.
      if (b == 0) expected_std = 1.0;
      expected_std = std::sqrt(expected_std * expected_std + alpha * alpha);
    }
    betas.push_back(std::move(stage));
  }
  return betas;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  const auto betas = nf_betas(cfg.block_repeats, cfg.alpha);

  auto build = [&](Pathway& p, const std::array<StemSpec, 4>& stems,
                   const std::array<std::size_t, 4>& stem_widths,
                   const std::array<std::size_t, 4>& block_widths,
                   const std::array<std::size_t, 4>& time_kernels, std::size_t group_size,
                   bool slow) {
    std::size_t in = 1;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t out = scaled_width(cfg, stem_widths[i]);
      const StemSpec& s = stems[i];
      p.stems[i].conv = nn::WSConv2d(in, out, s.kt, s.kf,
                                     {.stride_t = s.stride,
                                      .stride_f = s.stride,
                                      .pad_t = s.kt / 2,
                                      .pad_f = s.kf / 2},
                                     rng);
      p.stems[i].norm = nn::Normalizer(cfg.norm_kind, out);
      in = out;
    }
    for (std::size_t s = 0; s < kNumStages; ++s) {
      const std::size_t out = scaled_width(cfg, block_widths[s]);
      const std::size_t mid = mid_width(cfg, out);
      const std::size_t groups = group_count(mid, group_size);
      if (slow) {
        // Fused fast features arrive as 2x the fast channel count.
        const std::size_t fast_in = s == 0 ? scaled_width(cfg, cfg.fast_stem_widths[3])
                                           : scaled_width(cfg, cfg.fast_block_widths[s - 1]);
        in += 2 * fast_in;
      }
      for (std::size_t b = 0; b < cfg.block_repeats[s]; ++b) {
        Block blk;
        blk.transition = b == 0;
        blk.stride_f = b == 0 ? kStageStrideF[s] : 1;
        blk.beta = betas[s][b];
        blk.conv0 = nn::WSConv2d(in, mid, 1, 1, {}, rng);
        blk.spatial = nn::SeparableConvTF(mid, time_kernels[s], 3, groups, blk.stride_f, rng);
        blk.conv2 = nn::WSConv2d(mid, out, 1, 1, {}, rng);
        blk.norms = {nn::Normalizer(cfg.norm_kind, mid), nn::Normalizer(cfg.norm_kind, mid),
                     nn::Normalizer(cfg.norm_kind, mid), nn::Normalizer(cfg.norm_kind, out)};
        blk.has_se = cfg.include_se;
        if (blk.has_se) blk.se = nn::SqueezeExcite(out, cfg.se_ratio, rng);
        if (blk.transition) blk.shortcut = nn::WSConv2d(in, out, 1, 1, {}, rng);
        p.stages[s].push_back(std::move(blk));
        in = out;
      }
    }
  };
  build(slow_, kSlowStems, cfg.slow_stem_widths, cfg.slow_block_widths, cfg.slow_time_kernels,
        cfg.group_size_slow, true);
  build(fast_, kFastStems, cfg.fast_stem_widths, cfg.fast_block_widths, cfg.fast_time_kernels,
        cfg.group_size_fast, false);
  for (std::size_t s = 0; s < kNumStages; ++s) {
    const std::size_t c = s == 0 ? scaled_width(cfg, cfg.fast_stem_widths[3])
                                 : scaled_width(cfg, cfg.fast_block_widths[s - 1]);
    fusion_[s] = nn::WSConv2d(c, 2 * c, cfg.fusion_kernel, 1,
                              {.stride_t = cfg.slow_temporal_stride,
                               .stride_f = 1,
                               .pad_t = cfg.fusion_kernel / 2,
                               .pad_f = 0},
                              rng);
  }
  for (auto& p : named_parameters()) round_to_precision(p.tensor.mutable_values(), Precision::kF32);
}

Tensor Model::run_stem(Pathway& p, std::size_t index, const Tensor& x, bool training) {
  Tensor h = p.stems[index].norm.forward(p.stems[index].conv.forward(x), training);
  // The last stem feeds the pre-activated blocks directly.
  return index < 3 ? nn::activation(h) : h;
}

Tensor Model::run_block(Block& b, const Tensor& x, const nn::ForwardContext& ctx) {
  const bool training = ctx.training;
  const Tensor pre = scale(nn::activation(x), b.beta);
  Tensor shortcut = x;
  if (b.transition) {
    const Tensor pooled = b.stride_f > 1 ? avg_pool_ceil(pre, 1, b.stride_f) : pre;
    shortcut = b.shortcut.forward(pooled);
  }
  Tensor h = b.norms[0].forward(b.conv0.forward(pre), training);
  h = b.norms[1].forward(b.spatial.forward_time(nn::activation(h)), training);
  h = b.norms[2].forward(b.spatial.forward_freq(nn::activation(h)), training);
  h = b.norms[3].forward(b.conv2.forward(nn::activation(h)), training);
  if (b.has_se) h = b.se.forward(h);
  h = nn::stochastic_depth(h, cfg_.sd_rate, training, ctx.rng);
  return add(scale(h, cfg_.alpha), shortcut);
}

Tensor Model::fuse(std::size_t stage, const Tensor& slow, const Tensor& fast) const {
  if (slow.rank() != 4 || fast.rank() != 4) throw DimensionError("fuse: expected rank-4 inputs");
  check_ratio(cfg_, slow.dim(2), fast.dim(2), std::string(kBlockNames[stage]) + " fusion");
  if (slow.dim(3) != fast.dim(3)) {
    throw ShapeError(std::string("frequency extents differ at ") + kBlockNames[stage] +
                     " fusion");
  }
  const Tensor lateral = fusion_[stage].forward(fast);
  const Tensor parts[] = {slow, lateral};
  return concat(parts, 1);
}

Model::FeatureMaps Model::forward_maps(const Tensor& batch, const nn::ForwardContext& ctx) {
  if (batch.rank() != 4 || batch.dim(1) != 1) {
    throw DimensionError("model input must be [N, 1, T, F], got " + shape_string(batch.shape()));
  }
  // Validates extents and names the failing stage before any compute.
  shape_trace(cfg_, batch.dim(2), batch.dim(3));
  Tensor slow = subsample(batch, 2, cfg_.slow_temporal_stride);
  Tensor fast = batch;
  for (std::size_t i = 0; i < 4; ++i) {
    slow = run_stem(slow_, i, slow, ctx.training);
    fast = run_stem(fast_, i, fast, ctx.training);
  }
  for (std::size_t s = 0; s < kNumStages; ++s) {
    slow = fuse(s, slow, fast);
    for (Block& b : slow_.stages[s]) slow = run_block(b, slow, ctx);
    for (Block& b : fast_.stages[s]) fast = run_block(b, fast, ctx);
  }
  return {slow, fast};
}

Tensor Model::forward_features(const Tensor& batch, const nn::ForwardContext& ctx) {
  const FeatureMaps maps = forward_maps(batch, ctx);
  const Tensor pooled[] = {global_avg_pool(maps.slow), global_avg_pool(maps.fast)};
  return concat(pooled, 1);
}

nn::ParameterList Model::named_parameters() const {
  nn::ParameterList out;
  auto collect_pathway = [&out](const Pathway& p, const std::string& name) {
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string prefix = name + "." + kStemNames[i];
      p.stems[i].conv.collect(prefix + ".conv", out);
      p.stems[i].norm.collect(prefix + ".norm", out);
    }
    for (std::size_t s = 0; s < kNumStages; ++s) {
      for (std::size_t b = 0; b < p.stages[s].size(); ++b) {
        const Block& blk = p.stages[s][b];
        const std::string prefix = name + "." + kBlockNames[s] + "." + std::to_string(b);
        blk.conv0.collect(prefix + ".conv0", out);
        blk.spatial.collect(prefix + ".spatial", out);
        blk.conv2.collect(prefix + ".conv2", out);
        for (std::size_t n = 0; n < blk.norms.size(); ++n) {
          blk.norms[n].collect(prefix + ".norm" + std::to_string(n), out);
        }
        if (blk.has_se) blk.se.collect(prefix + ".se", out);
        if (blk.transition) blk.shortcut.collect(prefix + ".shortcut", out);
      }
    }
  };
  collect_pathway(slow_, "slow");
  collect_pathway(fast_, "fast");
  for (std::size_t s = 0; s < kNumStages; ++s) {
    fusion_[s].collect(std::string("fusion.") + kBlockNames[s], out);
  }
  return out;
}

std::vector<Tensor> Model::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : named_parameters()) {
    if (p.trainable) out.push_back(p.tensor);
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) {
    if (p.trainable) n += p.tensor.size();
  }
  return n;
}

std::map<std::string, std::size_t> Model::parameter_breakdown() const {
  std::map<std::string, std::size_t> out;
  for (const auto& p : named_parameters()) {
    if (!p.trainable) continue;
    const std::size_t first = p.name.find('.');
    const std::size_t second = p.name.find('.', first + 1);
    out[p.name.substr(0, second)] += p.tensor.size();
  }
  return out;
}

std::size_t Model::feature_dim() const {
  return scaled_width(cfg_, cfg_.slow_block_widths[3]) +
         scaled_width(cfg_, cfg_.fast_block_widths[3]);
}

}  // namespace aures
