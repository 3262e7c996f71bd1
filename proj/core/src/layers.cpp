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

#include "aures/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aures/errors.hpp"

namespace aures::nn {

namespace {

std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

NormKind parse_norm_kind(std::string_view name) {
  if (name == "bn") return NormKind::kBatchNorm;
  if (name == "ln") return NormKind::kLayerNorm;
  if (name == "in") return NormKind::kInstanceNorm;
  if (name == "none" || name == "nf") return NormKind::kNone;
  throw ConfigError("unknown norm '" + std::string(name) + "' (expected bn, ln, in or none)");
}

std::string_view norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::kBatchNorm:
      return "bn";
    case NormKind::kLayerNorm:
      return "ln";
    case NormKind::kInstanceNorm:
      return "in";
    case NormKind::kNone:
      return "none";
  }
  return "none";
}

WSConv2d::WSConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_t,
                   std::size_t kernel_f, const Conv2dOptions& options, std::mt19937_64& rng,
                   bool standardize)
    : options_(options), standardize_(standardize) {
  if (options.groups == 0 || in_channels % options.groups != 0 ||
      out_channels % options.groups != 0) {
    throw ConfigError("conv: " + std::to_string(in_channels) + " -> " +
                      std::to_string(out_channels) + " channels not divisible into " +
                      std::to_string(options.groups) + " groups");
  }
  const std::size_t per_group = in_channels / options.groups;
  const std::size_t fan_in = per_group * kernel_t * kernel_f;
  const Shape shape{out_channels, per_group, kernel_t, kernel_f};
  weight_ = Tensor::parameter(
      shape, normal_values(shape_numel(shape), std::sqrt(2.0 / static_cast<double>(fan_in)), rng));
  gain_ = Tensor::parameter({out_channels}, std::vector<double>(out_channels, 1.0));
  bias_ = Tensor::parameter({out_channels}, std::vector<double>(out_channels, 0.0));
}

Tensor WSConv2d::effective_kernel() const {
  return standardize_ ? weight_standardize(weight_, gain_) : weight_;
}

Tensor WSConv2d::forward(const Tensor& x) const {
  return add_channel(conv2d(x, effective_kernel(), options_), bias_);
}

void WSConv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  if (standardize_) out.push_back({prefix + ".gain", gain_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

SeparableConvTF::SeparableConvTF(std::size_t channels, std::size_t kernel_t, std::size_t kernel_f,
                                 std::size_t groups, std::size_t stride_f, std::mt19937_64& rng,
                                 bool standardize)
    : time_(channels, channels, kernel_t, 1,
            {.stride_t = 1, .stride_f = 1, .pad_t = kernel_t / 2, .pad_f = 0, .groups = groups},
            rng, standardize),
      freq_(channels, channels, 1, kernel_f,
            {.stride_t = 1, .stride_f = stride_f, .pad_t = 0, .pad_f = kernel_f / 2,
             .groups = groups},
            rng, standardize) {}

Tensor SeparableConvTF::forward(const Tensor& x) const { return freq_.forward(time_.forward(x)); }

void SeparableConvTF::collect(const std::string& prefix, ParameterList& out) const {
  time_.collect(prefix + ".time", out);
  freq_.collect(prefix + ".freq", out);
}

Normalizer::Normalizer(NormKind kind, std::size_t channels) : kind_(kind) {
  if (kind == NormKind::kNone) return;
  scale_ = Tensor::parameter({channels}, std::vector<double>(channels, 1.0));
  shift_ = Tensor::parameter({channels}, std::vector<double>(channels, 0.0));
  if (kind == NormKind::kBatchNorm) {
    running_mean_ = Tensor({channels}, 0.0);
    running_var_ = Tensor({channels}, 1.0);
  }
}

Tensor Normalizer::forward(const Tensor& x, bool training) {
  Tensor normalized;
  switch (kind_) {
    case NormKind::kNone:
      return x;
    case NormKind::kLayerNorm:
      normalized = moment_normalize(x, MomentGroups::kPerExample, kEps);
      break;
    case NormKind::kInstanceNorm:
      normalized = moment_normalize(x, MomentGroups::kPerExampleChannel, kEps);
      break;
    case NormKind::kBatchNorm:
      if (training) {
        MomentStats stats;
        normalized = moment_normalize(x, MomentGroups::kPerChannel, kEps, &stats);
        auto rm = running_mean_.mutable_values();
        auto rv = running_var_.mutable_values();
        for (std::size_t c = 0; c < rm.size(); ++c) {
          rm[c] = kMomentum * rm[c] + (1.0 - kMomentum) * stats.mean[c];
          rv[c] = kMomentum * rv[c] + (1.0 - kMomentum) * stats.variance[c];
        }
      } else {
        const std::size_t c = running_mean_.size();
        std::vector<double> neg_mean(c);
        std::vector<double> inv_std(c);
        for (std::size_t i = 0; i < c; ++i) {
          neg_mean[i] = -running_mean_.values()[i];
          inv_std[i] = 1.0 / std::sqrt(running_var_.values()[i] + kEps);
        }
        normalized = mul_channel(add_channel(x, Tensor({c}, std::move(neg_mean))),
                                 Tensor({c}, std::move(inv_std)));
      }
      break;
  }
  return add_channel(mul_channel(normalized, scale_), shift_);
}

void Normalizer::collect(const std::string& prefix, ParameterList& out) const {
  if (kind_ == NormKind::kNone) return;
  out.push_back({prefix + ".scale", scale_, true});
  out.push_back({prefix + ".shift", shift_, true});
  if (kind_ == NormKind::kBatchNorm) {
    out.push_back({prefix + ".running_mean", running_mean_, false});
    out.push_back({prefix + ".running_var", running_var_, false});
  }
}

Dense::Dense(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng,
             double init_scale) {
  weight_ = Tensor::parameter(
      {in_features, out_features},
      normal_values(in_features * out_features,
                    init_scale / std::sqrt(static_cast<double>(in_features)), rng));
  bias_ = Tensor::parameter({out_features}, std::vector<double>(out_features, 0.0));
}

Tensor Dense::forward(const Tensor& x) const { return add_channel(matmul(x, weight_), bias_); }

void Dense::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

SqueezeExcite::SqueezeExcite(std::size_t channels, double ratio, std::mt19937_64& rng) {
  const auto hidden = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(channels) * ratio));
  reduce_ = Dense(channels, hidden, rng);
  expand_ = Dense(hidden, channels, rng);
}

Tensor SqueezeExcite::forward(const Tensor& x) const {
  const Tensor pooled = global_avg_pool(x);
  const Tensor gate = scale(sigmoid(expand_.forward(activation(reduce_.forward(pooled)))), 2.0);
  return mul_leading(x, gate);
}

void SqueezeExcite::collect(const std::string& prefix, ParameterList& out) const {
  reduce_.collect(prefix + ".reduce", out);
  expand_.collect(prefix + ".expand", out);
}

Tensor activation(const Tensor& x) { return scaled_gelu(x); }

Tensor stochastic_depth(const Tensor& branch, double rate, bool training, std::mt19937_64* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("stochastic depth rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return branch;
  if (rng == nullptr) throw UsageError("stochastic depth in training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  const std::size_t n = branch.dim(0);
  std::vector<double> mask(n);
  for (double& m : mask) m = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul_leading(branch, Tensor({n}, std::move(mask)));
}

}  // namespace aures::nn
