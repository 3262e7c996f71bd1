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

// Layer building blocks: weight-standardized convolutions, the normalizer
// options, separable time/frequency convolutions, squeeze-excite, dense
// layers and stochastic depth.

#ifndef AURES_LAYERS_HPP_
#define AURES_LAYERS_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "aures/ops.hpp"
#include "aures/tensor.hpp"

namespace aures::nn {

enum class NormKind { kBatchNorm, kLayerNorm, kInstanceNorm, kNone };

// Accepts "bn", "ln", "in", "none" (also "nf" for kNone).
NormKind parse_norm_kind(std::string_view name);
std::string_view norm_kind_name(NormKind kind);

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;  // false for running statistics
};
using ParameterList = std::vector<NamedTensor>;

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // consumed by stochastic depth only
};

// Convolution whose kernel is reparameterized by Scaled Weight
// Standardization, followed by a per-channel bias.
class WSConv2d {
 public:
  WSConv2d() = default;
  WSConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_t,
           std::size_t kernel_f, const Conv2dOptions& options, std::mt19937_64& rng,
           bool standardize = true);

  Tensor forward(const Tensor& x) const;
  // The kernel actually convolved: standardized, or raw when disabled.
  Tensor effective_kernel() const;

  void collect(const std::string& prefix, ParameterList& out) const;

  const Tensor& weight() const { return weight_; }
  Tensor& weight() { return weight_; }
  const Tensor& gain() const { return gain_; }
  const Tensor& bias() const { return bias_; }
  Tensor& bias() { return bias_; }
  const Conv2dOptions& options() const { return options_; }
  std::size_t out_channels() const { return weight_.dim(0); }

 private:
  Tensor weight_;
  Tensor gain_;
  Tensor bias_;
  Conv2dOptions options_;
  bool standardize_ = true;
};

// kernel_t x 1 time convolution followed by a 1 x kernel_f frequency
// convolution; the stride applies to the frequency factor only. Both factors
// are grouped and zero padded to preserve extents before striding.
class SeparableConvTF {
 public:
  SeparableConvTF() = default;
  SeparableConvTF(std::size_t channels, std::size_t kernel_t, std::size_t kernel_f,
                  std::size_t groups, std::size_t stride_f, std::mt19937_64& rng,
                  bool standardize = true);

  Tensor forward(const Tensor& x) const;
  Tensor forward_time(const Tensor& x) const { return time_.forward(x); }
  Tensor forward_freq(const Tensor& x) const { return freq_.forward(x); }
  void collect(const std::string& prefix, ParameterList& out) const;

  WSConv2d& time_conv() { return time_; }
  WSConv2d& freq_conv() { return freq_; }

 private:
  WSConv2d time_;
  WSConv2d freq_;
};

class Normalizer {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.99;

  Normalizer() = default;
  Normalizer(NormKind kind, std::size_t channels);

  // BatchNorm in training mode updates the running statistics; in eval mode
  // it uses them (initially mean 0, variance 1).
  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, ParameterList& out) const;

  NormKind kind() const { return kind_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

 private:
  NormKind kind_ = NormKind::kNone;
  Tensor scale_;
  Tensor shift_;
  Tensor running_mean_;
  Tensor running_var_;
};

// y = x W + b for x of shape [N, in].
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in_features, std::size_t out_features, std::mt19937_64& rng,
        double init_scale = 1.0);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

// Channel gating x * 2 * sigmoid(fc2(act(fc1(pool(x))))) with the scaled GELU
// as act.
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(std::size_t channels, double ratio, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Dense reduce_;
  Dense expand_;
};

// Scaled GELU activation.
Tensor activation(const Tensor& x);

// In training mode multiplies each example's branch by b / (1 - rate) with
// b ~ Bernoulli(1 - rate); identity in eval mode or when rate is 0.
Tensor stochastic_depth(const Tensor& branch, double rate, bool training, std::mt19937_64* rng);

}  // namespace aures::nn

#endif  // AURES_LAYERS_HPP_
