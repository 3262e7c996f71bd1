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

// Differentiable tensor operations. Every op validates shapes, rejects
// non-finite results with NonFiniteError, and records a backward closure on
// the active GradTape when any input requires grad.

#ifndef AURES_OPS_HPP_
#define AURES_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "aures/tensor.hpp"

namespace aures {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

// Elementwise math. log and sqrt throw DomainError on negative input.
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

// GELU scaled so a unit Gaussian input keeps unit output variance.
inline constexpr double kGeluGamma = 1.7015043497085571;
Tensor scaled_gelu(const Tensor& a);

// Full reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor transpose(const Tensor& a);  // rank 2 only
// Keeps every stride-th slice along axis, starting at index 0.
Tensor subsample(const Tensor& a, std::size_t axis, std::size_t stride);

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// [N,C,...] -> [N,C], averaging all trailing positions.
Tensor global_avg_pool(const Tensor& a);

// Non-overlapping average pooling on [N,C,T,F] with window == stride.
// Partial windows at the tail are averaged over their valid cells, so the
// output extent is ceil(extent / stride).
Tensor avg_pool_ceil(const Tensor& a, std::size_t stride_t, std::size_t stride_f);

// Broadcasts s over the trailing axes of a; s.shape must be a prefix of
// a.shape, e.g. [N] or [N,C] against [N,C,T,F].
Tensor mul_leading(const Tensor& a, const Tensor& s);

// Per-channel ops along axis 1 of a [N,C,...] tensor with v of shape [C].
Tensor add_channel(const Tensor& a, const Tensor& v);
Tensor mul_channel(const Tensor& a, const Tensor& v);

struct Conv2dOptions {
  std::size_t stride_t = 1;
  std::size_t stride_f = 1;
  std::size_t pad_t = 0;
  std::size_t pad_f = 0;
  std::size_t groups = 1;
};

// Output extent of a strided, zero-padded window; throws ConfigError when
// the result would be non-positive.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

// Cross-correlation of input [N,C,T,F] with kernel [O,C/groups,kT,kF].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options);

// Scaled Weight Standardization of a kernel [O,...] with per-output gain [O]:
//   w_hat = gain * (w - mean) / (max(std, eps) * sqrt(fan_in))
// with population statistics over all non-output axes.
Tensor weight_standardize(const Tensor& kernel, const Tensor& gain, double eps = 1e-8);

// Groups over which moment_normalize computes mean and variance for a
// [N,C,T,F] tensor.
enum class MomentGroups {
  kPerChannel,         // over (N,T,F): batch norm
  kPerExample,         // over (C,T,F): layer norm
  kPerExampleChannel,  // over (T,F):   instance norm
};

struct MomentStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance, before eps
};

// (x - mean) / sqrt(var + eps) within each group. When stats is non-null the
// per-group moments are written to it.
Tensor moment_normalize(const Tensor& a, MomentGroups groups, double eps,
                        MomentStats* stats = nullptr);

// Row-wise x / max(||x||, 1e-12) for a [N,D] tensor.
Tensor l2_normalize_rows(const Tensor& a);

// Mean over all elements of the numerically stable binary cross-entropy
// between sigmoid(logits) and targets in [0,1].
Tensor sigmoid_bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace aures

#endif  // AURES_OPS_HPP_
