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

// Learning-rate schedule and the Adam optimizer.

#ifndef AURES_TRAIN_HPP_
#define AURES_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aures/tensor.hpp"

namespace aures {

struct ScheduleConfig {
  double peak_lr = 2e-4;
  std::size_t warmup_steps = 5000;
  std::size_t total_steps = 200000;
};

// Warmup over ceil(fraction * total) steps, clamped to [1, total - 1].
ScheduleConfig scaled_schedule(double peak_lr, std::size_t total_steps,
                               double warmup_fraction = 0.05);

// Linear 0 -> peak over warmup, then cosine decay to 0 at total_steps.
double lr_at(std::size_t step, const ScheduleConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Parameters are rounded to this precision after every update.
  Precision storage = Precision::kF64;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, const AdamConfig& cfg = {});

  // One bias-corrected update from the accumulated gradients. Parameters
  // without a gradient are treated as having a zero gradient. Throws
  // NonFiniteError, before touching any parameter, if a gradient is NaN/Inf.
  void step(double lr);
  void zero_grad();

  std::size_t steps() const { return t_; }
  std::span<const Tensor> params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

// Order-sensitive FNV-1a hash over the bit patterns of the given tensors.
std::uint64_t parameter_checksum(std::span<const Tensor> tensors);

}  // namespace aures

#endif  // AURES_TRAIN_HPP_
