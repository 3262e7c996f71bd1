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

#include "aures/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "aures/errors.hpp"

namespace aures {

ScheduleConfig scaled_schedule(double peak_lr, std::size_t total_steps, double warmup_fraction) {
  if (total_steps < 2) throw ConfigError("schedule needs at least 2 steps");
  auto warmup = static_cast<std::size_t>(std::ceil(warmup_fraction * total_steps));
  warmup = std::clamp<std::size_t>(warmup, 1, total_steps - 1);
  return {.peak_lr = peak_lr, .warmup_steps = warmup, .total_steps = total_steps};
}

double lr_at(std::size_t step, const ScheduleConfig& cfg) {
  if (!(cfg.warmup_steps > 0 && cfg.warmup_steps < cfg.total_steps)) {
    throw ConfigError("schedule needs 0 < warmup_steps < total_steps");
  }
  if (step > cfg.total_steps) {
    throw UsageError("lr_at: step " + std::to_string(step) + " beyond total " +
                     std::to_string(cfg.total_steps));
  }
  if (step <= cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double progress = static_cast<double>(step - cfg.warmup_steps) /
                          static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(std::vector<Tensor> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    for (double g : params_[i].grad()) {
      if (!std::isfinite(g)) {
        throw NonFiniteError("adam: non-finite gradient in parameter " + std::to_string(i));
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const bool has = p.has_grad();
    auto values = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has ? p.grad()[k] : 0.0;
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      values[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
    round_to_precision(values, cfg_.storage);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::uint64_t parameter_checksum(std::span<const Tensor> tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : tensors) {
    mix(t.size());
    for (double x : t.values()) mix(std::bit_cast<std::uint64_t>(x));
  }
  return h;
}

}  // namespace aures
