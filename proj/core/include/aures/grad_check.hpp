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

#ifndef AURES_GRAD_CHECK_HPP_
#define AURES_GRAD_CHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "aures/tensor.hpp"

namespace aures {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every entry; otherwise at most this many entries per tensor,
  // chosen with a seeded generator.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients of loss_fn against central differences.
// The error of one entry is |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-8). loss_fn must rebuild the scalar loss from the current
// parameter values on every call and be deterministic; two evaluations that
// differ throw CheckError. Parameter gradients are overwritten.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace aures

#endif  // AURES_GRAD_CHECK_HPP_
