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

#include "aures/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "aures/errors.hpp"

namespace aures {

namespace {

double evaluate(const std::function<Tensor()>& loss_fn) {
  Tensor loss = loss_fn();
  if (loss.size() != 1) throw UsageError("grad_check: loss must be scalar");
  return loss.item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  const double first = evaluate(loss_fn);
  const double second = evaluate(loss_fn);
  if (first != second) {
    throw CheckError("grad_check: loss function is not deterministic");
  }

  for (Tensor& p : params) {
    if (!p.requires_grad()) throw UsageError("grad_check: parameter does not require grad");
    p.mutable_grad();
    p.zero_grad();
  }
  {
    GradTape tape;
    GradTape::Scope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    std::vector<std::size_t> entries(p.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_tensor > 0 && entries.size() > options.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    auto values = p.mutable_values();
    for (std::size_t idx : entries) {
      const double original = values[idx];
      values[idx] = original + options.eps;
      const double plus = evaluate(loss_fn);
      values[idx] = original - options.eps;
      const double minus = evaluate(loss_fn);
      values[idx] = original;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double analytic = p.grad()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = t;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace aures
