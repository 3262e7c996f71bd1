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

// Internal helpers shared by the op implementations.

#ifndef AURES_SRC_OP_SUPPORT_HPP_
#define AURES_SRC_OP_SUPPORT_HPP_

#include <cmath>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "aures/errors.hpp"
#include "aures/tensor.hpp"

namespace aures::internal {

using NodePtr = std::shared_ptr<detail::Node>;

inline bool should_track(std::initializer_list<const Tensor*> inputs) {
  if (GradTape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline void require_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite result in ") + op);
  }
}

// Wraps computed values into a result tensor, validating finiteness.
inline Tensor make_result(Shape shape, std::vector<double> values, bool track, const char* op) {
  require_finite(values, op);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = track;
  return Tensor::from_node(std::move(node));
}

// Records fn(out_grad) on the active tape. fn runs only if the backward pass
// actually reached the output.
template <typename Fn>
void on_backward(const Tensor& out, Fn fn) {
  NodePtr out_node = out.node();
  GradTape::active()->record([out_node, fn = std::move(fn)]() {
    if (out_node->grad.empty()) return;
    for (double g : out_node->grad) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient during backward");
    }
    fn(out_node->grad);
  });
}

// Gradient buffer of an input, or nullptr when it does not require grad.
inline std::vector<double>* grad_of(const NodePtr& node) {
  return node->requires_grad ? &node->ensure_grad() : nullptr;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

inline void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(a.shape()));
  }
}

}  // namespace aures::internal

#endif  // AURES_SRC_OP_SUPPORT_HPP_
