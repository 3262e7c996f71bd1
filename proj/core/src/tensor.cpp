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

#include "aures/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "aures/errors.hpp"

namespace aures {

namespace {

thread_local GradTape* g_active_tape = nullptr;

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string("non-finite value in ") + what);
    }
  }
}

const detail::Node& require(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw UsageError("access to an undefined tensor");
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void round_to_precision(std::span<double> values, Precision precision) {
  if (precision != Precision::kF32) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, double fill) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->values.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  check_finite(node_->values, "tensor construction");
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  check_finite(values, "tensor construction");
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return require(node_).values.size(); }

std::span<const double> Tensor::values() const { return require(node_).values; }

std::span<double> Tensor::mutable_values() {
  require(node_);
  return node_->values;
}

double Tensor::item() const {
  const auto& n = require(node_);
  if (n.values.size() != 1) {
    throw UsageError("item() on tensor of shape " + shape_string(n.shape));
  }
  return n.values[0];
}

bool Tensor::requires_grad() const { return require(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  require(node_);
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !require(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  const auto& n = require(node_);
  if (n.grad.empty()) throw UsageError("tensor has no gradient");
  return n.grad;
}

std::span<double> Tensor::mutable_grad() {
  require(node_);
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  require(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = require(node_);
  return Tensor(n.shape, n.values);
}

void GradTape::record(BackwardFn fn) { entries_.push_back(std::move(fn)); }

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward on a loss that is not on the tape");
  }
  auto& g = loss.node()->ensure_grad();
  g[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

GradTape* GradTape::active() { return g_active_tape; }

GradTape::Scope::Scope(GradTape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

GradTape::Scope::~Scope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  GradTape* tape = GradTape::active();
  if (tape == nullptr) throw UsageError("backward without an active tape");
  tape->backward(loss);
}

}  // namespace aures
