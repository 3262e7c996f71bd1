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

// Dense row-major tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle to a shared node holding values and, once a
// backward pass reaches it, a gradient buffer of identical shape. Copies of a
// Tensor alias the same node; use detach() for an independent copy.
//
// Differentiation is tape based. Operations executed while a GradTape::Scope
// is alive, and whose inputs require grad, append a backward closure to the
// active tape. GradTape::backward() replays the closures in exact reverse
// recording order. Without an active tape every op runs in inference mode and
// nothing is recorded.
//
//   GradTape tape;
//   {
//     GradTape::Scope scope(tape);
//     Tensor loss = sum(mul(w, w));
//     tape.backward(loss);
//   }
//   // w.grad() now holds 2w. Gradients accumulate until zero_grad().

#ifndef AURES_TENSOR_HPP_
#define AURES_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aures {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Storage precision of trainable parameters. Arithmetic always runs in
// double; in f32 mode parameters are rounded to the nearest float after
// initialization and after every optimizer update, which makes float32
// checkpoints bit-exact.
enum class Precision { kF64, kF32 };

void round_to_precision(std::span<double> values, Precision precision);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  // A default-constructed tensor is null; most accessors require defined().
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  // Leaf tensor with requires_grad set.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  // Direct write access, bypassing the tape. Intended for initialization and
  // optimizer updates of leaf tensors.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

class GradTape {
 public:
  using BackwardFn = std::function<void()>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(BackwardFn fn);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void reset() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  // loss must be a single-element tensor that requires grad.
  void backward(const Tensor& loss);

  static GradTape* active();

  // Makes a tape active for the current thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* previous_;
  };

 private:
  std::vector<BackwardFn> entries_;
};

// Backward on the active tape.
void backward(const Tensor& loss);

}  // namespace aures

#endif  // AURES_TENSOR_HPP_
