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

#include <gtest/gtest.h>

#include <functional>
#include <string>
#include <vector>

#include "aures/errors.hpp"
#include "aures/grad_check.hpp"
#include "aures/ops.hpp"
#include "test_util.hpp"

namespace aures {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

TEST(GradTapeTest, SumOfSquaresGradient) {
  Tensor x = random_tensor({3, 4}, 1, true);
  GradTape tape;
  {
    GradTape::Scope scope(tape);
    tape.backward(sum(mul(x, x)));
  }
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * x.values()[i]);
}

TEST(GradTapeTest, UnusedParameterGetsZeroGradient) {
  Tensor x = random_tensor({3}, 2, true);
  Tensor p = random_tensor({3}, 3, true);
  p.mutable_grad();
  GradTape tape;
  GradTape::Scope scope(tape);
  tape.backward(sum(x));
  for (double g : p.grad()) EXPECT_EQ(g, 0.0);
}

TEST(GradTapeTest, GradientsAccumulateAcrossUsesAndPasses) {
  Tensor x(Shape{1}, std::vector<double>{1.5});
  x.set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    GradTape tape;
    GradTape::Scope scope(tape);
    tape.backward(sum(add(mul(x, x), x)));
  }
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * (2 * 1.5 + 1));
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(GradTapeTest, ReplaysInReverseRecordingOrder) {
  GradTape tape;
  std::vector<int> order;
  for (int i = 0; i < 4; ++i) tape.record([&order, i] { order.push_back(i); });
  Tensor loss = Tensor::scalar(0.0);
  loss.set_requires_grad(true);
  tape.backward(loss);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1, 0}));
  tape.reset();
  EXPECT_TRUE(tape.empty());
}

TEST(GradTapeTest, NonScalarBackwardIsUsageError) {
  Tensor x = random_tensor({2}, 4, true);
  GradTape tape;
  GradTape::Scope scope(tape);
  EXPECT_THROW(tape.backward(mul(x, x)), UsageError);
}

TEST(GradTapeTest, NothingRecordedWithoutTape) {
  Tensor x = random_tensor({2}, 5, true);
  Tensor y = sum(mul(x, x));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(backward(y), UsageError);
}

// Backward is linear: grad(a f + b g) = a grad f + b grad g.
TEST(GradTapeTest, BackwardIsLinear) {
  Tensor x = random_tensor({2, 3, 5, 4}, 6, true);
  Tensor w = random_tensor({4, 3, 3, 3}, 7, true);
  auto f = [&] { return sum(scaled_gelu(conv2d(x, w, {.pad_t = 1, .pad_f = 1}))); };
  auto g = [&] { return mean(mul(x, x)); };
  auto grads_of = [&](const std::function<Tensor()>& loss_fn) {
    x.mutable_grad();
    x.zero_grad();
    w.mutable_grad();
    w.zero_grad();
    GradTape tape;
    GradTape::Scope scope(tape);
    tape.backward(loss_fn());
    std::vector<double> out(x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  const double a = 0.7, b = -2.3;
  auto gf = grads_of(f);
  auto gg = grads_of(g);
  auto gc = grads_of([&] { return add(scale(f(), a), scale(g(), b)); });
  std::vector<double> expect(gf.size());
  for (std::size_t i = 0; i < gf.size(); ++i) expect[i] = a * gf[i] + b * gg[i];
  EXPECT_LT(max_abs_diff(gc, expect), 1e-12);
}

struct OpCase {
  std::string name;
  std::function<Tensor(const Tensor&, const Tensor&)> fn;
  Shape a, b;
};

// Every op type against central differences in double precision.
TEST(GradCheckTest, EveryOpMatchesFiniteDifferences) {
  const std::vector<OpCase> cases = {
      {"add", [](auto& a, auto& b) { return add(a, b); }, {3, 4}, {3, 4}},
      {"sub", [](auto& a, auto& b) { return sub(a, b); }, {3, 4}, {3, 4}},
      {"mul", [](auto& a, auto& b) { return mul(a, b); }, {3, 4}, {3, 4}},
      {"exp", [](auto& a, auto&) { return exp(a); }, {5}, {1}},
      {"log", [](auto& a, auto&) { return log(add_scalar(mul(a, a), 0.5)); }, {5}, {1}},
      {"sqrt", [](auto& a, auto&) { return sqrt(add_scalar(mul(a, a), 0.5)); }, {5}, {1}},
      {"sigmoid", [](auto& a, auto&) { return sigmoid(scale(a, 3.0)); }, {6}, {1}},
      {"gelu", [](auto& a, auto&) { return scaled_gelu(scale(a, 2.0)); }, {6}, {1}},
      {"softmax", [](auto& a, auto& b) { return mul(softmax(a, 1), b); }, {3, 4}, {3, 4}},
      {"log_softmax", [](auto& a, auto& b) { return mul(log_softmax(a, 0), b); }, {3, 4}, {3, 4}},
      {"matmul", [](auto& a, auto& b) { return matmul(a, b); }, {3, 4}, {4, 2}},
      {"transpose", [](auto& a, auto& b) { return mul(transpose(a), b); }, {3, 4}, {4, 3}},
      {"reshape", [](auto& a, auto& b) { return mul(reshape(a, {4, 3}), b); }, {3, 4}, {4, 3}},
      {"concat", [](auto& a, auto& b) { std::vector<Tensor> p{a, b}; return mul(concat(p, 1), concat(p, 1)); }, {2, 3}, {2, 2}},
      {"subsample", [](auto& a, auto&) { return mul(subsample(a, 2, 3), subsample(a, 2, 3)); }, {1, 2, 7, 2}, {1}},
      {"global_avg_pool", [](auto& a, auto&) { Tensor p = global_avg_pool(a); return mul(p, p); }, {2, 3, 4, 2}, {1}},
      {"avg_pool_ceil", [](auto& a, auto&) { Tensor p = avg_pool_ceil(a, 2, 2); return mul(p, p); }, {1, 2, 5, 3}, {1}},
      {"mul_leading", [](auto& a, auto& b) { return mul_leading(a, b); }, {2, 3, 2, 2}, {2, 3}},
      {"add_channel", [](auto& a, auto& b) { Tensor y = add_channel(a, b); return mul(y, y); }, {2, 3, 2}, {3}},
      {"mul_channel", [](auto& a, auto& b) { return mul_channel(a, b); }, {2, 3, 2}, {3}},
      {"conv2d", [](auto& a, auto& b) { return conv2d(a, b, {.stride_t = 2, .stride_f = 1, .pad_t = 1, .pad_f = 1, .groups = 2}); }, {2, 4, 5, 4}, {4, 2, 3, 3}},
      {"weight_standardize", [](auto& a, auto& b) { Tensor w = weight_standardize(a, b); return mul(w, w); }, {3, 2, 2, 1}, {3}},
      {"bn", [](auto& a, auto&) { return mul(moment_normalize(a, MomentGroups::kPerChannel, 1e-5), a); }, {3, 2, 2, 2}, {1}},
      {"ln", [](auto& a, auto&) { return mul(moment_normalize(a, MomentGroups::kPerExample, 1e-5), a); }, {3, 2, 2, 2}, {1}},
      {"in", [](auto& a, auto&) { return mul(moment_normalize(a, MomentGroups::kPerExampleChannel, 1e-5), a); }, {3, 2, 2, 2}, {1}},
      {"l2_normalize", [](auto& a, auto& b) { return mul(l2_normalize_rows(a), b); }, {3, 4}, {3, 4}},
      {"bce", [](auto& a, auto& b) { return sigmoid_bce_with_logits(scale(a, 3.0), Tensor(a.shape(), 0.3)); }, {3, 4}, {3, 4}},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    Tensor a = random_tensor(c.a, seed++, true);
    Tensor b = random_tensor(c.b, seed++, true);
    Tensor probe = random_tensor(c.fn(a, b).shape(), seed++);
    std::vector<Tensor> params{a, b};
    auto loss = [&] { return sum(mul(c.fn(a, b), probe)); };
    const GradCheckReport r = grad_check(loss, params);
    EXPECT_LT(r.max_relative_error, 1e-4) << c.name;
  }
}

TEST(GradCheckTest, TwoLayerConvPoolNet) {
  Tensor x = random_tensor({2, 3, 8, 8}, 40);
  Tensor w1 = random_tensor({4, 3, 3, 3}, 41, true);
  Tensor b1 = random_tensor({4}, 42, true);
  Tensor w2 = random_tensor({5, 4, 3, 1}, 43, true);
  Tensor head = random_tensor({5, 2}, 44, true);
  auto loss = [&] {
    Tensor h = scaled_gelu(add_channel(conv2d(x, w1, {.stride_t = 1, .stride_f = 2, .pad_t = 1, .pad_f = 1}), b1));
    h = conv2d(h, w2, {.stride_t = 2, .pad_t = 1});
    Tensor logits = matmul(global_avg_pool(h), head);
    return mean(mul(logits, logits));
  };
  std::vector<Tensor> params{w1, b1, w2, head};
  EXPECT_LT(grad_check(loss, params).max_relative_error, 1e-4);
}

TEST(GradCheckTest, QuadraticAtThree) {
  Tensor x(Shape{1}, std::vector<double>{3.0});
  x.set_requires_grad(true);
  std::vector<Tensor> params{x};
  EXPECT_LT(grad_check([&] { return sum(mul(x, x)); }, params).max_relative_error, 1e-10);
}

TEST(GradCheckTest, AnalyticallyZeroGradientReportsZero) {
  Tensor x = random_tensor({3}, 50, true);
  Tensor y = random_tensor({3}, 51, true);
  std::vector<Tensor> params{x, y};
  EXPECT_EQ(grad_check([&] { return sum(mul(y, y)); }, std::span(params).first(1))
                .max_relative_error,
            0.0);
}

TEST(GradCheckTest, NonDeterministicFunctionIsRejected) {
  Tensor x = random_tensor({2}, 52, true);
  int calls = 0;
  std::vector<Tensor> params{x};
  EXPECT_THROW(grad_check([&] { return add_scalar(sum(x), ++calls); }, params), CheckError);
}

}  // namespace
}  // namespace aures
