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

#include "aures/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aures/errors.hpp"
#include "test_util.hpp"

namespace aures::nn {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

// Slice example n out of a [N,...] tensor.
Tensor example(const Tensor& x, std::size_t n) {
  Shape s = x.shape();
  const std::size_t per = x.size() / s[0];
  s[0] = 1;
  std::vector<double> v(x.values().begin() + n * per, x.values().begin() + (n + 1) * per);
  return Tensor(s, std::move(v));
}

std::vector<double> example_values(const Tensor& x, std::size_t n) {
  const std::size_t per = x.size() / x.dim(0);
  return {x.values().begin() + n * per, x.values().begin() + (n + 1) * per};
}

TEST(WSConvTest, ConstantKernelGivesBiasEverywhere) {
  std::mt19937_64 rng(1);
  WSConv2d conv(2, 3, 3, 3, {.pad_t = 1, .pad_f = 1}, rng);
  for (double& w : conv.weight().mutable_values()) w = 0.7;
  for (std::size_t o = 0; o < 3; ++o) conv.bias().mutable_values()[o] = 0.5 * o;
  const Tensor y = conv.forward(random_tensor({2, 2, 5, 4}, 2));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t o = (i / 20) % 3;
    EXPECT_EQ(y.values()[i], 0.5 * o);
  }
}

TEST(WSConvTest, StandardizedKernelMoments) {
  std::mt19937_64 rng(3);
  WSConv2d conv(6, 4, 3, 1, {.groups = 2}, rng);
  const double gains[] = {1.0, 2.0, 0.5, 3.0};
  for (std::size_t o = 0; o < 4; ++o) conv.gain().node()->values[o] = gains[o];
  const Tensor k = conv.effective_kernel();
  const std::size_t fan_in = 3 * 3;
  for (std::size_t o = 0; o < 4; ++o) {
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double v = k.values()[o * fan_in + i] * std::sqrt(double(fan_in)) / gains[o];
      mean += v;
      sq += v * v;
    }
    mean /= fan_in;
    EXPECT_NEAR(mean, 0.0, 1e-7);
    // Scaled by sqrt(fan_in), the standardized kernel has unit variance;
    // unscaled this is 1/fan_in.
    EXPECT_NEAR(sq / fan_in - mean * mean, 1.0, 1e-6 * fan_in);
  }
}

TEST(WSConvTest, MatchesExplicitStandardizeThenConv) {
  std::mt19937_64 rng(5);
  const Conv2dOptions opts{.stride_t = 1, .stride_f = 2, .pad_t = 1, .pad_f = 1, .groups = 2};
  WSConv2d conv(4, 6, 3, 3, opts, rng);
  for (std::size_t o = 0; o < 6; ++o) {
    conv.gain().node()->values[o] = 0.5 + 0.25 * o;
    conv.bias().mutable_values()[o] = -0.1 * o;
  }
  // Oracle: standardize in plain loops, convolve with the raw op, add bias.
  const auto w = conv.weight().values();
  const std::size_t fan_in = 2 * 3 * 3;
  std::vector<double> k(w.size());
  for (std::size_t o = 0; o < 6; ++o) {
    long double mean = 0.0L;
    for (std::size_t i = 0; i < fan_in; ++i) mean += w[o * fan_in + i];
    mean /= fan_in;
    long double var = 0.0L;
    for (std::size_t i = 0; i < fan_in; ++i) {
      var += (w[o * fan_in + i] - mean) * (w[o * fan_in + i] - mean);
    }
    var /= fan_in;
    const long double denom = std::sqrt(var) * std::sqrt(static_cast<long double>(fan_in));
    for (std::size_t i = 0; i < fan_in; ++i) {
      k[o * fan_in + i] =
          static_cast<double>(conv.gain().values()[o] * (w[o * fan_in + i] - mean) / denom);
    }
  }
  const Tensor x = random_tensor({2, 4, 6, 8}, 6);
  const Tensor plain = conv2d(x, Tensor(conv.weight().shape(), k), opts);
  const Tensor y = conv.forward(x);
  ASSERT_EQ(y.shape(), plain.shape());
  std::vector<double> expected(plain.values().begin(), plain.values().end());
  const std::size_t area = y.dim(2) * y.dim(3);
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += -0.1 * ((i / area) % 6);
  EXPECT_LT(max_abs_diff(y.values(), expected), 1e-10);
}

TEST(WSConvTest, InvariantToConstantWeightShift) {
  std::mt19937_64 rng(7);
  WSConv2d conv(3, 5, 3, 3, {.pad_t = 1, .pad_f = 1}, rng);
  const Tensor x = random_tensor({2, 3, 7, 6}, 8);
  const Tensor before = conv.forward(x);
  for (double& w : conv.weight().mutable_values()) w += 3.25;
  const Tensor after = conv.forward(x);
  EXPECT_LT(max_abs_diff(before.values(), after.values()), 1e-8);
}

TEST(WSConvTest, IndivisibleGroupsRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(WSConv2d(6, 4, 1, 1, {.groups = 4}, rng), ConfigError);
}

TEST(NormalizerTest, LayerNormOfConstantIsZero) {
  Normalizer ln(NormKind::kLayerNorm, 3);
  const Tensor y = ln.forward(Tensor({2, 3, 4, 5}, 2.5), true);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(NormalizerTest, InstanceNormIgnoresPerExampleChannelOffsets) {
  Normalizer in(NormKind::kInstanceNorm, 3);
  const Tensor x = random_tensor({2, 3, 4, 5}, 11);
  std::vector<double> shifted(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 1.5 * (i / 20) - 2.0;
  const Tensor a = in.forward(x, true);
  const Tensor b = in.forward(Tensor(x.shape(), shifted), true);
  EXPECT_LT(max_abs_diff(a.values(), b.values()), 1e-6);
}

TEST(NormalizerTest, BatchNormHandCalculation) {
  // Batch of 2 examples, 1 channel, 1x2 each: values 1, 3, 5, 7.
  Normalizer bn(NormKind::kBatchNorm, 1);
  const Tensor y = bn.forward(Tensor({2, 1, 1, 2}, {1.0, 3.0, 5.0, 7.0}), true);
  // mean 4, population variance (9 + 1 + 1 + 9) / 4 = 5.
  const double denom = std::sqrt(5.0 + 1e-5);
  const std::vector<double> expected{-3.0 / denom, -1.0 / denom, 1.0 / denom, 3.0 / denom};
  EXPECT_LT(max_abs_diff(y.values(), expected), 1e-12);
  EXPECT_NEAR(bn.running_mean().values()[0], 0.01 * 4.0, 1e-15);
  EXPECT_NEAR(bn.running_var().values()[0], 0.99 + 0.01 * 5.0, 1e-15);
}

TEST(NormalizerTest, BatchNormEvalBeforeTrainingUsesUnitStats) {
  Normalizer bn(NormKind::kBatchNorm, 2);
  const Tensor x = random_tensor({3, 2, 2, 2}, 13);
  const Tensor y = bn.forward(x, false);
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.values()[i], x.values()[i] * s, 1e-15);
}

TEST(NormalizerTest, NoneIsIdentity) {
  Normalizer none(NormKind::kNone, 4);
  const Tensor x = random_tensor({2, 4, 3, 3}, 17);
  EXPECT_TRUE(none.forward(x, true).same_storage(x));
  ParameterList params;
  none.collect("n", params);
  EXPECT_TRUE(params.empty());
}

TEST(NormalizerTest, BatchIndependenceExceptTrainingBatchNorm) {
  const Tensor batch = random_tensor({4, 3, 5, 4}, 19);
  for (NormKind kind : {NormKind::kLayerNorm, NormKind::kInstanceNorm, NormKind::kNone}) {
    Normalizer norm(kind, 3);
    const Tensor together = norm.forward(batch, true);
    for (std::size_t e = 0; e < 4; ++e) {
      const Tensor alone = norm.forward(example(batch, e), true);
      EXPECT_LT(max_abs_diff(alone.values(), example_values(together, e)), 1e-6)
          << norm_kind_name(kind);
    }
  }
  Normalizer bn(NormKind::kBatchNorm, 3);
  const Tensor together = bn.forward(batch, true);
  const Tensor alone = bn.forward(example(batch, 0), true);
  EXPECT_GT(max_abs_diff(alone.values(), example_values(together, 0)), 1e-3);
}

TEST(NormalizerTest, ParseNames) {
  EXPECT_EQ(parse_norm_kind("bn"), NormKind::kBatchNorm);
  EXPECT_EQ(parse_norm_kind("ln"), NormKind::kLayerNorm);
  EXPECT_EQ(parse_norm_kind("in"), NormKind::kInstanceNorm);
  EXPECT_EQ(parse_norm_kind("none"), NormKind::kNone);
  EXPECT_THROW(parse_norm_kind("gn"), ConfigError);
}

TEST(ActivationTest, ZeroMapsToZero) {
  EXPECT_EQ(activation(Tensor({1}, 0.0)).values()[0], 0.0);
}

TEST(ActivationTest, PreservesUnitVarianceOnGaussianInput) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> dist;
  std::vector<double> v(1000000);
  for (double& x : v) x = dist(rng);
  const std::size_t n = v.size();
  const Tensor y = activation(Tensor({n}, std::move(v)));
  double mean = 0.0;
  double sq = 0.0;
  for (double x : y.values()) {
    mean += x;
    sq += x * x;
  }
  mean /= y.size();
  EXPECT_NEAR(sq / y.size() - mean * mean, 1.0, 0.01);
}

TEST(ActivationTest, MonotoneOnGrid) {
  std::vector<double> grid(1000);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = -0.75 + 10.0 * i / 999.0;
  const Tensor y = activation(Tensor({grid.size()}, grid));
  // GELU has its minimum near -0.75; the grid starts there.
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GE(y.values()[i], y.values()[i - 1]);
}

TEST(StochasticDepthTest, RateZeroAndEvalAreIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({4, 2, 3, 3}, 29);
  EXPECT_TRUE(stochastic_depth(x, 0.0, true, &rng).same_storage(x));
  EXPECT_TRUE(stochastic_depth(x, 0.0, false, &rng).same_storage(x));
  EXPECT_TRUE(stochastic_depth(x, 0.5, false, nullptr).same_storage(x));
}

TEST(StochasticDepthTest, KeepFrequencyAndExpectation) {
  std::mt19937_64 rng(31);
  const std::size_t draws = 100000;
  const Tensor x({draws, 1, 1, 2}, 1.5);
  const Tensor y = stochastic_depth(x, 0.1, true, &rng);
  std::size_t kept = 0;
  double total = 0.0;
  for (std::size_t n = 0; n < draws; ++n) {
    const double a = y.values()[2 * n];
    EXPECT_EQ(a, y.values()[2 * n + 1]);  // one draw per example
    if (a != 0.0) {
      ++kept;
      EXPECT_NEAR(a, 1.5 / 0.9, 1e-12);
    }
    total += a;
  }
  EXPECT_NEAR(double(kept) / draws, 0.9, 0.01);
  EXPECT_NEAR(total / draws / 1.5, 1.0, 0.02);
}

TEST(StochasticDepthTest, RejectsBadRate) {
  std::mt19937_64 rng(1);
  const Tensor x({2, 1}, 1.0);
  EXPECT_THROW(stochastic_depth(x, 1.0, true, &rng), ConfigError);
  EXPECT_THROW(stochastic_depth(x, -0.1, true, &rng), ConfigError);
}

TEST(SeparableConvTest, DeltaKernelsAreIdentity) {
  std::mt19937_64 rng(37);
  SeparableConvTF sep(3, 1, 1, 3, 1, rng, /*standardize=*/false);
  for (double& w : sep.time_conv().weight().mutable_values()) w = 1.0;
  for (double& w : sep.freq_conv().weight().mutable_values()) w = 1.0;
  const Tensor x = random_tensor({2, 3, 4, 5}, 41);
  EXPECT_LT(max_abs_diff(sep.forward(x).values(), x.values()), 1e-15);
}

TEST(SeparableConvTest, RankOneKernelMatchesFullConv) {
  std::mt19937_64 rng(43);
  SeparableConvTF sep(1, 3, 3, 1, 1, rng, /*standardize=*/false);
  const double u[] = {0.3, -1.2, 0.8};
  const double v[] = {1.1, 0.4, -0.6};
  for (std::size_t i = 0; i < 3; ++i) {
    sep.time_conv().weight().mutable_values()[i] = u[i];
    sep.freq_conv().weight().mutable_values()[i] = v[i];
  }
  std::vector<double> k(9);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) k[a * 3 + b] = u[a] * v[b];
  }
  const Tensor x = random_tensor({2, 1, 6, 7}, 47);
  const Tensor full = conv2d(x, Tensor({1, 1, 3, 3}, k), {.pad_t = 1, .pad_f = 1});
  EXPECT_LT(max_abs_diff(sep.forward(x).values(), full.values()), 1e-10);
}

TEST(SeparableConvTest, FrequencyStrideShape) {
  std::mt19937_64 rng(53);
  SeparableConvTF sep(4, 3, 3, 2, 2, rng);
  const Tensor y = sep.forward(random_tensor({1, 4, 25, 32}, 59));
  EXPECT_EQ(y.shape(), (Shape{1, 4, 25, 16}));
}

TEST(SqueezeExciteTest, GateBoundedByTwo) {
  std::mt19937_64 rng(61);
  SqueezeExcite se(8, 0.5, rng);
  const Tensor x({2, 8, 3, 3}, 1.0);
  const Tensor y = se.forward(x);
  for (double g : y.values()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 2.0);
  }
  ParameterList params;
  se.collect("se", params);
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].tensor.shape(), (Shape{8, 4}));
}

}  // namespace
}  // namespace aures::nn
