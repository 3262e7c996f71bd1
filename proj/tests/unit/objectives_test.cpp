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

#include "aures/objectives.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "aures/errors.hpp"
#include "aures/grad_check.hpp"
#include "aures/ops.hpp"
#include "test_util.hpp"

namespace aures {
namespace {

using testing::random_tensor;
using testing::random_values;

// Row-major [rows, cols] helper for the plain-double oracles below.
using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Tensor& t) {
  Rows r(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) r[i][j] = t.values()[i * t.dim(1) + j];
  }
  return r;
}

Tensor from_rows(const Rows& r) {
  std::vector<double> v;
  for (const auto& row : r) v.insert(v.end(), row.begin(), row.end());
  return Tensor({r.size(), r[0].size()}, std::move(v));
}

// Direct evaluation of the contrastive loss from cosine similarities.
double nt_xent_oracle(const Rows& a, const Rows& b, double tau) {
  Rows z = a;
  z.insert(z.end(), b.begin(), b.end());
  const std::size_t m = z.size();
  const std::size_t n = a.size();
  auto cosine = [&](std::size_t i, std::size_t j) {
    double dot = 0, ni = 0, nj = 0;
    for (std::size_t k = 0; k < z[i].size(); ++k) {
      dot += z[i][k] * z[j][k];
      ni += z[i][k] * z[i][k];
      nj += z[j][k] * z[j][k];
    }
    return dot / std::sqrt(ni * nj);
  };
  double total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t pos = (i + n) % m;
    double denom = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (k != i) denom += std::exp(cosine(i, k) / tau);
    }
    total += -(cosine(i, pos) / tau - std::log(denom));
  }
  return total / static_cast<double>(m);
}

TEST(NtXentTest, OrthogonalPairsClosedForm) {
  const Tensor views({2, 2}, {1, 0, 0, 1});
  const double loss = nt_xent(views, views, 0.1).item();
  const double expected = -std::log(std::exp(10.0) / (std::exp(10.0) + 2.0));
  EXPECT_NEAR(loss, expected, 1e-8);
  EXPECT_NEAR(loss, 9.079e-5, 5e-8);
}

TEST(NtXentTest, MatchesBruteForceOracle) {
  for (std::size_t n = 2; n <= 4; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Tensor a = random_tensor({n, 6}, 100 + seed);
      const Tensor b = random_tensor({n, 6}, 200 + seed);
      EXPECT_NEAR(nt_xent(a, b, 0.1).item(), nt_xent_oracle(to_rows(a), to_rows(b), 0.1), 1e-8)
          << "n=" << n;
    }
  }
}

TEST(NtXentTest, SymmetricInViews) {
  const Tensor a = random_tensor({3, 5}, 1);
  const Tensor b = random_tensor({3, 5}, 2);
  EXPECT_NEAR(nt_xent(a, b).item(), nt_xent(b, a).item(), 1e-14);
}

TEST(NtXentTest, InvariantToCommonPermutation) {
  const Rows a = to_rows(random_tensor({4, 5}, 3));
  const Rows b = to_rows(random_tensor({4, 5}, 4));
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Rows pa, pb;
  for (std::size_t i : perm) {
    pa.push_back(a[i]);
    pb.push_back(b[i]);
  }
  EXPECT_NEAR(nt_xent(from_rows(a), from_rows(b)).item(),
              nt_xent(from_rows(pa), from_rows(pb)).item(), 1e-12);
}

TEST(NtXentTest, InvariantToPositiveRescaling) {
  const Tensor a = random_tensor({3, 4}, 5);
  const Tensor b = random_tensor({3, 4}, 6);
  const double base = nt_xent(a, b).item();
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_NEAR(nt_xent(scale(a, c), scale(b, c)).item(), base, 1e-8) << c;
  }
}

TEST(NtXentTest, InvariantToCommonRotation) {
  const std::size_t d = 6;
  // Orthonormal basis by Gram-Schmidt on random columns.
  Rows q = to_rows(random_tensor({d, d}, 7));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += q[i][k] * q[j][k];
      for (std::size_t k = 0; k < d; ++k) q[i][k] -= dot * q[j][k];
    }
    double norm = 0;
    for (double x : q[i]) norm += x * x;
    for (double& x : q[i]) x /= std::sqrt(norm);
  }
  const Tensor rot = from_rows(q);
  const Tensor a = random_tensor({4, d}, 8);
  const Tensor b = random_tensor({4, d}, 9);
  EXPECT_NEAR(nt_xent(matmul(a, rot), matmul(b, rot)).item(), nt_xent(a, b).item(), 1e-6);
}

TEST(NtXentTest, SinglePairRejected) {
  const Tensor a = random_tensor({1, 4}, 10);
  EXPECT_THROW(nt_xent(a, a), UsageError);
}

TEST(ClassificationLossTest, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 5u, 8u}) {
    std::vector<double> t(3 * k, 0.0);
    for (std::size_t i = 0; i < 3; ++i) t[i * k + (i % k)] = 1.0;
    const double loss =
        classification_loss(Tensor({3, k}, 0.25), Tensor({3, k}, std::move(t)), false).item();
    EXPECT_NEAR(loss, std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(ClassificationLossTest, ZeroLogitsMultiLabelGiveLog2) {
  const std::vector<double> t{1, 0, 0, 1, 1, 1};
  const double loss = classification_loss(Tensor({2, 3}, 0.0), Tensor({2, 3}, t), true).item();
  EXPECT_NEAR(loss, std::numbers::ln2, 1e-12);
}

TEST(ClassificationLossTest, MatchFormulaOracles) {
  const std::size_t n = 5, k = 4;
  const auto logits = random_values(n * k, 11, -6.0, 6.0);
  auto soft = random_values(n * k, 12, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += soft[i * k + j];
    for (std::size_t j = 0; j < k; ++j) soft[i * k + j] /= s;
  }
  double ce = 0, bce = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits[i * k + j]);
    for (std::size_t j = 0; j < k; ++j) {
      const double x = logits[i * k + j];
      const double t = soft[i * k + j];
      ce -= t * (x - std::log(z));
      const double p = 1.0 / (1.0 + std::exp(-x));
      bce -= t * std::log(p) + (1 - t) * std::log(1 - p);
    }
  }
  ce /= n;
  bce /= n * k;
  const Tensor lt({n, k}, logits);
  const Tensor tt({n, k}, soft);
  EXPECT_NEAR(classification_loss(lt, tt, false).item(), ce, 1e-10);
  EXPECT_NEAR(classification_loss(lt, tt, true).item(), bce, 1e-10);
}

TEST(ClassificationLossTest, MixedTargetsAreLinear) {
  const std::size_t n = 3, k = 5;
  const Tensor logits = random_tensor({n, k}, 13);
  std::vector<double> y1(n * k, 0.0), y2(n * k, 0.0), mixed(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    y1[i * k + i] = 1.0;
    y2[i * k + (i + 2) % k] = 1.0;
  }
  const double lambda = 0.73;
  for (std::size_t i = 0; i < n * k; ++i) mixed[i] = lambda * y1[i] + (1 - lambda) * y2[i];
  const double l1 = classification_loss(logits, Tensor({n, k}, y1), false).item();
  const double l2 = classification_loss(logits, Tensor({n, k}, y2), false).item();
  const double lm = classification_loss(logits, Tensor({n, k}, mixed), false).item();
  EXPECT_NEAR(lm, lambda * l1 + (1 - lambda) * l2, 1e-10);
}

TEST(ClassificationLossTest, LossVanishesOnConfidentCorrectLogits) {
  const Tensor targets({2, 3}, {0, 1, 0, 0, 0, 1});
  const Tensor right({2, 3}, {0, 40, 0, 0, 0, 40});
  const Tensor wrong({2, 3}, {40, 0, 0, 40, 0, 0});
  EXPECT_LT(classification_loss(right, targets, false).item(), 1e-15);
  EXPECT_GT(classification_loss(wrong, targets, false).item(), 39.0);
}

TEST(ClassificationLossTest, SlotLossIsSumOfSlots) {
  const Tensor a = random_tensor({2, 3}, 14);
  const Tensor b = random_tensor({2, 4}, 15);
  const Tensor ta({2, 3}, {1, 0, 0, 0, 0, 1});
  const Tensor tb({2, 4}, {0, 1, 0, 0, 0, 0, 1, 0});
  const std::vector<SlotLogits> slots{{a, ta}, {b, tb}};
  EXPECT_NEAR(classification_loss(slots).item(),
              classification_loss(a, ta, false).item() + classification_loss(b, tb, false).item(),
              1e-14);
}

TEST(ClassificationLossTest, ShapeMismatchRejected) {
  EXPECT_THROW(classification_loss(Tensor({2, 3}), Tensor({2, 4}), false), DimensionError);
}

TEST(MixingTest, BetaMeanMatches) {
  std::mt19937_64 rng(16);
  const int n = 100000;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double l = sample_beta(kMixAlpha, kMixBeta, rng);
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
    total += l;
  }
  EXPECT_NEAR(total / n, 5.0 / 7.0, 0.005);
}

TEST(MixingTest, DerangementHasNoFixedPoints) {
  std::mt19937_64 rng(17);
  for (std::size_t n = 2; n < 12; ++n) {
    const auto p = derangement(n, rng);
    EXPECT_EQ(std::set<std::size_t>(p.begin(), p.end()).size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NE(p[i], i);
  }
}

dsp::Waveform tone(double hz, std::size_t n) {
  dsp::Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / dsp::kSampleRate);
  }
  return w;
}

TEST(MixingTest, UnitLambdaIsIdentity) {
  const std::vector<dsp::Waveform> clips{tone(300, 500), tone(900, 500)};
  const std::vector<double> lambdas{1.0, 1.0};
  const std::vector<std::size_t> partners{1, 0};
  const auto out = mix_with(clips, {}, lambdas, partners);
  EXPECT_EQ(out.clips[0].samples, clips[0].samples);
  EXPECT_EQ(out.clips[1].samples, clips[1].samples);
}

TEST(MixingTest, HalfLambdaAveragesClipsAndLabels) {
  const std::vector<dsp::Waveform> clips{tone(300, 500), tone(900, 500)};
  const std::vector<std::vector<double>> labels{{1, 0}, {0, 1}};
  const std::vector<double> lambdas{0.5, 0.5};
  const std::vector<std::size_t> partners{1, 0};
  const auto out = mix_with(clips, labels, lambdas, partners);
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_NEAR(out.clips[0].samples[i], 0.5 * (clips[0].samples[i] + clips[1].samples[i]),
                1e-15);
  }
  EXPECT_EQ(out.labels[0], (std::vector<double>{0.5, 0.5}));
}

TEST(MixingTest, SingleClipUnchanged) {
  std::mt19937_64 rng(18);
  const std::vector<dsp::Waveform> clips{tone(440, 300)};
  const auto out = mix_examples(clips, {}, rng);
  EXPECT_EQ(out.clips[0].samples, clips[0].samples);
}

TEST(MixingTest, RandomMixUsesDerangedPartners) {
  std::mt19937_64 rng(19);
  std::vector<dsp::Waveform> clips;
  std::vector<std::vector<double>> labels;
  for (int k = 0; k < 4; ++k) {
    clips.push_back(tone(200.0 * (k + 1), 200));
    labels.push_back(std::vector<double>(4, 0.0));
    labels.back()[k] = 1.0;
  }
  const auto out = mix_examples(clips, labels, rng);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t j = out.partners[i];
    EXPECT_NE(j, i);
    EXPECT_NEAR(out.labels[i][i], out.lambdas[i], 1e-15);
    EXPECT_NEAR(out.labels[i][j], 1 - out.lambdas[i], 1e-15);
  }
}

TEST(ViewGeneratorTest, ProducesStandardizedCrops) {
  const ViewGenerator views(64, 40, true);
  std::mt19937_64 rng(20);
  const std::vector<dsp::Waveform> clips{tone(300, 16000), tone(700, 16000), tone(1500, 9000)};
  const Tensor batch = views.generate(clips, rng);
  ASSERT_EQ(batch.shape(), (Shape{3, 1, 64, 40}));
  const std::size_t per = 64 * 40;
  for (std::size_t i = 0; i < 3; ++i) {
    double m = 0, v = 0;
    for (std::size_t k = 0; k < per; ++k) m += batch.values()[i * per + k];
    m /= per;
    for (std::size_t k = 0; k < per; ++k) v += std::pow(batch.values()[i * per + k] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(v / per), 1.0, 1e-6);
  }
}

TEST(ViewGeneratorTest, SeededGenerationRepeats) {
  const ViewGenerator views(32, 40, true);
  const std::vector<dsp::Waveform> clips{tone(300, 8000), tone(700, 8000)};
  std::mt19937_64 r1(21), r2(21);
  const Tensor a = views.generate(clips, r1);
  const Tensor b = views.generate(clips, r2);
  EXPECT_TRUE(std::ranges::equal(a.values(), b.values()));
}

TEST(ProjectorTest, DeskWidthAndNames) {
  const ModelConfig cfg = desk_config();
  const Projector p = make_projector(cfg, 108, 1);
  nn::ParameterList params;
  p.collect("projector", params);
  ASSERT_EQ(params.size(), 8u);
  EXPECT_EQ(params[0].name, "projector.hidden0.weight");
  EXPECT_EQ(params[0].tensor.shape(), (Shape{108, 256}));
  EXPECT_EQ(params[6].tensor.shape(), (Shape{256, 256}));
  EXPECT_EQ(p.forward(random_tensor({2, 108}, 3)).shape(), (Shape{2, 256}));
}

ModelConfig tiny_config() {
  ModelConfig cfg = desk_config();
  cfg.input_frames = 32;
  cfg.input_mels = 16;
  return cfg;
}

TEST(SimclrLossTest, IdenticalViewsBeatMutuallyOrthogonalEmbeddings) {
  // With all 2N embeddings mutually orthogonal every logit is 0 and the loss
  // is ln(2N - 1); identical views put each positive at the maximal logit.
  const ModelConfig cfg = tiny_config();
  Model model(cfg, 3);
  const Projector projector = make_projector(cfg, model.feature_dim(), 4, 32);
  const Tensor view = random_tensor({4, 1, 32, 16}, 5);
  const double loss = simclr_loss(model, projector, view, view, {}).item();
  EXPECT_LT(loss, std::log(7.0));
}

TEST(SimclrLossTest, GradientMatchesFiniteDifferences) {
  ModelConfig cfg = tiny_config();
  cfg.block_repeats = {1, 1, 1, 1};
  Model model(cfg, 6);
  const Projector projector = make_projector(cfg, model.feature_dim(), 7, 16);
  const Tensor a = random_tensor({2, 1, 32, 16}, 8);
  const Tensor b = random_tensor({2, 1, 32, 16}, 9);

  std::vector<Tensor> params = model.trainable_parameters();
  nn::ParameterList head;
  projector.collect("projector", head);
  for (auto& p : head) params.push_back(p.tensor);

  auto loss_fn = [&] {
    std::mt19937_64 rng(10);
    return simclr_loss(model, projector, a, b, {.training = true, .rng = &rng});
  };
  // Some squeeze-excite gradients are ~1e-6, where a 1e-5 step is dominated
  // by round-off in the loss; 1e-4 keeps the O(h^2) truncation far below.
  GradCheckOptions options;
  options.eps = 1e-4;
  options.max_entries_per_tensor = 3;
  options.seed = 11;
  const GradCheckReport report = grad_check(loss_fn, params, options);
  EXPECT_GT(report.entries_checked, 100u);
  EXPECT_LT(report.max_relative_error, 1e-4)
      << "tensor " << report.worst_tensor << " index " << report.worst_index;
}

}  // namespace
}  // namespace aures
