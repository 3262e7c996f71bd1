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

#include "aures/checkpoint.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "aures/errors.hpp"
#include "test_util.hpp"

namespace aures {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::vector<double> values_of(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

std::string error_of(const fs::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.what();
  }
  return {};
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = aures::testing::scratch_dir("ckpt");
    path_ = dir_ / "m.ckpt";
    Model model(cfg_, 5);
    // Perturb the running statistics so buffers are exercised too.
    Tensor x = aures::testing::random_tensor({2, 1, cfg_.input_frames, cfg_.input_mels}, 8);
    std::mt19937_64 rng(1);
    model.forward_features(x, {.training = true, .rng = &rng});
    for (auto& p : model.named_parameters()) {
      round_to_precision(p.tensor.mutable_values(), Precision::kF32);
    }
    reference_ = values_of(model.forward_features(x, {}));
    save_checkpoint(path_, cfg_, 42, "state", model.named_parameters());
    input_ = x;
  }

  ModelConfig cfg_ = desk_config();
  fs::path dir_;
  fs::path path_;
  Tensor input_;
  std::vector<double> reference_;
};

TEST_F(CheckpointTest, RestoredModelForwardsIdentically) {
  const Checkpoint ck = load_checkpoint(path_);
  EXPECT_EQ(ck.step, 42u);
  EXPECT_EQ(ck.rng_state, "state");
  EXPECT_EQ(ck.config, cfg_);
  Model other(cfg_, 99);
  auto params = other.named_parameters();
  restore(ck, cfg_, params);
  const auto out = values_of(other.forward_features(input_, {}));
  EXPECT_EQ(out, reference_);

  Model loaded = load_model(path_);
  EXPECT_EQ(values_of(loaded.forward_features(input_, {})), reference_);
}

TEST_F(CheckpointTest, CorruptedByteIsAHashError) {
  std::string bytes = slurp(path_);
  bytes[bytes.size() - 7] ^= 0x10;
  spit(dir_ / "bad.ckpt", bytes);
  EXPECT_NE(error_of(dir_ / "bad.ckpt").find("hash mismatch"), std::string::npos);
}

TEST_F(CheckpointTest, VersionMismatchIsReported) {
  std::string bytes = slurp(path_);
  const auto at = bytes.find("\"format_version\":1");
  ASSERT_NE(at, std::string::npos);
  bytes[at + 17] = '7';
  spit(dir_ / "v7.ckpt", bytes);
  const std::string msg = error_of(dir_ / "v7.ckpt");
  EXPECT_NE(msg.find("version 7"), std::string::npos) << msg;
  EXPECT_NE(msg.find("version 1"), std::string::npos) << msg;
}

TEST_F(CheckpointTest, ConfigMismatchNamesField) {
  ModelConfig other = cfg_;
  other.sd_rate = 0.25;
  Model m(other, 0);
  auto params = m.named_parameters();
  try {
    restore(load_checkpoint(path_), other, params);
    FAIL() << "expected a config mismatch";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("'sd_rate'"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, TruncationAndJunkRejected) {
  const std::string bytes = slurp(path_);
  spit(dir_ / "short.ckpt", bytes.substr(0, bytes.size() - 4));
  EXPECT_FALSE(error_of(dir_ / "short.ckpt").empty());
  spit(dir_ / "junk.ckpt", "not a checkpoint");
  EXPECT_NE(error_of(dir_ / "junk.ckpt").find("magic"), std::string::npos);
  EXPECT_FALSE(error_of(dir_ / "absent.ckpt").empty());
}

TEST_F(CheckpointTest, MissingParameterNamed) {
  Checkpoint ck = load_checkpoint(path_);
  const std::string dropped = ck.tensors.front().name;
  ck.tensors.erase(ck.tensors.begin());
  Model m(cfg_, 0);
  auto params = m.named_parameters();
  try {
    restore(ck, cfg_, params);
    FAIL() << "expected a missing-parameter error";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos) << e.what();
  }
}

TEST(CheckpointSaveTest, RefusesLossyValues) {
  const auto dir = aures::testing::scratch_dir("ckpt_lossy");
  nn::ParameterList params;
  params.push_back({"w", Tensor({1}, {0.1}), true});
  EXPECT_THROW(save_checkpoint(dir / "x.ckpt", desk_config(), 0, "", params), CheckpointError);
  EXPECT_FALSE(fs::exists(dir / "x.ckpt"));
}

}  // namespace
}  // namespace aures
