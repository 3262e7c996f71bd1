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

// Checkpoint files:
//
//   8 bytes   "AURESCKP"
//   u32 LE    header length H
//   H bytes   JSON header: format_version, config, step, rng_state,
//             tensors [{name, shape}], blob_hash
//   ...       float32 LE values of every tensor, in header order
//
// blob_hash is FNV-1a 64 over the blob bytes, hex encoded.

#ifndef AURES_CHECKPOINT_HPP_
#define AURES_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aures/layers.hpp"
#include "aures/model.hpp"
#include "aures/tensor.hpp"

namespace aures {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;  // float32-representable
};

struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelConfig config;
  std::uint64_t step = 0;
  std::string rng_state;  // textual std::mt19937_64 state, may be empty
  std::vector<CheckpointTensor> tensors;
};

// Values must be float32-representable; anything else throws
// CheckpointError rather than silently losing precision.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     std::uint64_t step, const std::string& rng_state,
                     const nn::ParameterList& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies the named tensors into params. Throws CheckpointError when the
// configs differ (naming the first differing field) or a parameter is absent
// or mis-shaped. Extra checkpoint tensors are ignored.
void restore(const Checkpoint& ckpt, const ModelConfig& expected, nn::ParameterList& params);

// Builds a model from the checkpoint's own config and restores it.
Model load_model(const std::filesystem::path& path);

}  // namespace aures

#endif  // AURES_CHECKPOINT_HPP_
