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

// JSON run configuration. A file may set any subset of fields; the rest
// keep their defaults and command-line flags override both. Schema:
//
//   {
//     "preset": "desk",              // full | desk
//     "norm": "none",                // bn | ln | in | none
//     "objective": "simclr",         // simclr | supervised
//     "seed": 0,
//     "steps": 2000,
//     "batch_size": 32,
//     "peak_lr": 2e-4,
//     "warmup_fraction": 0.05,
//     "temperature": 0.1,
//     "checkpoint_every": 500,       // 0 = final checkpoint only
//     "mix": true,                   // example mixing of views
//     "corpus": {"kind": "tones", "classes": 8, "clips_per_class": 50,
//                "seconds": 2.0, "test_clips_per_class": 25},
//     "probe": {"steps": 2000, "batch_size": 64, "peak_lr": 2e-4,
//               "window_seconds": 0},  // 0 = training crop length
//     "model": {"input_frames": 128, "sd_rate": 0.1}   // ModelConfig fields
//   }

#ifndef AURES_CONFIG_HPP_
#define AURES_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "aures/data.hpp"
#include "aures/eval.hpp"
#include "aures/model.hpp"

namespace aures {

enum class Objective { kSimclr, kSupervised };
Objective parse_objective(std::string_view name);
std::string_view objective_name(Objective o);

struct RunConfig {
  std::string preset = "desk";
  ModelConfig model = desk_config();
  Objective objective = Objective::kSimclr;
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  double peak_lr = 2e-4;
  double warmup_fraction = 0.05;
  double temperature = 0.1;
  std::size_t checkpoint_every = 500;
  bool mix = true;
  data::SynthSpec corpus;
  std::size_t test_clips_per_class = 25;
  ProbeConfig probe;
  double probe_window_seconds = 0.0;  // 0 = length of a training crop
};

// ModelConfig <-> JSON text (all fields).
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);
// Name of the first field that differs, or empty when equal.
std::string first_difference(const ModelConfig& a, const ModelConfig& b);

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

// Switches preset (resetting the model config to that preset while keeping
// the normalizer choice).
void apply_preset(RunConfig& cfg, std::string_view preset);

}  // namespace aures

#endif  // AURES_CONFIG_HPP_
