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

#include "aures/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aures/errors.hpp"

namespace aures {

using nlohmann::ordered_json;

namespace {

ordered_json model_to_json(const ModelConfig& c) {
  return ordered_json{
      {"name", c.name},
      {"slow_stem_widths", c.slow_stem_widths},
      {"slow_block_widths", c.slow_block_widths},
      {"fast_stem_widths", c.fast_stem_widths},
      {"fast_block_widths", c.fast_block_widths},
      {"block_repeats", c.block_repeats},
      {"slow_time_kernels", c.slow_time_kernels},
      {"fast_time_kernels", c.fast_time_kernels},
      {"group_size_slow", c.group_size_slow},
      {"group_size_fast", c.group_size_fast},
      {"slow_temporal_stride", c.slow_temporal_stride},
      {"fusion_kernel", c.fusion_kernel},
      {"bottleneck_ratio", c.bottleneck_ratio},
      {"width_multiplier", c.width_multiplier},
      {"norm", std::string(nn::norm_kind_name(c.norm_kind))},
      {"sd_rate", c.sd_rate},
      {"alpha", c.alpha},
      {"include_se", c.include_se},
      {"se_ratio", c.se_ratio},
      {"input_frames", c.input_frames},
      {"input_mels", c.input_mels},
  };
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void reject_unknown(const ordered_json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

// Overlays the fields present in j onto c.
void model_from_json(const ordered_json& j, ModelConfig& c, const std::string& where) {
  reject_unknown(j,
                 {"name", "slow_stem_widths", "slow_block_widths", "fast_stem_widths",
                  "fast_block_widths", "block_repeats", "slow_time_kernels", "fast_time_kernels",
                  "group_size_slow", "group_size_fast", "slow_temporal_stride", "fusion_kernel",
                  "bottleneck_ratio", "width_multiplier", "norm", "sd_rate", "alpha", "include_se",
                  "se_ratio", "input_frames", "input_mels"},
                 where);
  read(j, "name", c.name, where);
  read(j, "slow_stem_widths", c.slow_stem_widths, where);
  read(j, "slow_block_widths", c.slow_block_widths, where);
  read(j, "fast_stem_widths", c.fast_stem_widths, where);
  read(j, "fast_block_widths", c.fast_block_widths, where);
  read(j, "block_repeats", c.block_repeats, where);
  read(j, "slow_time_kernels", c.slow_time_kernels, where);
  read(j, "fast_time_kernels", c.fast_time_kernels, where);
  read(j, "group_size_slow", c.group_size_slow, where);
  read(j, "group_size_fast", c.group_size_fast, where);
  read(j, "slow_temporal_stride", c.slow_temporal_stride, where);
  read(j, "fusion_kernel", c.fusion_kernel, where);
  read(j, "bottleneck_ratio", c.bottleneck_ratio, where);
  read(j, "width_multiplier", c.width_multiplier, where);
  if (j.contains("norm")) {
    std::string norm;
    read(j, "norm", norm, where);
    c.norm_kind = nn::parse_norm_kind(norm);
  }
  read(j, "sd_rate", c.sd_rate, where);
  read(j, "alpha", c.alpha, where);
  read(j, "include_se", c.include_se, where);
  read(j, "se_ratio", c.se_ratio, where);
  read(j, "input_frames", c.input_frames, where);
  read(j, "input_mels", c.input_mels, where);
}

ordered_json parse_json(std::string_view text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

Objective parse_objective(std::string_view name) {
  if (name == "simclr") return Objective::kSimclr;
  if (name == "supervised") return Objective::kSupervised;
  throw ConfigError("unknown objective '" + std::string(name) + "' (expected simclr or supervised)");
}

std::string_view objective_name(Objective o) {
  return o == Objective::kSimclr ? "simclr" : "supervised";
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
  ModelConfig c;
  model_from_json(parse_json(text, "model config"), c, "model");
  return c;
}

std::string first_difference(const ModelConfig& a, const ModelConfig& b) {
  const ordered_json ja = model_to_json(a);
  const ordered_json jb = model_to_json(b);
  for (const auto& [key, value] : ja.items()) {
    if (jb.at(key) != value) return key;
  }
  return {};
}

void apply_preset(RunConfig& cfg, std::string_view preset) {
  const nn::NormKind norm = cfg.model.norm_kind;
  cfg.model = preset_config(std::string(preset));
  cfg.model.norm_kind = norm;
  cfg.preset = std::string(preset);
}

RunConfig parse_run_config(std::string_view json_text) {
  const ordered_json j = parse_json(json_text, "run config");
  const std::string where = "config";
  reject_unknown(j,
                 {"preset", "norm", "objective", "seed", "steps", "batch_size", "peak_lr",
                  "warmup_fraction", "temperature", "checkpoint_every", "mix", "corpus", "probe",
                  "model"},
                 where);
  RunConfig c;
  if (j.contains("norm")) {
    std::string norm;
    read(j, "norm", norm, where);
    c.model.norm_kind = nn::parse_norm_kind(norm);
  }
  if (j.contains("preset")) {
    std::string preset;
    read(j, "preset", preset, where);
    apply_preset(c, preset);
  }
  if (j.contains("objective")) {
    std::string objective;
    read(j, "objective", objective, where);
    c.objective = parse_objective(objective);
  }
  read(j, "seed", c.seed, where);
  read(j, "steps", c.steps, where);
  read(j, "batch_size", c.batch_size, where);
  read(j, "peak_lr", c.peak_lr, where);
  read(j, "warmup_fraction", c.warmup_fraction, where);
  read(j, "temperature", c.temperature, where);
  read(j, "checkpoint_every", c.checkpoint_every, where);
  read(j, "mix", c.mix, where);
  if (j.contains("corpus")) {
    const auto& k = j.at("corpus");
    const std::string w = where + ".corpus";
    reject_unknown(k, {"kind", "classes", "clips_per_class", "seconds", "test_clips_per_class"}, w);
    if (k.contains("kind")) {
      std::string kind;
      read(k, "kind", kind, w);
      c.corpus.kind = data::parse_corpus_kind(kind);
    }
    read(k, "classes", c.corpus.num_classes, w);
    read(k, "clips_per_class", c.corpus.clips_per_class, w);
    read(k, "seconds", c.corpus.clip_seconds, w);
    read(k, "test_clips_per_class", c.test_clips_per_class, w);
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    const std::string w = where + ".probe";
    reject_unknown(p, {"steps", "batch_size", "peak_lr", "window_seconds"}, w);
    read(p, "steps", c.probe.steps, w);
    read(p, "batch_size", c.probe.batch_size, w);
    read(p, "peak_lr", c.probe.peak_lr, w);
    read(p, "window_seconds", c.probe_window_seconds, w);
  }
  if (j.contains("model")) model_from_json(j.at("model"), c.model, where + ".model");
  validate(c.model);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json j{
      {"preset", c.preset},
      {"norm", std::string(nn::norm_kind_name(c.model.norm_kind))},
      {"objective", std::string(objective_name(c.objective))},
      {"seed", c.seed},
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"peak_lr", c.peak_lr},
      {"warmup_fraction", c.warmup_fraction},
      {"temperature", c.temperature},
      {"checkpoint_every", c.checkpoint_every},
      {"mix", c.mix},
      {"corpus",
       {{"kind", std::string(data::corpus_kind_name(c.corpus.kind))},
        {"classes", c.corpus.num_classes},
        {"clips_per_class", c.corpus.clips_per_class},
        {"seconds", c.corpus.clip_seconds},
        {"test_clips_per_class", c.test_clips_per_class}}},
      {"probe",
       {{"steps", c.probe.steps},
        {"batch_size", c.probe.batch_size},
        {"peak_lr", c.probe.peak_lr},
        {"window_seconds", c.probe_window_seconds}}},
      {"model", model_to_json(c.model)},
  };
  return j.dump(2);
}

}  // namespace aures
