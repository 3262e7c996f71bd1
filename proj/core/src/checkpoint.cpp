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

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aures/config.hpp"
#include "aures/data.hpp"
#include "aures/errors.hpp"

namespace aures {

namespace {

constexpr char kMagic[8] = {'A', 'U', 'R', 'E', 'S', 'C', 'K', 'P'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     std::uint64_t step, const std::string& rng_state,
                     const nn::ParameterList& params) {
  std::string blobs;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& p : params) {
    for (double v : p.tensor.values()) {
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v) {
        throw CheckpointError("checkpoint: " + p.name + " holds a value that is not float32 (" +
                              std::to_string(v) + ")");
      }
      put_f32(blobs, f);
    }
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  const nlohmann::ordered_json header{
      {"format_version", kCheckpointVersion},
      {"config", nlohmann::ordered_json::parse(model_config_to_json(config))},
      {"step", step},
      {"rng_state", rng_state},
      {"tensors", tensors},
      {"blob_hash", hex64(fnv1a(blobs))},
  };
  const std::string text = header.dump();
  std::string file(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) file.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  file += text;
  file += blobs;
  try {
    data::write_file_atomic(path, file);
  } catch (const IngestError& e) {
    throw CheckpointError(e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(name + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string b = ss.str();
  if (b.size() < 12 || std::memcmp(b.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(name + ": not a checkpoint (bad magic)");
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[8 + i])) << (8 * i);
  if (12 + static_cast<std::size_t>(len) > b.size()) throw CheckpointError(name + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(b.substr(12, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(name + ": unreadable header: " + e.what());
  }
  Checkpoint ck;
  ck.format_version = header.value("format_version", -1);
  if (ck.format_version != kCheckpointVersion) {
    throw CheckpointError(name + ": format version " + std::to_string(ck.format_version) +
                          " is not supported (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::string_view blobs(b.data() + 12 + len, b.size() - 12 - len);
  if (hex64(fnv1a(blobs)) != header.value("blob_hash", std::string())) {
    throw CheckpointError(name + ": blob hash mismatch (file corrupted)");
  }
  try {
    ck.config = model_config_from_json(header.at("config").dump());
    ck.step = header.at("step").get<std::uint64_t>();
    ck.rng_state = header.at("rng_state").get<std::string>();
    std::size_t at = 0;
    for (const auto& t : header.at("tensors")) {
      CheckpointTensor ct;
      ct.name = t.at("name").get<std::string>();
      ct.shape = t.at("shape").get<Shape>();
      const std::size_t n = shape_numel(ct.shape);
      if (at + 4 * n > blobs.size()) throw CheckpointError(name + ": blob for " + ct.name + " truncated");
      ct.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) ct.values[i] = get_f32(blobs.data() + at + 4 * i);
      at += 4 * n;
      ck.tensors.push_back(std::move(ct));
    }
    if (at != blobs.size()) throw CheckpointError(name + ": trailing bytes after blobs");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(name + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(name + ": bad config: " + e.what());
  }
  return ck;
}

void restore(const Checkpoint& ckpt, const ModelConfig& expected, nn::ParameterList& params) {
  const std::string diff = first_difference(ckpt.config, expected);
  if (!diff.empty()) {
    throw CheckpointError("checkpoint config mismatch in field '" + diff + "'");
  }
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  for (auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw CheckpointError("checkpoint shape mismatch for " + p.name + ": " +
                            shape_string(it->second->shape) + " vs " +
                            shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
  }
}

Model load_model(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  Model model(ck.config, 0);
  auto params = model.named_parameters();
  restore(ck, ck.config, params);
  return model;
}

}  // namespace aures
