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

// Audio datasets on disk: PCM16 WAV files, CSV manifests and the synthetic
// corpora used for desk-scale experiments.
//
// Manifest layout (UTF-8):
//
//   # task: tones
//   # labels: single 8          (or "multi 8", or "slots 6 14 4")
//   path,label
//   k0_000.wav,0
//   mix_001.wav,1;4             (multi-label: ';' separated)
//   cmd_002.wav,2|5|1           (slots: '|' separated, one index per slot)
//
// Paths are relative to the manifest's directory.

#ifndef AURES_DATA_HPP_
#define AURES_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "aures/dsp.hpp"

namespace aures::data {

// Mono 16-bit PCM at 16 kHz; samples divided by 32768.
dsp::Waveform load_wav(const std::filesystem::path& path);
// Rounds to the nearest PCM16 code (clamped) and writes atomically.
void write_wav(const std::filesystem::path& path, const dsp::Waveform& w);

enum class LabelKind { kSingle, kMulti, kSlots };

struct ManifestRow {
  std::string path;
  std::vector<std::size_t> label;  // class, class list, or one index per slot
};

struct Manifest {
  std::string task;
  LabelKind kind = LabelKind::kSingle;
  // Class count; for slot labels one arity per slot.
  std::vector<std::size_t> arities;
  std::vector<ManifestRow> rows;

  std::size_t label_width() const;
  // One-hot (single), multi-hot (multi) or concatenated per-slot one-hot.
  std::vector<double> target(std::size_t row) const;
};

// Errors name the row number and field.
Manifest parse_manifest(std::string_view text);
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& m);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct Dataset {
  Manifest manifest;
  std::vector<dsp::Waveform> clips;
  std::vector<std::vector<double>> targets;
};

// Loads every WAV the manifest names.
Dataset load_dataset(const std::filesystem::path& manifest_path);

enum class CorpusKind { kTones, kChirps, kNoiseScenes, kMultilabelMix };
CorpusKind parse_corpus_kind(std::string_view name);
std::string_view corpus_kind_name(CorpusKind kind);

struct SynthSpec {
  CorpusKind kind = CorpusKind::kTones;
  std::size_t num_classes = 8;
  std::size_t clips_per_class = 50;
  double clip_seconds = 2.0;
  std::uint64_t seed = 0;
};

// Frequency of tone class k: 200 * 2^(k/2) Hz.
double tone_frequency(std::size_t k);

// The waveform and label of clip `index` of class `label_class`; purely a
// function of the spec, class and index.
struct SynthClip {
  dsp::Waveform wave;
  std::vector<std::size_t> label;
};
SynthClip synth_clip(const SynthSpec& spec, std::size_t label_class, std::size_t index);

// Writes every clip plus manifest.csv into out_dir and returns the manifest.
Manifest synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

// Writes bytes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace aures::data

#endif  // AURES_DATA_HPP_
