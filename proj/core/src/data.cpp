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

#include "aures/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "aures/errors.hpp"

namespace aures::data {

namespace fs = std::filesystem;

namespace {

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::size_t parse_index(const std::string& s, const std::string& where) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw IngestError(where + ": '" + s + "' is not a non-negative integer");
  }
  return static_cast<std::size_t>(std::stoull(s));
}

std::mt19937_64 clip_rng(const SynthSpec& spec, std::size_t label_class, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(spec.kind), static_cast<std::uint32_t>(label_class),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNoiseStd = 0.01;

void add_noise(dsp::Waveform& w, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, stddev);
  for (double& s : w.samples) s += noise(rng);
}

dsp::Waveform silence(double seconds) {
  dsp::Waveform w;
  w.samples.assign(static_cast<std::size_t>(std::lround(seconds * dsp::kSampleRate)), 0.0);
  return w;
}

void add_tone(dsp::Waveform& w, double hz, double amplitude, double phase) {
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] += amplitude * std::sin(kTwoPi * hz * static_cast<double>(i) / dsp::kSampleRate + phase);
  }
}

}  // namespace

dsp::Waveform load_wav(const fs::path& path) {
  const std::string b = read_file(path);
  const std::string name = path.string();
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw IngestError(name + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::string id = b.substr(at, 4);
    const std::uint32_t size = read_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size()) throw IngestError(name + ": truncated fmt chunk");
      const auto format = read_u16(b, body);
      const auto channels = read_u16(b, body + 2);
      const auto rate = read_u32(b, body + 4);
      const auto bits = read_u16(b, body + 14);
      if (format != 1) {
        throw IngestError(name + ": audio format " + std::to_string(format) + ", expected PCM (1)");
      }
      if (channels != 1) {
        throw IngestError(name + ": channels " + std::to_string(channels) + ", expected 1");
      }
      if (rate != static_cast<std::uint32_t>(dsp::kSampleRate)) {
        throw IngestError(name + ": sample rate " + std::to_string(rate) + ", expected 16000");
      }
      if (bits != 16) {
        throw IngestError(name + ": bits per sample " + std::to_string(bits) + ", expected 16");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IngestError(name + ": data chunk before fmt chunk");
      if (body + size > b.size()) {
        throw IngestError(name + ": data length " + std::to_string(size) + " exceeds file (" +
                          std::to_string(b.size() - body) + " bytes available)");
      }
      if (size % 2 != 0) throw IngestError(name + ": data length is not a whole sample count");
      dsp::Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = static_cast<std::int16_t>(read_u16(b, body + 2 * i)) / 32768.0;
      }
      return w;
    }
    at = body + size + (size & 1);
  }
  throw IngestError(name + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

void write_wav(const fs::path& path, const dsp::Waveform& w) {
  if (w.sample_rate != dsp::kSampleRate) throw IngestError("write_wav: sample rate must be 16000");
  const auto data_bytes = static_cast<std::uint32_t>(2 * w.samples.size());
  std::string b;
  b.reserve(44 + data_bytes);
  b += "RIFF";
  put_u32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, 1);
  put_u32(b, dsp::kSampleRate);
  put_u32(b, 2 * dsp::kSampleRate);
  put_u16(b, 2);
  put_u16(b, 16);
  b += "data";
  put_u32(b, data_bytes);
  for (double s : w.samples) {
    const double code = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(code)));
  }
  write_file_atomic(path, b);
}

std::size_t Manifest::label_width() const {
  if (kind == LabelKind::kSlots) {
    std::size_t w = 0;
    for (std::size_t a : arities) w += a;
    return w;
  }
  return arities.empty() ? 0 : arities[0];
}

std::vector<double> Manifest::target(std::size_t row) const {
  std::vector<double> t(label_width(), 0.0);
  const auto& label = rows.at(row).label;
  if (kind == LabelKind::kSlots) {
    std::size_t offset = 0;
    for (std::size_t s = 0; s < arities.size(); ++s) {
      t[offset + label[s]] = 1.0;
      offset += arities[s];
    }
  } else {
    for (std::size_t c : label) t[c] = 1.0;
  }
  return t;
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  bool have_labels = false;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string line =
        trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const std::string where = "manifest line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string meta = trim(std::string_view(line).substr(1));
      const auto colon = meta.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(std::string_view(meta).substr(0, colon));
      const std::string value = trim(std::string_view(meta).substr(colon + 1));
      if (key == "task") {
        m.task = value;
      } else if (key == "labels") {
        std::istringstream ss(value);
        std::string kind;
        ss >> kind;
        if (kind == "single") {
          m.kind = LabelKind::kSingle;
        } else if (kind == "multi") {
          m.kind = LabelKind::kMulti;
        } else if (kind == "slots") {
          m.kind = LabelKind::kSlots;
        } else {
          throw IngestError(where + ", field labels: unknown label kind '" + kind + "'");
        }
        std::string tok;
        while (ss >> tok) m.arities.push_back(parse_index(tok, where + ", field labels"));
        if (m.arities.empty() || (m.kind != LabelKind::kSlots && m.arities.size() != 1)) {
          throw IngestError(where + ", field labels: wrong number of class counts");
        }
        for (std::size_t a : m.arities) {
          if (a == 0) throw IngestError(where + ", field labels: class count must be positive");
        }
        have_labels = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != "path,label") {
        throw IngestError(where + ": expected header 'path,label', got '" + line + "'");
      }
      if (!have_labels) throw IngestError(where + ": '# labels:' line must precede the header");
      have_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    const std::string row_where = "manifest row " + std::to_string(m.rows.size() + 1) + " (line " +
                                  std::to_string(line_no) + ")";
    if (fields.size() != 2) {
      throw IngestError(row_where + ": expected 2 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw IngestError(row_where + ", field path: empty");
    ManifestRow row{fields[0], {}};
    const std::string label_where = row_where + ", field label";
    if (m.kind == LabelKind::kSlots) {
      const auto parts = split(fields[1], '|');
      if (parts.size() != m.arities.size()) {
        throw IngestError(label_where + ": expected " + std::to_string(m.arities.size()) +
                          " slots, got " + std::to_string(parts.size()));
      }
      for (std::size_t s = 0; s < parts.size(); ++s) {
        const std::size_t v = parse_index(parts[s], label_where);
        if (v >= m.arities[s]) {
          throw IngestError(label_where + ": slot " + std::to_string(s) + " index " +
                            std::to_string(v) + " out of range [0, " +
                            std::to_string(m.arities[s]) + ")");
        }
        row.label.push_back(v);
      }
    } else {
      const auto parts = m.kind == LabelKind::kMulti ? split(fields[1], ';')
                                                     : std::vector<std::string>{fields[1]};
      for (const auto& p : parts) {
        const std::size_t v = parse_index(p, label_where);
        if (v >= m.arities[0]) {
          throw IngestError(label_where + ": class " + std::to_string(v) + " out of range [0, " +
                            std::to_string(m.arities[0]) + ")");
        }
        row.label.push_back(v);
      }
    }
    m.rows.push_back(std::move(row));
  }
  if (!have_header) throw IngestError("manifest: missing 'path,label' header");
  return m;
}

Manifest load_manifest(const fs::path& path) {
  try {
    return parse_manifest(read_file(path));
  } catch (const IngestError& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  out << "# task: " << m.task << "\n# labels: ";
  out << (m.kind == LabelKind::kSingle ? "single" : m.kind == LabelKind::kMulti ? "multi" : "slots");
  for (std::size_t a : m.arities) out << ' ' << a;
  out << "\npath,label\n";
  const char sep = m.kind == LabelKind::kSlots ? '|' : ';';
  for (const auto& r : m.rows) {
    out << r.path << ',';
    for (std::size_t i = 0; i < r.label.size(); ++i) out << (i ? std::string(1, sep) : "") << r.label[i];
    out << '\n';
  }
  return out.str();
}

void write_manifest(const fs::path& path, const Manifest& m) {
  write_file_atomic(path, format_manifest(m));
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  for (std::size_t i = 0; i < d.manifest.rows.size(); ++i) {
    const fs::path p = root / d.manifest.rows[i].path;
    if (!fs::exists(p)) {
      throw IngestError(manifest_path.string() + ": row " + std::to_string(i + 1) +
                        ", field path: '" + d.manifest.rows[i].path + "' does not exist");
    }
    d.clips.push_back(load_wav(p));
    d.targets.push_back(d.manifest.target(i));
  }
  if (d.clips.empty()) throw IngestError(manifest_path.string() + ": no rows");
  return d;
}

CorpusKind parse_corpus_kind(std::string_view name) {
  if (name == "tones") return CorpusKind::kTones;
  if (name == "chirps") return CorpusKind::kChirps;
  if (name == "noise-scenes") return CorpusKind::kNoiseScenes;
  if (name == "multilabel-mix") return CorpusKind::kMultilabelMix;
  throw ConfigError("unknown corpus kind '" + std::string(name) +
                    "' (expected tones, chirps, noise-scenes or multilabel-mix)");
}

std::string_view corpus_kind_name(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::kTones:
      return "tones";
    case CorpusKind::kChirps:
      return "chirps";
    case CorpusKind::kNoiseScenes:
      return "noise-scenes";
    case CorpusKind::kMultilabelMix:
      return "multilabel-mix";
  }
  return "tones";
}

double tone_frequency(std::size_t k) { return 200.0 * std::exp2(static_cast<double>(k) / 2.0); }

SynthClip synth_clip(const SynthSpec& spec, std::size_t label_class, std::size_t index) {
  auto rng = clip_rng(spec, label_class, index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthClip out;
  out.wave = silence(spec.clip_seconds);
  auto& s = out.wave.samples;
  switch (spec.kind) {
    case CorpusKind::kTones: {
      add_tone(out.wave, tone_frequency(label_class), 0.3 + 0.4 * unit(rng), kTwoPi * unit(rng));
      out.label = {label_class};
      break;
    }
    case CorpusKind::kChirps: {
      // Classes alternate sweep direction; each pair shares a rate of
      // 0.5 * (pair + 1) octaves per second around a random centre.
      const double direction = label_class % 2 == 0 ? 1.0 : -1.0;
      const double rate = 0.5 * static_cast<double>(label_class / 2 + 1);
      const double centre = 700.0 * std::exp2(unit(rng));
      const double mid = spec.clip_seconds / 2.0;
      const double k = direction * rate * std::numbers::ln2;
      const double phase0 = kTwoPi * unit(rng);
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = static_cast<double>(i) / dsp::kSampleRate - mid;
        const double hz = centre * std::exp(k * t);
        if (hz > 7500.0 || hz < 60.0) continue;
        s[i] = 0.5 * std::sin(phase0 + kTwoPi * centre * (std::exp(k * t) - std::exp(-k * mid)) / k);
      }
      out.label = {label_class};
      break;
    }
    case CorpusKind::kNoiseScenes: {
      // Band-limited noise: many random-phase partials inside the class's
      // band of num_classes log-spaced bands over 100-7000 Hz.
      const double lo = 100.0 * std::pow(70.0, static_cast<double>(label_class) / spec.num_classes);
      const double hi = 100.0 * std::pow(70.0, static_cast<double>(label_class + 1) / spec.num_classes);
      constexpr int kPartials = 48;
      for (int p = 0; p < kPartials; ++p) {
        const double hz = lo * std::pow(hi / lo, unit(rng));
        add_tone(out.wave, hz, 0.6 / std::sqrt(static_cast<double>(kPartials)), kTwoPi * unit(rng));
      }
      add_noise(out.wave, 0.02, rng);
      out.label = {label_class};
      break;
    }
    case CorpusKind::kMultilabelMix: {
      std::vector<bool> on(spec.num_classes, false);
      on[label_class] = true;
      for (std::size_t c = 0; c < spec.num_classes; ++c) on[c] = on[c] || unit(rng) < 0.25;
      for (std::size_t c = 0; c < spec.num_classes; ++c) {
        if (!on[c]) continue;
        add_tone(out.wave, tone_frequency(c), 0.15 + 0.2 * unit(rng), kTwoPi * unit(rng));
        out.label.push_back(c);
      }
      break;
    }
  }
  add_noise(out.wave, kNoiseStd, rng);
  for (double& x : s) x = std::clamp(x, -1.0, 32767.0 / 32768.0);
  return out;
}

Manifest synth_corpus(const SynthSpec& spec, const fs::path& out_dir) {
  if (spec.num_classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (spec.clips_per_class == 0) throw ConfigError("synth: clips_per_class must be positive");
  if (!(spec.clip_seconds > 0.0)) throw ConfigError("synth: clip_seconds must be positive");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IngestError("synth: cannot create output directory " + out_dir.string());
  }
  Manifest m;
  m.task = std::string(corpus_kind_name(spec.kind));
  m.kind = spec.kind == CorpusKind::kMultilabelMix ? LabelKind::kMulti : LabelKind::kSingle;
  m.arities = {spec.num_classes};
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.clips_per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "c%02zu_%04zu.wav", c, i);
      SynthClip clip = synth_clip(spec, c, i);
      write_wav(out_dir / name, clip.wave);
      m.rows.push_back({name, std::move(clip.label)});
    }
  }
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IngestError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IngestError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace aures::data
