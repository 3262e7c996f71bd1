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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "aures/dsp.hpp"
#include "aures/errors.hpp"
#include "test_util.hpp"

namespace aures::data {
namespace {

namespace fs = std::filesystem;
using aures::testing::scratch_dir;

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-assembled canonical PCM file; `declared` lets the data chunk lie.
std::string wav_bytes(std::uint32_t rate, std::uint16_t channels, std::uint16_t bits,
                      const std::vector<std::int16_t>& samples, std::uint32_t declared) {
  std::string s = "RIFF";
  put_u32(s, 36 + declared);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, channels);
  put_u32(s, rate);
  put_u32(s, rate * channels * bits / 8);
  put_u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(s, bits);
  s += "data";
  put_u32(s, declared);
  for (auto v : samples) put_u16(s, static_cast<std::uint16_t>(v));
  return s;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(WavTest, RoundTripWithinOneQuantum) {
  const auto dir = scratch_dir("wav_rt");
  dsp::Waveform w;
  w.samples = aures::testing::random_values(16000, 3, -0.99, 0.99);
  write_wav(dir / "a.wav", w);
  const auto back = load_wav(dir / "a.wav");
  ASSERT_EQ(back.samples.size(), w.samples.size());
  EXPECT_EQ(back.sample_rate, 16000);
  EXPECT_LE(aures::testing::max_abs_diff(back.samples, w.samples), 1.0 / 32768.0);
}

TEST(WavTest, ReadsHandBuiltFile) {
  const auto dir = scratch_dir("wav_hand");
  write_bytes(dir / "h.wav", wav_bytes(16000, 1, 16, {0, 16384, -32768, 32767}, 8));
  const auto w = load_wav(dir / "h.wav");
  ASSERT_EQ(w.samples.size(), 4u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], 0.5);
  EXPECT_EQ(w.samples[2], -1.0);
  EXPECT_EQ(w.samples[3], 32767.0 / 32768.0);
}

TEST(WavTest, RejectsOtherSampleRateNamingIt) {
  const auto dir = scratch_dir("wav_rate");
  write_bytes(dir / "r.wav", wav_bytes(44100, 1, 16, {1, 2, 3}, 6));
  const std::string msg = error_of([&] { load_wav(dir / "r.wav"); });
  EXPECT_NE(msg.find("sample rate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("44100"), std::string::npos) << msg;
  EXPECT_THROW(load_wav(dir / "r.wav"), IngestError);
}

TEST(WavTest, RejectsStereoAnd8Bit) {
  const auto dir = scratch_dir("wav_fmt");
  write_bytes(dir / "s.wav", wav_bytes(16000, 2, 16, {1, 2}, 4));
  EXPECT_NE(error_of([&] { load_wav(dir / "s.wav"); }).find("channels"), std::string::npos);
  write_bytes(dir / "b.wav", wav_bytes(16000, 1, 8, {}, 0));
  EXPECT_NE(error_of([&] { load_wav(dir / "b.wav"); }).find("bits per sample"), std::string::npos);
}

TEST(WavTest, TruncatedDataIsALengthError) {
  const auto dir = scratch_dir("wav_trunc");
  write_bytes(dir / "t.wav", wav_bytes(16000, 1, 16, {1, 2, 3}, 200));
  const std::string msg = error_of([&] { load_wav(dir / "t.wav"); });
  EXPECT_NE(msg.find("data length"), std::string::npos) << msg;
}

TEST(WavTest, NotRiff) {
  const auto dir = scratch_dir("wav_junk");
  write_bytes(dir / "j.wav", "hello world, not audio at all");
  EXPECT_THROW(load_wav(dir / "j.wav"), IngestError);
  EXPECT_THROW(load_wav(dir / "missing.wav"), IngestError);
}

TEST(ManifestTest, ParsesAllLabelKinds) {
  const auto single = parse_manifest("# task: t\n# labels: single 3\npath,label\na.wav,2\nb.wav,0\n");
  ASSERT_EQ(single.rows.size(), 2u);
  EXPECT_EQ(single.task, "t");
  EXPECT_EQ(single.target(0), (std::vector<double>{0, 0, 1}));

  const auto multi = parse_manifest("# labels: multi 4\npath,label\na.wav,0;3\n");
  EXPECT_EQ(multi.target(0), (std::vector<double>{1, 0, 0, 1}));

  const auto slots = parse_manifest("# labels: slots 2 3\npath,label\na.wav,1|2\n");
  EXPECT_EQ(slots.label_width(), 5u);
  EXPECT_EQ(slots.target(0), (std::vector<double>{0, 1, 0, 0, 1}));
}

TEST(ManifestTest, FormatRoundTrip) {
  const std::string text = "# task: t\n# labels: slots 2 3\npath,label\na.wav,1|2\nb.wav,0|0\n";
  const auto m = parse_manifest(text);
  const auto again = parse_manifest(format_manifest(m));
  ASSERT_EQ(again.rows.size(), 2u);
  EXPECT_EQ(again.rows[1].label, m.rows[1].label);
  EXPECT_EQ(again.arities, m.arities);
}

TEST(ManifestTest, ErrorsNameRowAndField) {
  const std::string head = "# labels: single 3\npath,label\na.wav,1\n";
  const std::string range = error_of([&] { parse_manifest(head + "b.wav,7\n"); });
  EXPECT_NE(range.find("row 2"), std::string::npos) << range;
  EXPECT_NE(range.find("field label"), std::string::npos) << range;

  const std::string nonint = error_of([&] { parse_manifest(head + "b.wav,x\n"); });
  EXPECT_NE(nonint.find("row 2"), std::string::npos) << nonint;

  const std::string empty = error_of([&] { parse_manifest(head + ",1\n"); });
  EXPECT_NE(empty.find("field path"), std::string::npos) << empty;

  const std::string fields = error_of([&] { parse_manifest(head + "b.wav,1,2\n"); });
  EXPECT_NE(fields.find("row 2"), std::string::npos) << fields;

  EXPECT_THROW(parse_manifest("path,label\na.wav,1\n"), IngestError);
  EXPECT_THROW(parse_manifest("# labels: single 3\n"), IngestError);
}

TEST(ManifestTest, MissingAudioNamesRow) {
  const auto dir = scratch_dir("manifest_missing");
  write_bytes(dir / "m.csv", "# labels: single 2\npath,label\nnope.wav,1\n");
  const std::string msg = error_of([&] { load_dataset(dir / "m.csv"); });
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("nope.wav"), std::string::npos) << msg;
}

TEST(SynthTest, CorpusShapeAndManifest) {
  const auto dir = scratch_dir("synth_shape");
  SynthSpec spec;  // 8 classes x 50 clips
  spec.clip_seconds = 0.25;
  const Manifest m = synth_corpus(spec, dir);
  EXPECT_EQ(m.rows.size(), 400u);
  const Dataset d = load_dataset(dir / "manifest.csv");
  ASSERT_EQ(d.clips.size(), 400u);
  EXPECT_EQ(d.clips[0].samples.size(), 4000u);
  std::vector<int> per_class(8, 0);
  for (const auto& r : d.manifest.rows) ++per_class[r.label[0]];
  for (int n : per_class) EXPECT_EQ(n, 50);
}

TEST(SynthTest, SameSeedIsByteIdentical) {
  SynthSpec spec;
  spec.num_classes = 3;
  spec.clips_per_class = 4;
  spec.clip_seconds = 0.2;
  spec.seed = 11;
  for (auto kind : {CorpusKind::kTones, CorpusKind::kChirps, CorpusKind::kNoiseScenes,
                    CorpusKind::kMultilabelMix}) {
    spec.kind = kind;
    const auto a = scratch_dir("synth_a");
    const auto b = scratch_dir("synth_b");
    const Manifest ma = synth_corpus(spec, a);
    synth_corpus(spec, b);
    EXPECT_EQ(read_bytes(a / "manifest.csv"), read_bytes(b / "manifest.csv"));
    for (const auto& r : ma.rows) {
      EXPECT_EQ(read_bytes(a / r.path), read_bytes(b / r.path)) << corpus_kind_name(kind) << r.path;
    }
  }
  const SynthClip x = synth_clip(spec, 1, 0);
  spec.seed = 12;
  const SynthClip y = synth_clip(spec, 1, 0);
  EXPECT_NE(x.wave.samples, y.wave.samples);
}

TEST(SynthTest, ToneClassPeaksAtNearestFilter) {
  SynthSpec spec;
  spec.clip_seconds = 0.5;
  const auto fb = dsp::mel_filterbank({.n_mels = 40});
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    const SynthClip c = synth_clip(spec, k, 0);
    const auto spec_k = dsp::log_mel(c.wave, fb);
    std::vector<double> avg(spec_k.n_mels, 0.0);
    for (std::size_t t = 0; t < spec_k.frames; ++t) {
      for (std::size_t f = 0; f < spec_k.n_mels; ++f) avg[f] += spec_k.at(t, f);
    }
    const auto peak = std::max_element(avg.begin(), avg.end()) - avg.begin();
    const double hz = tone_frequency(k);
    std::size_t nearest = 0;
    for (std::size_t f = 1; f < fb.center_hz.size(); ++f) {
      if (std::abs(fb.center_hz[f] - hz) < std::abs(fb.center_hz[nearest] - hz)) nearest = f;
    }
    EXPECT_EQ(static_cast<std::size_t>(peak), nearest) << "class " << k << " at " << hz << " Hz";
  }
}

TEST(SynthTest, MultilabelAlwaysHasItsClass) {
  SynthSpec spec;
  spec.kind = CorpusKind::kMultilabelMix;
  spec.clip_seconds = 0.1;
  std::size_t extra = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    const SynthClip c = synth_clip(spec, 3, i);
    EXPECT_NE(std::find(c.label.begin(), c.label.end(), 3u), c.label.end());
    extra += c.label.size() - 1;
  }
  EXPECT_GT(extra, 0u);
}

TEST(SynthTest, RejectsBadSpecs) {
  const auto dir = scratch_dir("synth_bad");
  SynthSpec spec;
  spec.num_classes = 1;
  EXPECT_THROW(synth_corpus(spec, dir), ConfigError);
  EXPECT_THROW(parse_corpus_kind("birdsong"), ConfigError);
}

}  // namespace
}  // namespace aures::data
