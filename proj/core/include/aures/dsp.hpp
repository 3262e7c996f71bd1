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

// Log-mel frontend for 16 kHz mono audio.
//
// Framing follows the usual 25 ms window / 10 ms hop convention: frame k
// covers samples [k*hop, k*hop + window), is Hann weighted, zero padded to
// the FFT size and reduced to its power spectrum. Tail samples that do not
// fill a whole frame are dropped. The mel filterbank uses the HTK mel scale
// with peak-1 triangles whose edges sit on neighbouring centers, so adjacent
// filters sum to one between the first and last center.

#ifndef AURES_DSP_HPP_
#define AURES_DSP_HPP_

#include <complex>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace aures::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr double kLogFloor = 1e-6;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Row-major frames x bins matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Log-mel features: frames x n_mels, row-major.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> values;
  double frame_hop = 0.010;  // seconds
  double window = 0.025;     // seconds

  double at(std::size_t t, std::size_t f) const { return values[t * n_mels + f]; }
};

struct StftConfig {
  std::size_t window_samples = 400;
  std::size_t hop_samples = 160;
  std::size_t fft_size = 512;
};

struct MelConfig {
  std::size_t n_mels = 80;
  int sample_rate = kSampleRate;
  std::size_t fft_size = 512;
  double fmin = 60.0;
  double fmax = 7800.0;
};

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;          // fft_size / 2 + 1
  std::vector<double> weights;     // n_mels x n_bins
  std::vector<double> center_hz;   // ascending, one per filter
  double fmin = 0.0;
  double fmax = 0.0;
  int sample_rate = kSampleRate;
  std::size_t fft_size = 0;

  double weight(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// floor((length - window) / hop) + 1; throws InputError when length < window.
std::size_t frame_count(std::size_t length, const StftConfig& cfg = {});
// Smallest waveform length that yields `frames` frames.
std::size_t samples_for_frames(std::size_t frames, const StftConfig& cfg = {});

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::span<std::complex<double>> data);

std::vector<double> hann_window(std::size_t length);

// frames x (fft_size/2 + 1) power spectrum |DFT|^2.
Matrix stft_power(const Waveform& w, const StftConfig& cfg = {});

MelFilterbank mel_filterbank(const MelConfig& cfg = {});

// log(power * fb^T + 1e-6).
Spectrogram log_mel(const Waveform& w, const MelFilterbank& fb, const StftConfig& cfg = {});

// Zero mean, unit population std; constant input maps to zeros.
Spectrogram standardize(const Spectrogram& s);

// Right-pads with zeros to at least `length` samples.
Waveform pad_to(const Waveform& w, std::size_t length);

// Contiguous window of round(seconds * 16000) samples starting uniformly at
// random; shorter clips are right-zero-padded first.
Waveform random_crop(const Waveform& w, double seconds, std::mt19937_64& rng);
Waveform random_crop_samples(const Waveform& w, std::size_t length, std::mt19937_64& rng);

// Window starting at `start` of `length` samples, zero padded past the end.
Waveform slice(const Waveform& w, std::size_t start, std::size_t length);

}  // namespace aures::dsp

#endif  // AURES_DSP_HPP_
