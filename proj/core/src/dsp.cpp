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

#include "aures/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "aures/errors.hpp"

namespace aures::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
  if (cfg.hop_samples == 0 || cfg.window_samples == 0) {
    throw ConfigError("stft: window and hop must be positive");
  }
  if (length < cfg.window_samples) {
    throw InputError("waveform of " + std::to_string(length) + " samples is shorter than the " +
                     std::to_string(cfg.window_samples) + "-sample window");
  }
  return (length - cfg.window_samples) / cfg.hop_samples + 1;
}

std::size_t samples_for_frames(std::size_t frames, const StftConfig& cfg) {
  if (frames == 0) throw ConfigError("frame count must be positive");
  return (frames - 1) * cfg.hop_samples + cfg.window_samples;
}

void fft_radix2(std::span<std::complex<double>> data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  // Twiddles come from one table evaluated directly, so the error does not
  // grow with the stage length. The table is cached per size.
  thread_local std::vector<std::complex<double>> twiddle;
  if (twiddle.size() != n / 2) {
    twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                       static_cast<double>(n));
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Spelled out: std::complex multiplication goes through the
        // NaN-recovering library routine, which dominates the runtime.
        const std::complex<double> w = twiddle[k * step];
        const std::complex<double> x = data[start + k + half];
        const std::complex<double> v(x.real() * w.real() - x.imag() * w.imag(),
                                     x.real() * w.imag() + x.imag() * w.real());
        const std::complex<double> u = data[start + k];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

Matrix stft_power(const Waveform& w, const StftConfig& cfg) {
  if (w.sample_rate != kSampleRate) {
    throw InputError("expected " + std::to_string(kSampleRate) + " Hz audio, got " +
                     std::to_string(w.sample_rate));
  }
  if (cfg.fft_size < cfg.window_samples) throw ConfigError("fft size smaller than window");
  const std::size_t frames = frame_count(w.samples.size(), cfg);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const std::vector<double> window = hann_window(cfg.window_samples);
  Matrix out{frames, bins, std::vector<double>(frames * bins)};
  const std::size_t n = cfg.fft_size;
  std::vector<std::complex<double>> buf(n);
  // Two real frames per complex transform: frame t in the real part, t + 1
  // in the imaginary part, separated through conjugate symmetry.
  for (std::size_t t = 0; t < frames; t += 2) {
    const bool pair = t + 1 < frames;
    const double* a = w.samples.data() + t * cfg.hop_samples;
    const double* b = pair ? a + cfg.hop_samples : nullptr;
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t i = 0; i < cfg.window_samples; ++i) {
      buf[i] = {a[i] * window[i], pair ? b[i] * window[i] : 0.0};
    }
    fft_radix2(buf);
    double* ra = out.values.data() + t * bins;
    double* rb = pair ? ra + bins : nullptr;
    for (std::size_t k = 0; k < bins; ++k) {
      const std::complex<double> z = buf[k];
      const std::complex<double> c = std::conj(buf[(n - k) % n]);
      const double xr = 0.5 * (z.real() + c.real());
      const double xi = 0.5 * (z.imag() + c.imag());
      ra[k] = xr * xr + xi * xi;
      if (pair) {
        const double yr = 0.5 * (z.imag() - c.imag());
        const double yi = 0.5 * (c.real() - z.real());
        rb[k] = yr * yr + yi * yi;
      }
    }
  }
  return out;
}

MelFilterbank mel_filterbank(const MelConfig& cfg) {
  if (cfg.n_mels < 2) throw ConfigError("mel filterbank needs at least 2 filters");
  if (!(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax && cfg.fmax <= cfg.sample_rate / 2.0)) {
    throw ConfigError("invalid mel frequency range [" + std::to_string(cfg.fmin) + ", " +
                      std::to_string(cfg.fmax) + "]");
  }
  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = cfg.fft_size / 2 + 1;
  fb.fmin = cfg.fmin;
  fb.fmax = cfg.fmax;
  fb.sample_rate = cfg.sample_rate;
  fb.fft_size = cfg.fft_size;

  // n_mels + 2 points equally spaced in mel; interior points are centers.
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(cfg.n_mels + 1));
  }
  fb.center_hz.assign(edges.begin() + 1, edges.end() - 1);
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      const double v = std::max(0.0, std::min(up, down));
      fb.weights[m * fb.n_bins + k] = v;
      any = any || v > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels");
    }
  }
  return fb;
}

Spectrogram log_mel(const Waveform& w, const MelFilterbank& fb, const StftConfig& cfg) {
  if (cfg.fft_size / 2 + 1 != fb.n_bins) {
    throw ConfigError("filterbank built for a different fft size");
  }
  const Matrix power = stft_power(w, cfg);
  Spectrogram s;
  s.frames = power.rows;
  s.n_mels = fb.n_mels;
  s.frame_hop = static_cast<double>(cfg.hop_samples) / kSampleRate;
  s.window = static_cast<double>(cfg.window_samples) / kSampleRate;
  s.values.resize(s.frames * s.n_mels);
  // Each triangle covers a narrow band; only its nonzero bins are summed.
  std::vector<std::size_t> lo(fb.n_mels, 0), hi(fb.n_mels, 0);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    const double* wrow = fb.weights.data() + m * fb.n_bins;
    std::size_t k = 0;
    while (k < fb.n_bins && wrow[k] == 0.0) ++k;
    lo[m] = k;
    std::size_t e = fb.n_bins;
    while (e > k && wrow[e - 1] == 0.0) --e;
    hi[m] = e;
  }
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double* row = power.values.data() + t * power.cols;
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      const double* wrow = fb.weights.data() + m * fb.n_bins;
      double acc = 0.0;
      for (std::size_t k = lo[m]; k < hi[m]; ++k) acc += row[k] * wrow[k];
      s.values[t * s.n_mels + m] = std::log(acc + kLogFloor);
    }
  }
  return s;
}

Spectrogram standardize(const Spectrogram& s) {
  Spectrogram out = s;
  const double n = static_cast<double>(s.values.size());
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  var /= n;
  const double denom = std::max(std::sqrt(var), 1e-8);
  for (double& v : out.values) v = (v - mean) / denom;
  // Constant inputs: mean removal alone leaves rounding residue.
  if (std::sqrt(var) <= 1e-8) std::fill(out.values.begin(), out.values.end(), 0.0);
  return out;
}

Waveform pad_to(const Waveform& w, std::size_t length) {
  Waveform out = w;
  if (out.samples.size() < length) out.samples.resize(length, 0.0);
  return out;
}

Waveform slice(const Waveform& w, std::size_t start, std::size_t length) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < length && start + i < w.samples.size(); ++i) {
    out.samples[i] = w.samples[start + i];
  }
  return out;
}

Waveform random_crop_samples(const Waveform& w, std::size_t length, std::mt19937_64& rng) {
  if (length == 0) throw ConfigError("crop length must be positive");
  const Waveform padded = pad_to(w, length);
  std::uniform_int_distribution<std::size_t> start_dist(0, padded.samples.size() - length);
  return slice(padded, start_dist(rng), length);
}

Waveform random_crop(const Waveform& w, double seconds, std::mt19937_64& rng) {
  if (!(seconds > 0.0)) throw ConfigError("crop length must be positive");
  return random_crop_samples(w, static_cast<std::size_t>(std::llround(seconds * w.sample_rate)),
                             rng);
}

}  // namespace aures::dsp
