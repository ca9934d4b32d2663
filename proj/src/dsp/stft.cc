// Copyright (c) 2026 The bsrnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bsrnn/dsp/stft.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "bsrnn/dsp/fft.h"
#include "bsrnn/error.h"

namespace bsrnn::dsp {
namespace {

constexpr double kEnvelopeFloor = 1e-10;

}  // namespace

StftConfig StftConfig::FromMs(int sample_rate, double window_ms,
                              double hop_ms) {
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.window_len = static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
  cfg.hop_len = static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
  cfg.Validate();
  return cfg;
}

StftConfig StftConfig::ForRate(int sample_rate) {
  if (sample_rate == 48000) return FromMs(48000, 20.0, 10.0);
  if (sample_rate == 16000) return FromMs(16000, 32.0, 8.0);
  throw Error(ErrorKind::kParameter,
              "no default STFT for rate " + std::to_string(sample_rate));
}

void StftConfig::Validate() const {
  BSRNN_CHECK(sample_rate > 0, ErrorKind::kParameter, "sample rate must be > 0");
  BSRNN_CHECK(window_len >= 2, ErrorKind::kParameter, "window too short");
  BSRNN_CHECK(hop_len >= 1 && hop_len <= window_len, ErrorKind::kParameter,
              "hop must lie in [1, window]");
}

int StftConfig::NumFrames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(window_len)) return 0;
  return 1 + static_cast<int>((num_samples - window_len) / hop_len);
}

std::vector<double> HannWindow(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

namespace kernels {

void Analyze(std::span<const double> x, const StftConfig& cfg,
             std::span<double> re, std::span<double> im) {
  const int n = cfg.window_len;
  const int bins = cfg.num_bins();
  const int frames = cfg.NumFrames(x.size());
  const RealFft& fft = RealFft::Get(n);
  const std::vector<double> window = HannWindow(n);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec(bins);
  for (int t = 0; t < frames; ++t) {
    const double* src = x.data() + static_cast<std::size_t>(t) * cfg.hop_len;
    for (int i = 0; i < n; ++i) frame[i] = src[i] * window[i];
    fft.Forward(frame.data(), spec.data());
    for (int f = 0; f < bins; ++f) {
      re[t * bins + f] = spec[f].real();
      im[t * bins + f] = spec[f].imag();
    }
  }
}

void AnalyzeAdjoint(std::span<const double> gre, std::span<const double> gim,
                    const StftConfig& cfg, std::span<double> gx) {
  // d re_k / d x_n = w_n cos(theta), d im_k / d x_n = -w_n sin(theta), so the
  // adjoint is w_n * Re(sum_k G_k exp(+i theta)) over the one-sided bins.
  const int n = cfg.window_len;
  const int bins = cfg.num_bins();
  const int frames = cfg.NumFrames(gx.size());
  const RealFft& fft = RealFft::Get(n);
  const std::vector<double> window = HannWindow(n);
  const bool has_nyquist = n % 2 == 0;
  std::vector<std::complex<double>> spec(bins);
  std::vector<double> frame(n);
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      std::complex<double> g(gre[t * bins + f], gim[t * bins + f]);
      const bool edge = f == 0 || (has_nyquist && f == bins - 1);
      spec[f] = edge ? g : 0.5 * g;
    }
    fft.Inverse(spec.data(), frame.data());
    double* dst = gx.data() + static_cast<std::size_t>(t) * cfg.hop_len;
    for (int i = 0; i < n; ++i) dst[i] += frame[i] * window[i];
  }
}

std::size_t SupportLength(const StftConfig& cfg, int frames) {
  if (frames <= 0) return 0;
  return static_cast<std::size_t>(frames - 1) * cfg.hop_len + cfg.window_len;
}

std::vector<double> Envelope(const StftConfig& cfg, int frames,
                             std::size_t out_len) {
  const std::vector<double> window = HannWindow(cfg.window_len);
  std::vector<double> env(out_len, 0.0);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_len;
    for (int i = 0; i < cfg.window_len && start + i < out_len; ++i) {
      env[start + i] += window[i] * window[i];
    }
  }
  return env;
}

void Synthesize(std::span<const double> re, std::span<const double> im,
                int frames, const StftConfig& cfg, std::span<double> out) {
  const int n = cfg.window_len;
  const int bins = cfg.num_bins();
  const std::size_t out_len = out.size();
  BSRNN_CHECK(out_len <= SupportLength(cfg, frames), ErrorKind::kLength,
              "requested " + std::to_string(out_len) +
                  " samples but frames only support " +
                  std::to_string(SupportLength(cfg, frames)));
  const RealFft& fft = RealFft::Get(n);
  const std::vector<double> window = HannWindow(n);
  const std::vector<double> env = Envelope(cfg, frames, out_len);
  std::vector<std::complex<double>> spec(bins);
  std::vector<double> frame(n);
  std::fill(out.begin(), out.end(), 0.0);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_len;
    if (start >= out_len) break;
    for (int f = 0; f < bins; ++f) {
      spec[f] = {re[t * bins + f], im[t * bins + f]};
    }
    fft.Inverse(spec.data(), frame.data());
    for (int i = 0; i < n && start + i < out_len; ++i) {
      out[start + i] += frame[i] * window[i] / n;
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    out[i] = env[i] > kEnvelopeFloor ? out[i] / env[i] : 0.0;
  }
}

void SynthesizeAdjoint(std::span<const double> gout, int frames,
                       const StftConfig& cfg, std::span<double> gre,
                       std::span<double> gim) {
  const int n = cfg.window_len;
  const int bins = cfg.num_bins();
  const std::size_t out_len = gout.size();
  const RealFft& fft = RealFft::Get(n);
  const std::vector<double> window = HannWindow(n);
  const std::vector<double> env = Envelope(cfg, frames, out_len);
  const bool has_nyquist = n % 2 == 0;
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec(bins);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_len;
    if (start >= out_len) break;
    for (int i = 0; i < n; ++i) {
      const std::size_t m = start + i;
      frame[i] = (m < out_len && env[m] > kEnvelopeFloor)
                     ? gout[m] / env[m] * window[i] / n
                     : 0.0;
    }
    fft.Forward(frame.data(), spec.data());
    for (int f = 0; f < bins; ++f) {
      const bool edge = f == 0 || (has_nyquist && f == bins - 1);
      const double scale = edge ? 1.0 : 2.0;
      gre[t * bins + f] += scale * spec[f].real();
      if (!edge) gim[t * bins + f] += scale * spec[f].imag();
    }
  }
}

}  // namespace kernels

ComplexSpectrogram Stft(const Waveform& w, const StftConfig& cfg) {
  cfg.Validate();
  BSRNN_CHECK(w.sample_rate == cfg.sample_rate, ErrorKind::kParameter,
              "waveform rate " + std::to_string(w.sample_rate) +
                  " does not match STFT rate " +
                  std::to_string(cfg.sample_rate));
  BSRNN_CHECK(w.size() >= static_cast<std::size_t>(cfg.window_len),
              ErrorKind::kLength, "signal shorter than one window");
  std::vector<double> x(w.samples.begin(), w.samples.end());
  const int frames = cfg.NumFrames(x.size());
  const int bins = cfg.num_bins();
  std::vector<double> re(static_cast<std::size_t>(frames) * bins);
  std::vector<double> im(re.size());
  kernels::Analyze(x, cfg, re, im);
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.data.resize(bins, frames);
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      spec.data(f, t) = {re[t * bins + f], im[t * bins + f]};
    }
  }
  return spec;
}

Waveform Istft(const ComplexSpectrogram& spec, std::size_t out_len) {
  const StftConfig& cfg = spec.config;
  cfg.Validate();
  BSRNN_CHECK(spec.bins() == cfg.num_bins(), ErrorKind::kParameter,
              "spectrogram bin count does not match its config");
  const int frames = spec.frames();
  const int bins = spec.bins();
  std::vector<double> re(static_cast<std::size_t>(frames) * bins);
  std::vector<double> im(re.size());
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < bins; ++f) {
      re[t * bins + f] = spec.data(f, t).real();
      im[t * bins + f] = spec.data(f, t).imag();
    }
  }
  std::vector<double> out(out_len);
  kernels::Synthesize(re, im, frames, cfg, out);
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.assign(out.begin(), out.end());
  return w;
}

Eigen::MatrixXd Magnitude(const ComplexSpectrogram& spec) {
  return spec.data.cwiseAbs();
}

Eigen::MatrixXd PowerCompress(const Eigen::MatrixXd& mag, double p) {
  BSRNN_CHECK(p > 0.0, ErrorKind::kParameter, "compression exponent must be > 0");
  BSRNN_CHECK((mag.array() >= 0.0).all(), ErrorKind::kParameter,
              "magnitudes must be non-negative");
  return mag.array().pow(p).matrix();
}

}  // namespace bsrnn::dsp
