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

#include <cmath>
#include <numbers>

#include "bsrnn/dsp/mel.h"
#include "bsrnn/dsp/stft.h"
#include "bsrnn/error.h"
#include "doctest.h"
#include "test_util.h"

using namespace bsrnn;
using namespace bsrnn::dsp;

namespace {

double InteriorRelError(const Waveform& a, const Waveform& b, int margin) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = margin; i + margin < a.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - b.samples[i];
    num += d * d;
    den += static_cast<double>(b.samples[i]) * b.samples[i];
  }
  return std::sqrt(num / den);
}

// Triangular filter value written from the filter definition, independent of
// the library loop.
double OracleMelWeight(int m, int k, int n_mels, int rate, int n_fft) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double z) { return 700.0 * (std::pow(10.0, z / 2595.0) - 1.0); };
  const double bin_hz = static_cast<double>(rate) / n_fft;
  const double top = mel(rate / 2.0 + bin_hz);
  const double left = hz(top * m / (n_mels + 1));
  const double centre = hz(top * (m + 1) / (n_mels + 1));
  const double right = hz(top * (m + 2) / (n_mels + 1));
  const double f = k * bin_hz;
  if (f <= left || f >= right) return 0.0;
  if (f <= centre) return (f - left) / (centre - left);
  return (right - f) / (right - centre);
}

}  // namespace

TEST_CASE("default stft geometries") {
  StftConfig a = StftConfig::ForRate(48000);
  CHECK(a.window_len == 960);
  CHECK(a.hop_len == 480);
  CHECK(a.num_bins() == 481);
  StftConfig b = StftConfig::ForRate(16000);
  CHECK(b.window_len == 512);
  CHECK(b.hop_len == 128);
  CHECK(b.num_bins() == 257);
  CHECK(a.NumFrames(48000) == 99);
  CHECK(b.NumFrames(16000) == 1 + (16000 - 512) / 128);
}

TEST_CASE("stft frames match a direct dft") {
  StftConfig cfg = StftConfig::ForRate(48000);
  Waveform w(testing::WhiteNoise(3000, 11), 48000);
  ComplexSpectrogram spec = Stft(w, cfg);
  CHECK(spec.bins() == 481);
  CHECK(spec.frames() == cfg.NumFrames(3000));
  const auto win = HannWindow(960);
  for (int t : {0, 3}) {
    std::vector<double> frame(960);
    for (int i = 0; i < 960; ++i) frame[i] = w.samples[t * 480 + i] * win[i];
    auto ref = testing::NaiveDft(frame);
    double worst = 0.0;
    for (int f = 0; f < 481; ++f) {
      worst = std::max(worst, std::abs(ref[f] - spec.data(f, t)));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("impulse gives a flat spectrum scaled by window[0]") {
  StftConfig cfg = StftConfig::FromMs(16000, 32, 8);
  Waveform w(std::vector<float>(1024, 0.0f), 16000);
  w.samples[0] = 1.0f;
  ComplexSpectrogram spec = Stft(w, cfg);
  const double w0 = HannWindow(512)[0];
  for (int f = 0; f < spec.bins(); ++f) {
    CHECK(std::abs(std::abs(spec.data(f, 0)) - w0) < 1e-12);
  }
  // Shift the impulse to position 1 where the window value is nonzero.
  w.samples[0] = 0.0f;
  w.samples[1] = 1.0f;
  spec = Stft(w, cfg);
  const double w1 = HannWindow(512)[1];
  for (int f = 0; f < spec.bins(); ++f) {
    CHECK(std::abs(std::abs(spec.data(f, 0)) - w1) < 1e-12);
  }
}

TEST_CASE("1 kHz tone peaks at bin 20") {
  StftConfig cfg = StftConfig::ForRate(48000);
  std::vector<float> x(4800);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(std::sin(2 * std::numbers::pi * 1000.0 * i / 48000));
  }
  ComplexSpectrogram spec = Stft(Waveform(x, 48000), cfg);
  Eigen::Index arg;
  spec.data.col(2).cwiseAbs().maxCoeff(&arg);
  CHECK(arg == 20);
  std::vector<double> frame(960);
  const auto win = HannWindow(960);
  for (int i = 0; i < 960; ++i) frame[i] = x[2 * 480 + i] * win[i];
  auto ref = testing::NaiveDft(frame);
  int best = 0;
  for (int f = 1; f < 481; ++f) {
    if (std::abs(ref[f]) > std::abs(ref[best])) best = f;
  }
  CHECK(best == 20);
}

TEST_CASE("perfect reconstruction on random signals") {
  for (int rate : {48000, 16000}) {
    StftConfig cfg = StftConfig::ForRate(rate);
    double worst = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
      const std::size_t len = rate / 4 + 37 * seed;
      Waveform w(testing::WhiteNoise(len, 1000 + seed), rate);
      ComplexSpectrogram spec = Stft(w, cfg);
      const std::size_t support = kernels::SupportLength(cfg, spec.frames());
      Waveform y = Istft(spec, support);
      Waveform ref(std::vector<float>(w.samples.begin(), w.samples.begin() + support),
                   rate);
      worst = std::max(worst, InteriorRelError(y, ref, cfg.window_len));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("istft of zeros is zero and length is bounded by support") {
  StftConfig cfg = StftConfig::ForRate(16000);
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.data = Eigen::MatrixXcd::Zero(257, 10);
  Waveform y = Istft(spec, kernels::SupportLength(cfg, 10));
  for (float v : y.samples) CHECK(v == 0.0f);
  try {
    Istft(spec, kernels::SupportLength(cfg, 10) + 1);
    FAIL("expected a length error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLength);
  }
}

TEST_CASE("short input is a length error") {
  try {
    Stft(Waveform(std::vector<float>(100, 0.0f), 48000), StftConfig::ForRate(48000));
    FAIL("expected a length error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLength);
  }
}

TEST_CASE("stft is linear") {
  StftConfig cfg = StftConfig::ForRate(16000);
  auto xv = testing::WhiteNoise(2048, 1);
  auto yv = testing::WhiteNoise(2048, 2);
  std::vector<float> zv(2048);
  // Mix in double and compare against the double-rounded float combination.
  for (int i = 0; i < 2048; ++i) zv[i] = static_cast<float>(0.5 * xv[i] - 2.0 * yv[i]);
  auto X = Stft(Waveform(xv, 16000), cfg).data;
  auto Y = Stft(Waveform(yv, 16000), cfg).data;
  auto Z = Stft(Waveform(zv, 16000), cfg).data;
  const double rel = (Z - (0.5 * X - 2.0 * Y)).norm() / Z.norm();
  CHECK(rel < 1e-6);  // float32 rounding of the mixed signal dominates
}

TEST_CASE("frame energy obeys parseval") {
  StftConfig cfg = StftConfig::ForRate(48000);
  Waveform w(testing::WhiteNoise(960, 5), 48000);
  auto spec = Stft(w, cfg);
  const auto win = HannWindow(960);
  double time = 0.0;
  for (int i = 0; i < 960; ++i) time += std::pow(w.samples[i] * win[i], 2);
  double freq = std::norm(spec.data(0, 0)) + std::norm(spec.data(480, 0));
  for (int f = 1; f < 480; ++f) freq += 2 * std::norm(spec.data(f, 0));
  CHECK(std::abs(freq / 960 - time) / time < 1e-6);
}

TEST_CASE("power compression") {
  Eigen::MatrixXd m(1, 3);
  m << 1.0, 0.0, 8.0;
  auto c = PowerCompress(m, 0.3);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(std::abs(PowerCompress(m, 1.0 / 3)(0, 2) - 2.0) < 1e-12);
  CHECK_THROWS_AS(PowerCompress(m, 0.0), Error);
  CHECK_THROWS_AS(PowerCompress(m, -1.0), Error);
}

TEST_CASE("analysis and synthesis adjoints pass the dot-product test") {
  StftConfig cfg = StftConfig::FromMs(16000, 4, 2);
  Rng rng(9);
  const std::size_t len = 64 * 7 + 13;
  const int frames = cfg.NumFrames(len);
  const int bins = cfg.num_bins();
  auto x = testing::Normals(len, rng);
  auto gre = testing::Normals(frames * bins, rng);
  auto gim = testing::Normals(frames * bins, rng);
  std::vector<double> re(frames * bins), im(frames * bins), gx(len, 0.0);
  kernels::Analyze(x, cfg, re, im);
  kernels::AnalyzeAdjoint(gre, gim, cfg, gx);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < frames * bins; ++i) lhs += re[i] * gre[i] + im[i] * gim[i];
  for (std::size_t i = 0; i < len; ++i) rhs += x[i] * gx[i];
  CHECK(testing::RelErr(lhs, rhs) < 1e-10);

  // Synthesis: the imaginary parts of DC and Nyquist are ignored, so zero them.
  for (int t = 0; t < frames; ++t) {
    gim[t * bins] = 0.0;
    gim[t * bins + bins - 1] = 0.0;
  }
  const std::size_t out_len = kernels::SupportLength(cfg, frames) - 5;
  std::vector<double> y(out_len), gy = testing::Normals(out_len, rng);
  std::vector<double> dre(frames * bins, 0.0), dim(frames * bins, 0.0);
  kernels::Synthesize(gre, gim, frames, cfg, y);
  kernels::SynthesizeAdjoint(gy, frames, cfg, dre, dim);
  lhs = 0.0;
  rhs = 0.0;
  for (std::size_t i = 0; i < out_len; ++i) lhs += y[i] * gy[i];
  for (int i = 0; i < frames * bins; ++i) rhs += gre[i] * dre[i] + gim[i] * dim[i];
  CHECK(testing::RelErr(lhs, rhs) < 1e-10);
}

TEST_CASE("mel banks match the triangular oracle and cover every bin") {
  for (int n_mels : {64, 128, 256}) {
    MelBank bank = MelBank::Build(n_mels, 48000, 960);
    REQUIRE(bank.weights.rows() == n_mels);
    REQUIRE(bank.weights.cols() == 481);
    double worst = 0.0;
    for (int m = 0; m < n_mels; ++m) {
      for (int k = 0; k < 481; ++k) {
        CHECK(bank.weights(m, k) >= 0.0);
        worst = std::max(worst, std::abs(bank.weights(m, k) -
                                         OracleMelWeight(m, k, n_mels, 48000, 960)));
      }
    }
    CHECK(worst < 1e-12);
    for (int k = 1; k < 481; ++k) CHECK(bank.weights.col(k).sum() > 0.0);
  }
}

TEST_CASE("mel spectrogram identities and the 64 vs 128 energy ratio") {
  StftConfig cfg = StftConfig::ForRate(48000);
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.data = Eigen::MatrixXcd::Zero(481, 3);
  MelBank b64 = MelBank::Build(64, 48000, 960);
  MelBank b128 = MelBank::Build(128, 48000, 960);
  CHECK(MelSpectrogram(spec, b64).cwiseAbs().maxCoeff() == 0.0);

  spec.data.setOnes();
  auto mel = MelSpectrogram(spec, b64);
  for (int m = 0; m < 64; ++m) {
    CHECK(std::abs(mel(m, 0) - b64.weights.row(m).sum()) < 1e-12);
  }

  Waveform w(testing::WhiteNoise(9600, 4), 48000);
  auto s = Stft(w, cfg);
  auto mag = Magnitude(s);
  auto m64 = MelSpectrogram(s, b64);
  auto m128 = MelSpectrogram(s, b128);
  // Oracle totals summed filter by filter.
  double o64 = 0.0, o128 = 0.0;
  for (int t = 0; t < s.frames(); ++t) {
    for (int k = 0; k < 481; ++k) {
      for (int m = 0; m < 64; ++m) o64 += OracleMelWeight(m, k, 64, 48000, 960) * mag(k, t);
      for (int m = 0; m < 128; ++m) o128 += OracleMelWeight(m, k, 128, 48000, 960) * mag(k, t);
    }
  }
  CHECK(std::abs(m64.sum() - o64) / o64 < 1e-10);
  CHECK(std::abs(m128.sum() - o128) / o128 < 1e-10);
  // Overlapping unit-peak triangles sum to one across the interior, so
  // totals stay close while the coarse bank loses its thin low filters.
  CHECK(m128.sum() / m64.sum() > 0.8);
  CHECK(m128.sum() / m64.sum() < 1.25);

  MelBank b16 = MelBank::Build(64, 16000, 512);
  CHECK_THROWS_AS(MelSpectrogram(s, b16), Error);
}
