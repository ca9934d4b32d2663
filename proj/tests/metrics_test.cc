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
#include <filesystem>

#include "bsrnn/error.h"
#include "bsrnn/metrics/metrics.h"
#include "bsrnn/model/model.h"
#include "bsrnn/objectives/losses.h"
#include "doctest.h"
#include "test_util.h"
#include "toy.h"

using namespace bsrnn;
using namespace bsrnn::metrics;

namespace {

constexpr int kRate = 16000;

Waveform Noise(std::size_t n, uint64_t seed, double scale = 0.5) {
  return Waveform(testing::WhiteNoise(n, seed, scale), kRate);
}

Waveform Scaled(const Waveform& w, double a) {
  Waveform out = w;
  for (float& v : out.samples) v = static_cast<float>(a * v);
  return out;
}

// Component of n orthogonal to the zero-mean version of ref, rescaled to the
// energy of ref, in double precision.
std::vector<double> OrthogonalEqualEnergy(const Waveform& ref, const Waveform& n) {
  const std::size_t len = ref.size();
  double mr = 0, mn = 0;
  for (std::size_t i = 0; i < len; ++i) {
    mr += ref.samples[i];
    mn += n.samples[i];
  }
  mr /= len;
  mn /= len;
  std::vector<double> r(len), o(len);
  double rr = 0, dot = 0;
  for (std::size_t i = 0; i < len; ++i) {
    r[i] = ref.samples[i] - mr;
    o[i] = n.samples[i] - mn;
    rr += r[i] * r[i];
    dot += r[i] * o[i];
  }
  double oo = 0;
  for (std::size_t i = 0; i < len; ++i) {
    o[i] -= dot / rr * r[i];
    oo += o[i] * o[i];
  }
  for (double& v : o) v *= std::sqrt(rr / oo);
  return o;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bsrnn_metrics_" + name)).string();
}

}  // namespace

TEST_CASE("si-snr caps, scale invariance and the orthogonal case") {
  const Waveform ref = Noise(16000, 1);
  CHECK(SiSnr(ref, ref) == kSiSnrCapDb);
  CHECK(SiSnr(Scaled(ref, 3.0), ref) == kSiSnrCapDb);

  const Waveform est = [&] {
    Waveform e = ref;
    const auto n = testing::WhiteNoise(16000, 2, 0.2);
    for (std::size_t i = 0; i < e.size(); ++i) e.samples[i] += n[i];
    return e;
  }();
  const double base = SiSnr(est, ref);
  for (double a : {0.01, 0.3, 2.0, 11.0}) {
    CHECK(std::abs(SiSnr(Scaled(est, a), ref) - base) <= 1e-5);
  }

  const auto o = OrthogonalEqualEnergy(ref, Noise(16000, 3));
  Waveform sum = ref;
  Waveform orth = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sum.samples[i] = static_cast<float>(ref.samples[i] + o[i]);
    orth.samples[i] = static_cast<float>(o[i]);
  }
  CHECK(std::abs(SiSnr(sum, ref)) <= 1e-4);
  CHECK(SiSnr(orth, ref) == -kSiSnrCapDb);
}

TEST_CASE("si-snr rises as additive noise shrinks") {
  const Waveform ref = Noise(8000, 4);
  const auto n = testing::WhiteNoise(8000, 5);
  double prev = -1e9;
  for (double a = 3.0; a >= 0.01; a *= 0.8) {
    Waveform e = ref;
    for (std::size_t i = 0; i < e.size(); ++i) e.samples[i] += static_cast<float>(a * n[i]);
    const double v = SiSnr(e, ref);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("si-snr errors") {
  const Waveform silent(std::vector<float>(100, 0.0f), kRate);
  try {
    SiSnr(Noise(100, 1), silent);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMetric);
  }
  CHECK_THROWS_AS(SiSnr(Noise(100, 1), Noise(99, 1)), Error);
}

TEST_CASE("log-spectral distance") {
  const Waveform a = Noise(16000, 6), b = Noise(16000, 7);
  CHECK(Lsd(a, a) == 0.0);
  CHECK(Lsd(Scaled(a, 2.0), a) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-6));
  CHECK(Lsd(a, b) == doctest::Approx(Lsd(b, a)).epsilon(1e-12));
  CHECK(Lsd(a, b) > 0.0);
}

TEST_CASE("external score adapter") {
  CHECK(ParseScore("PESQ=3.21\n", "PESQ=(float)") == doctest::Approx(3.21));
  CHECK(ParseScore("mos: -0.25 done", "mos: (float)") == doctest::Approx(-0.25));
  CHECK_THROWS_AS(ParseScore("nothing here", "PESQ=(float)"), Error);
  CHECK_THROWS_AS(ParseScore("PESQ=3", "PESQ="), Error);

  const std::string ref = TempPath("ref.wav"), est = TempPath("est it's.wav");
  WriteWav(ref, Noise(8000, 8));
  WriteWav(est, Noise(8000, 9));
  const double raw = ExternalScore(est, ref, "test -f {ref} && test -f {est} && echo PESQ=3.5",
                                   "PESQ=(float)");
  CHECK(raw == doctest::Approx(3.5));
  CHECK(objectives::QNormalize(raw) == doctest::Approx(0.8));
  try {
    ExternalScore(est, ref, "echo PESQ=4.0; exit 3", "PESQ=(float)");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAdapter);
  }
  const MetricReport bad = Evaluate(est, ref, "exit 1", "PESQ=(float)");
  CHECK_FALSE(bad.pesq.has_value());
  CHECK(bad.ToJson()["pesq"] == "absent");
  const MetricReport same = Evaluate(ref, ref, "echo PESQ=4.5", "PESQ=(float)");
  CHECK(same.si_snr_db == kSiSnrCapDb);
  CHECK(same.lsd_db == 0.0);
  REQUIRE(same.pesq.has_value());
  CHECK(*same.pesq == doctest::Approx(4.5));
  std::filesystem::remove(ref);
  std::filesystem::remove(est);
}

TEST_CASE("real-time factor is positive, grows with compute and is stable in duration") {
  model::Model toy(testing::ToyConfig(8, 5, 16, 1), 1);
  const double short_rtf = MeasureRtf(toy, 1.0, 5);
  CHECK(std::isfinite(short_rtf));
  CHECK(short_rtf > 0.0);
  const double long_rtf = MeasureRtf(toy, 2.0, 5);
  CHECK(std::abs(long_rtf - short_rtf) / short_rtf < 0.2);

  model::ModelConfig big = testing::ToyConfig(8, 5, 16, 1);
  big.feature_dim = 64;
  big.num_blocks = 4;
  model::Model large(big, 2);
  CHECK(MeasureRtf(large, 1.0, 5) > short_rtf);
}
