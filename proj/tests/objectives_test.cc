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
#include "bsrnn/error.h"
#include "bsrnn/metrics/metrics.h"
#include "bsrnn/objectives/losses.h"
#include "doctest.h"
#include "test_util.h"
#include "toy.h"

using namespace bsrnn;
using namespace bsrnn::objectives;
using nn::Graph;
using nn::Var;

namespace {

constexpr int kRate = 16000;

Waveform Tone(double hz, std::size_t n, double amp = 1.0) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * i / kRate));
  }
  return Waveform(std::move(v), kRate);
}

Var AsVar(const std::vector<std::vector<float>>& rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return Var::Constant({static_cast<int64_t>(rows.size()),
                        static_cast<int64_t>(rows[0].size())},
                       std::move(v));
}

// Magnitude frames by direct DFT, Hann window, hop = window / 2.
std::vector<std::vector<double>> NaiveMagnitudes(const Waveform& w,
                                                 double window_ms) {
  const int win = static_cast<int>(std::lround(window_ms * kRate / 1000.0));
  const int hop = static_cast<int>(std::lround(window_ms / 2 * kRate / 1000.0));
  std::vector<std::vector<double>> frames;
  for (std::size_t start = 0; start + win <= w.size(); start += hop) {
    std::vector<double> x(win);
    for (int i = 0; i < win; ++i) {
      x[i] = w.samples[start + i] * (0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / win));
    }
    std::vector<double> mag;
    for (auto c : testing::NaiveDft(x)) mag.push_back(std::abs(c));
    frames.push_back(mag);
  }
  return frames;
}

struct SpecTriple {
  model::SpectrumPair x, s, s_hat;
};

SpecTriple RandomSpectra(int64_t batch, uint64_t seed) {
  Rng rng(seed);
  const int64_t n = batch * 6 * 17;
  auto make = [&]() {
    return model::SpectrumPair{Var::Constant({batch, 6, 17}, testing::Normals(n, rng)),
                               Var::Constant({batch, 6, 17}, testing::Normals(n, rng))};
  };
  SpecTriple t;
  t.x = make();
  t.s = make();
  t.s_hat = make();
  return t;
}

// Analytic versus central-difference gradients of a scalar loss of the toy
// model's waveform output, probing every trainable tensor.
double PipelineGradientError(model::Model& m, const Var& x,
                             const std::function<Var(Graph&, const Var&)>& loss) {
  m.params().ZeroGrad();
  {
    Graph g;
    Var out = loss(g, m.ForwardWave(g, x, Var(), false));
    g.Backward(out);
  }
  auto eval = [&]() {
    Graph g(false);
    return loss(g, m.ForwardWave(g, x, Var(), false)).item();
  };
  double worst = 0.0;
  uint64_t seed = 1;
  for (const auto& name : m.params().trainable_names()) {
    Var p = m.params().Get(name);
    if (!p.has_grad()) continue;
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const double e = testing::CheckGradient(p, analytic, eval, 3, seed++, 1e-6, 1e-4);
    if (e > 1e-4) MESSAGE(name << " rel err " << e);
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace

TEST_CASE("mr loss is zero on identical signals, symmetric and non-negative") {
  const auto a = testing::WhiteNoise(4000, 1);
  const auto b = testing::WhiteNoise(4000, 2);
  const Waveform wa(a, kRate), wb(b, kRate);
  CHECK(MrLoss(wa, wa) == 0.0);
  const double ab = MrLoss(wa, wb);
  CHECK(ab > 0.0);
  CHECK(std::abs(ab - MrLoss(wb, wa)) <= 1e-12 * ab);
  for (uint64_t seed = 3; seed < 13; ++seed) {
    CHECK(MrLoss(wa, Waveform(testing::WhiteNoise(4000, seed, 0.1), kRate)) >= 0.0);
  }
}

TEST_CASE("mr loss against a zero estimate matches a direct recomputation") {
  const Waveform s = Tone(440.0, 4000);
  const Waveform zero(std::vector<float>(4000, 0.0f), kRate);
  double expected = 0.0;
  for (double w : {10.0, 20.0, 30.0, 40.0}) {
    double mag = 0.0, comp = 0.0;
    std::size_t count = 0;
    for (const auto& frame : NaiveMagnitudes(s, w)) {
      for (double m : frame) {
        comp += std::pow(m, 0.3);
        mag += m;
        ++count;
      }
    }
    expected += (comp + mag) / count;
  }
  expected /= 4.0;
  CHECK(testing::RelErr(MrLoss(s, zero), expected) <= 1e-7);
}

TEST_CASE("mr loss rejects mismatched lengths") {
  const Waveform a(std::vector<float>(1000, 0.1f), kRate);
  const Waveform b(std::vector<float>(999, 0.1f), kRate);
  try {
    MrLoss(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParameter);
  }
}

TEST_CASE("quality normalization") {
  CHECK(QNormalize(4.5) == 1.0);
  CHECK(QNormalize(-0.5) == 0.0);
  CHECK(QNormalize(2.0) == 0.5);
  CHECK(QNormalize(9.0) == 1.0);
  CHECK(QNormalize(-3.0) == 0.0);
}

TEST_CASE("mgd losses reduce to closed forms for constant discriminators") {
  const auto t = RandomSpectra(2, 5);
  const std::vector<double> q_hat{0.3, 0.8}, q_x{0.1, 0.6};
  Graph g(false);
  ConstantDiscriminator one(1.0), zero(0.0);
  {
    auto l = MgdLosses(g, t.x, t.s, t.s_hat, one, {1.0, 1.0}, {1.0, 1.0});
    CHECK(l.generator.item() == 0.0);
    CHECK(l.discriminator.item() == 0.0);
  }
  auto l = MgdLosses(g, t.x, t.s, t.s_hat, zero, q_hat, q_x);
  CHECK(l.generator.item() == doctest::Approx(1.0).epsilon(1e-15));
  const double expected =
      1.0 + (0.3 * 0.3 + 0.8 * 0.8) / 2 + (0.1 * 0.1 + 0.6 * 0.6) / 2;
  CHECK(l.discriminator.item() == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("swapping the quality oracle changes only the discriminator targets") {
  const auto t = RandomSpectra(2, 6);
  auto d = MakeMgdDiscriminator(3);
  Graph g(false);
  const std::vector<double> q_hat{0.25, 0.5}, q_x{0.75, 0.125};
  auto l = MgdLosses(g, t.x, t.s, t.s_hat, d, q_hat, q_x);
  Var de = d.Forward(g, MgdInput(g, t.s_hat, t.s, 0.3));
  Var dc = d.Forward(g, MgdInput(g, t.s, t.s, 0.3));
  Var dx = d.Forward(g, MgdInput(g, t.x, t.s, 0.3));
  double expected = 0.0, gen = 0.0;
  for (int b = 0; b < 2; ++b) {
    expected += (std::pow(1 - dc.value()[b], 2) + std::pow(q_hat[b] - de.value()[b], 2) +
                 std::pow(q_x[b] - dx.value()[b], 2)) / 2;
    gen += std::pow(1 - de.value()[b], 2) / 2;
  }
  CHECK(l.discriminator.item() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(l.generator.item() == doctest::Approx(gen).epsilon(1e-12));
  // A mock oracle only moves the targets; the generator loss is untouched.
  auto l2 = MgdLosses(g, t.x, t.s, t.s_hat, d, {0.9, 0.9}, {0.0, 0.0});
  CHECK(l2.generator.item() == l.generator.item());
  CHECK(l2.discriminator.item() != l.discriminator.item());
  // Oracle scores outside [0, 1] are clamped.
  auto l3 = MgdLosses(g, t.x, t.s, t.s_hat, d, {1.7, 1.0}, {-2.0, 0.0});
  auto l4 = MgdLosses(g, t.x, t.s, t.s_hat, d, {1.0, 1.0}, {0.0, 0.0});
  CHECK(l3.discriminator.item() == l4.discriminator.item());
  Waveform w(testing::WhiteNoise(800, 1), kRate);
  CHECK(Clamped([](const Waveform&, const Waveform&) { return 3.0; })(w, w) == 1.0);
}

TEST_CASE("mgd discriminator output is bounded and finite") {
  auto d = MakeMgdDiscriminator(7);
  const auto t = RandomSpectra(3, 8);
  Graph g(false);
  Var out = d.Forward(g, MgdInput(g, t.s_hat, t.s, 0.3));
  REQUIRE(out.shape() == nn::Shape{3});
  for (double v : out.value()) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("mgd discriminator loss gradients match finite differences") {
  auto d = MakeMgdDiscriminator(9);
  const auto t = RandomSpectra(2, 10);
  const std::vector<double> q_hat{0.3, 0.4}, q_x{0.2, 0.1};
  auto loss = [&](Graph& g) {
    return MgdLosses(g, t.x, t.s, t.s_hat, d, q_hat, q_x).discriminator;
  };
  d.params()->ZeroGrad();
  {
    Graph g;
    g.Backward(loss(g));
  }
  uint64_t seed = 1;
  for (const auto& name : d.params()->trainable_names()) {
    Var p = d.params()->Get(name);
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const double err = testing::CheckGradient(
        p, analytic, [&]() { Graph g(false); return loss(g).item(); }, 8, seed++,
        1e-6, 1e-6);
    CHECK_MESSAGE(err <= 1e-4, name);
  }
}

TEST_CASE("mgd generator loss gradient through the discriminator on a tiny model") {
  model::Model m(testing::ToyConfig(4, 3, 8, 1, false), 11);
  auto d = MakeMgdDiscriminator(12);
  const auto clean = testing::WhiteNoise(2 * 1280, 13, 0.3);
  const auto noise = testing::WhiteNoise(2 * 1280, 14, 0.1);
  std::vector<double> xs(clean.size()), ss(clean.begin(), clean.end());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = ss[i] + noise[i];
  const Var x = Var::Constant({2, 1280}, xs);
  const Var s = Var::Constant({2, 1280}, ss);
  const auto& st = m.config().stft;
  const double err = PipelineGradientError(m, x, [&](Graph& g, const Var& est) {
    auto [xr, xi] = g.Stft(x, st);
    auto [sr, si] = g.Stft(s, st);
    auto [er, ei] = g.Stft(est, st);
    return MgdLosses(g, {xr, xi}, {sr, si}, {er, ei}, d, {0.5, 0.5}, {0.2, 0.2})
        .generator;
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("mrsd losses reduce to closed forms for constant discriminators") {
  const auto st = dsp::StftConfig::FromMs(kRate, 8, 4);
  const auto banks = BuildMelBanks(st, {64, 128, 256});
  const Var s = AsVar({testing::WhiteNoise(1280, 1, 0.3), testing::WhiteNoise(1280, 2, 0.3)});
  const Var other = AsVar({testing::WhiteNoise(1280, 3, 0.3), testing::WhiteNoise(1280, 4, 0.3)});
  ConstantDiscriminator one(1.0), zero(0.0);
  std::vector<Discriminator*> ones(6, &one), zeros(6, &zero);
  Graph g(false);
  auto l = ComputeMrsdLosses(g, s, s, st, banks, ones);
  CHECK(l.generator.item() == 0.0);
  CHECK(l.discriminator.item() == doctest::Approx(1.0).epsilon(1e-15));
  auto z = ComputeMrsdLosses(g, s, other, st, banks, zeros);
  CHECK(z.discriminator.item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z.adversarial.item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z.generator.item() ==
        doctest::Approx(1.0 + z.mr.item() + z.mel.item()).epsilon(1e-14));
  CHECK_THROWS_AS(ComputeMrsdLosses(g, s, s, st, banks, std::vector<Discriminator*>(5, &one)),
                  Error);
}

TEST_CASE("multi-mel loss matches an independent recomputation") {
  const auto st = dsp::StftConfig::FromMs(kRate, 8, 4);
  const auto banks = BuildMelBanks(st, {64, 128, 256});
  const Waveform s(testing::WhiteNoise(1280, 21, 0.3), kRate);
  const Var sv = AsVar({s.samples});
  const Var zero = Var::Zeros({1, 1280});
  Graph g(false);
  CHECK(MultiMelLoss(g, sv, sv, st, banks).item() == 0.0);
  const auto spec = dsp::Stft(s, st);
  double expected = 0.0;
  for (const auto& bank : banks) {
    const Eigen::MatrixXd mel = dsp::MelSpectrogram(spec, bank);
    expected += mel.array().square().mean();
  }
  expected /= banks.size();
  CHECK(testing::RelErr(MultiMelLoss(g, sv, zero, st, banks).item(), expected) <= 1e-10);
}

TEST_CASE("combined objective weights and decoupling") {
  CHECK(CombinedObjective(0.0, 0.0, 0.0) == 0.0);
  CHECK(CombinedObjective(2.0, 2.0, 1.0) == 3.0);
  CHECK_THROWS_AS(CombinedObjective(1.0, 1.0, 1.0, {0.5, -0.1, 1.0}), Error);
  CHECK_THROWS_AS(CombinedObjective(1.0, 1.0, 1.0, {0.5, 0.5, NAN}), Error);

  auto d = MakeMgdDiscriminator(4);
  const auto t = RandomSpectra(2, 5);
  Var est_re = Var::Parameter(t.s_hat.re.shape(),
                              std::vector<double>(t.s_hat.re.value().begin(),
                                                  t.s_hat.re.value().end()));
  d.params()->ZeroGrad();
  Graph g;
  Var l_p = g.Mean(g.Square(g.Sub(est_re, t.s.re)));
  auto adv = MgdLosses(g, t.x, t.s, {est_re, t.s_hat.im}, d, {0.5, 0.5}, {0.5, 0.5});
  Var total = CombinedObjective(g, l_p, l_p, adv.generator, {0.5, 0.5, 0.0});
  CHECK(total.item() == doctest::Approx(l_p.item()).epsilon(1e-15));
  g.Backward(total);
  for (const auto& name : d.params()->trainable_names()) {
    for (double v : d.params()->Get(name).grad()) CHECK(v == 0.0);
  }
}

TEST_CASE("builtin quality proxy") {
  const Waveform s(testing::WhiteNoise(8000, 1), kRate);
  CHECK(BuiltinQualityProxy(s, s) >= 0.98);
  // Noise with its projection on the (zero-mean) reference removed.
  auto n = testing::WhiteNoise(8000, 2);
  double ms = 0, mn = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    ms += s.samples[i];
    mn += n[i];
  }
  ms /= n.size();
  mn /= n.size();
  double dot = 0, rr = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    dot += (n[i] - mn) * (s.samples[i] - ms);
    rr += (s.samples[i] - ms) * (s.samples[i] - ms);
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    n[i] = static_cast<float>(n[i] - dot / rr * (s.samples[i] - ms));
  }
  CHECK(BuiltinQualityProxy(Waveform(n, kRate), s) <= 0.02);
  const auto noise = testing::WhiteNoise(8000, 3);
  double prev = 2.0;
  for (double alpha = 0.0; alpha <= 4.0; alpha += 0.05) {
    std::vector<float> e(8000);
    for (int i = 0; i < 8000; ++i) {
      e[i] = static_cast<float>(s.samples[i] + alpha * noise[i]);
    }
    const double q = BuiltinQualityProxy(Waveform(e, kRate), s);
    CHECK(q <= prev);
    prev = q;
  }
}

TEST_CASE("full pipeline gradients of every loss match finite differences") {
  model::Model m(testing::ToyConfig(4, 3, 8, 1, false), 31);
  const int64_t len = 1280;
  const auto clean = testing::WhiteNoise(2 * len, 32, 0.3);
  const auto noise = testing::WhiteNoise(2 * len, 33, 0.1);
  std::vector<double> xs(clean.size()), ss(clean.begin(), clean.end());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = ss[i] + noise[i];
  const Var x = Var::Constant({2, len}, xs);
  const Var s = Var::Constant({2, len}, ss);
  const auto& st = m.config().stft;

  SUBCASE("multi-resolution loss") {
    const double err = PipelineGradientError(m, x, [&](Graph& g, const Var& est) {
      return MrLoss(g, s, est, kRate);
    });
    CHECK(err <= 1e-3);
  }
  SUBCASE("metric-gan objective") {
    auto d = MakeMgdDiscriminator(34);
    const double err = PipelineGradientError(m, x, [&](Graph& g, const Var& est) {
      auto terms = MrLossTerms(g, s, est, kRate);
      auto [xr, xi] = g.Stft(x, st);
      auto [sr, si] = g.Stft(s, st);
      auto [er, ei] = g.Stft(est, st);
      auto adv = MgdLosses(g, {xr, xi}, {sr, si}, {er, ei}, d, {0.4, 0.6}, {0.1, 0.2});
      return CombinedObjective(g, terms.magnitude, terms.complex, adv.generator);
    });
    CHECK(err <= 1e-3);
  }
  SUBCASE("multi-resolution spectrogram discriminator objective") {
    std::vector<ConvDiscriminator> ds;
    for (int k = 0; k < 6; ++k) {
      ds.push_back(MakeMrsdDiscriminator(40 + k, "disc.mrsd." + std::to_string(k)));
    }
    std::vector<Discriminator*> ptrs;
    for (auto& d : ds) ptrs.push_back(&d);
    const auto banks = BuildMelBanks(st, {64, 128, 256});
    const double err = PipelineGradientError(m, x, [&](Graph& g, const Var& est) {
      return ComputeMrsdLosses(g, s, est, st, banks, ptrs).generator;
    });
    CHECK(err <= 1e-3);
  }
}
