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

#include "bsrnn/objectives/losses.h"

#include <algorithm>
#include <cmath>

#include "bsrnn/error.h"
#include "bsrnn/metrics/metrics.h"

namespace bsrnn::objectives {

using nn::Graph;
using nn::Var;

namespace {

Var WaveVar(const Waveform& w) {
  return Var::Constant({1, static_cast<int64_t>(w.size())},
                       std::vector<double>(w.samples.begin(), w.samples.end()));
}

void CheckPair(const Var& a, const Var& b, const char* what) {
  BSRNN_CHECK(a.rank() == 2 && a.shape() == b.shape(), ErrorKind::kParameter,
              std::string(what) + " needs equal [B, L] waveforms, got " +
                  nn::ShapeString(a.shape()) + " and " + nn::ShapeString(b.shape()));
}

dsp::StftConfig HalfHop(int rate, double window_ms) {
  return dsp::StftConfig::FromMs(rate, window_ms, window_ms / 2.0);
}

Var Targets(const std::vector<double>& q, int64_t batch, const char* what) {
  BSRNN_CHECK(static_cast<int64_t>(q.size()) == batch, ErrorKind::kParameter,
              std::string(what) + " needs one oracle score per item");
  std::vector<double> v(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) v[i] = std::clamp(q[i], 0.0, 1.0);
  return Var::Constant({batch}, std::move(v));
}

// mean_b (t - d)^2
Var LeastSquares(Graph& g, const Var& d, const Var& target) {
  return g.Mean(g.Square(g.Sub(target, d)));
}

Var LeastSquares(Graph& g, const Var& d, double target) {
  return g.Mean(g.Square(g.AddScalar(g.Scale(d, -1.0), target)));
}

}  // namespace

MrTerms MrLossTerms(Graph& g, const Var& s, const Var& s_hat, int sample_rate,
                    const MrLossConfig& cfg) {
  CheckPair(s, s_hat, "mr loss");
  BSRNN_CHECK(!cfg.windows_ms.empty(), ErrorKind::kParameter,
              "mr loss needs at least one window");
  Var mag, cplx;
  for (double w : cfg.windows_ms) {
    const auto st = HalfHop(sample_rate, w);
    auto [re, im] = g.Stft(s, st);
    auto [hre, him] = g.Stft(s_hat, st);
    Var m = g.Mean(g.Abs(g.Sub(g.Pow(g.Magnitude(re, im), cfg.p),
                               g.Pow(g.Magnitude(hre, him), cfg.p))));
    Var c = g.Mean(g.Magnitude(g.Sub(re, hre), g.Sub(im, him)));
    mag = mag.defined() ? g.Add(mag, m) : m;
    cplx = cplx.defined() ? g.Add(cplx, c) : c;
  }
  const double inv = 1.0 / cfg.windows_ms.size();
  MrTerms t;
  t.magnitude = g.Scale(mag, inv);
  t.complex = g.Scale(cplx, inv);
  t.total = g.Add(t.magnitude, t.complex);
  return t;
}

Var MrLoss(Graph& g, const Var& s, const Var& s_hat, int sample_rate,
           const MrLossConfig& cfg) {
  return MrLossTerms(g, s, s_hat, sample_rate, cfg).total;
}

double MrLoss(const Waveform& s, const Waveform& s_hat, const MrLossConfig& cfg) {
  BSRNN_CHECK(s.size() == s_hat.size(), ErrorKind::kParameter,
              "mr loss needs equal lengths");
  BSRNN_CHECK(s.sample_rate == s_hat.sample_rate, ErrorKind::kParameter,
              "mr loss needs equal sample rates");
  CheckModelWaveform(s);
  Graph g(false);
  return MrLoss(g, WaveVar(s), WaveVar(s_hat), s.sample_rate, cfg).item();
}

double QNormalize(double raw, double lo, double hi) {
  return std::clamp((raw - lo) / (hi - lo), 0.0, 1.0);
}

double BuiltinQualityProxy(const Waveform& s_hat, const Waveform& s) {
  const double snr = metrics::SiSnr(s_hat, s);
  return std::clamp(1.0 / (1.0 + std::exp(-snr / 10.0)), 0.0, 1.0);
}

QualityOracle ProxyOracle() { return BuiltinQualityProxy; }

QualityOracle Clamped(QualityOracle oracle) {
  return [oracle = std::move(oracle)](const Waveform& e, const Waveform& r) {
    const double q = oracle(e, r);
    return std::isfinite(q) ? std::clamp(q, 0.0, 1.0) : 0.0;
  };
}

Var MgdInput(Graph& g, const model::SpectrumPair& a,
             const model::SpectrumPair& ref, double p) {
  BSRNN_CHECK(a.re.shape() == ref.re.shape() && a.re.rank() == 3,
              ErrorKind::kParameter, "mgd input needs equal [B, T, F] spectra");
  const nn::Shape s4{a.re.dim(0), 1, a.re.dim(1), a.re.dim(2)};
  Var ca = g.Reshape(g.Pow(g.Magnitude(a.re, a.im), p), s4);
  Var cr = g.Reshape(g.Pow(g.Magnitude(ref.re, ref.im), p), s4);
  return g.Concat({ca, cr}, 1);
}

AdversarialLosses MgdLosses(Graph& g, const model::SpectrumPair& x,
                            const model::SpectrumPair& s,
                            const model::SpectrumPair& s_hat, Discriminator& d,
                            const std::vector<double>& q_hat,
                            const std::vector<double>& q_x, double p) {
  BSRNN_CHECK(x.re.shape() == s.re.shape() && s_hat.re.shape() == s.re.shape(),
              ErrorKind::kParameter, "mgd losses need equal spectrum shapes");
  const int64_t batch = s.re.dim(0);
  Var d_est = d.Forward(g, MgdInput(g, s_hat, s, p));
  Var d_clean = d.Forward(g, MgdInput(g, s, s, p));
  Var d_noisy = d.Forward(g, MgdInput(g, x, s, p));
  AdversarialLosses out;
  out.generator = LeastSquares(g, d_est, 1.0);
  out.discriminator =
      g.Add(g.Add(LeastSquares(g, d_clean, 1.0),
                  LeastSquares(g, d_est, Targets(q_hat, batch, "mgd"))),
            LeastSquares(g, d_noisy, Targets(q_x, batch, "mgd")));
  return out;
}

namespace {

void CheckLambdas(const Lambdas& l) {
  for (double v : {l.l1, l.l2, l.l3}) {
    BSRNN_CHECK(std::isfinite(v) && v >= 0.0, ErrorKind::kParameter,
                "loss weights must be finite and non-negative");
  }
}

}  // namespace

Var CombinedObjective(Graph& g, const Var& l_p, const Var& l_s, const Var& l_g,
                      const Lambdas& lambdas) {
  CheckLambdas(lambdas);
  return g.Add(g.Add(g.Scale(l_p, lambdas.l1), g.Scale(l_s, lambdas.l2)),
               g.Scale(l_g, lambdas.l3));
}

double CombinedObjective(double l_p, double l_s, double l_g,
                         const Lambdas& lambdas) {
  CheckLambdas(lambdas);
  return lambdas.l1 * l_p + lambdas.l2 * l_s + lambdas.l3 * l_g;
}

std::vector<dsp::MelBank> BuildMelBanks(const dsp::StftConfig& stft,
                                        const std::vector<int>& n_mels) {
  std::vector<dsp::MelBank> banks;
  for (int n : n_mels) {
    banks.push_back(dsp::MelBank::Build(n, stft.sample_rate, stft.window_len));
  }
  return banks;
}

Var MultiMelLoss(Graph& g, const Var& s, const Var& s_hat,
                 const dsp::StftConfig& stft,
                 const std::vector<dsp::MelBank>& banks) {
  CheckPair(s, s_hat, "mel loss");
  BSRNN_CHECK(!banks.empty(), ErrorKind::kParameter, "mel loss needs a bank");
  auto [re, im] = g.Stft(s, stft);
  auto [hre, him] = g.Stft(s_hat, stft);
  Var mag = g.Magnitude(re, im);
  Var hmag = g.Magnitude(hre, him);
  Var total;
  for (const auto& bank : banks) {
    BSRNN_CHECK(bank.num_bins() == stft.num_bins() &&
                    bank.sample_rate == stft.sample_rate,
                ErrorKind::kParameter, "mel bank does not match the stft");
    std::vector<double> w(bank.weights.size());
    for (int m = 0; m < bank.n_mels; ++m) {
      for (int f = 0; f < bank.num_bins(); ++f) {
        w[m * bank.num_bins() + f] = bank.weights(m, f);
      }
    }
    Var wv = Var::Constant({bank.n_mels, bank.num_bins()}, std::move(w));
    Var diff = g.Sub(g.Linear(mag, wv, Var()), g.Linear(hmag, wv, Var()));
    Var mse = g.Mean(g.Square(diff));
    total = total.defined() ? g.Add(total, mse) : mse;
  }
  return g.Scale(total, 1.0 / banks.size());
}

Var MrsdInput(Graph& g, const Var& wave, int sample_rate, double window_ms) {
  auto [re, im] = g.Stft(wave, HalfHop(sample_rate, window_ms));
  return g.Reshape(g.Magnitude(re, im), {re.dim(0), 1, re.dim(1), re.dim(2)});
}

MrsdLosses ComputeMrsdLosses(Graph& g, const Var& s, const Var& s_hat,
                             const dsp::StftConfig& stft,
                             const std::vector<dsp::MelBank>& banks,
                             const std::vector<Discriminator*>& ds,
                             const MrsdConfig& cfg) {
  CheckPair(s, s_hat, "mrsd losses");
  BSRNN_CHECK(ds.size() == cfg.windows_ms.size(), ErrorKind::kParameter,
              "need one discriminator per mrsd window");
  Var adv, disc;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    Var real = ds[k]->Forward(g, MrsdInput(g, s, stft.sample_rate, cfg.windows_ms[k]));
    Var fake = ds[k]->Forward(g, MrsdInput(g, s_hat, stft.sample_rate, cfg.windows_ms[k]));
    Var a = LeastSquares(g, fake, 1.0);
    Var d = g.Add(LeastSquares(g, real, 1.0), g.Mean(g.Square(fake)));
    adv = adv.defined() ? g.Add(adv, a) : a;
    disc = disc.defined() ? g.Add(disc, d) : d;
  }
  const double inv = 1.0 / ds.size();
  MrsdLosses out;
  out.adversarial = g.Scale(adv, inv);
  out.discriminator = g.Scale(disc, inv);
  out.mr = MrLoss(g, s, s_hat, stft.sample_rate, cfg.mr);
  out.mel = MultiMelLoss(g, s, s_hat, stft, banks);
  out.generator = g.Add(g.Add(out.adversarial, out.mr), out.mel);
  return out;
}

}  // namespace bsrnn::objectives
