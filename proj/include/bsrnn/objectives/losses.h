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


#ifndef BSRNN_OBJECTIVES_LOSSES_H_
#define BSRNN_OBJECTIVES_LOSSES_H_

#include <functional>
#include <memory>
#include <vector>

#include "bsrnn/audio_io.h"
#include "bsrnn/dsp/mel.h"
#include "bsrnn/model/model.h"
#include "bsrnn/nn/graph.h"
#include "bsrnn/objectives/discriminator.h"

namespace bsrnn::objectives {

struct MrLossConfig {
  std::vector<double> windows_ms{10.0, 20.0, 30.0, 40.0};  // hop = window / 2
  double p = 0.3;
};

struct MrTerms {
  nn::Var magnitude;  // mean over resolutions of the compressed-magnitude MAE
  nn::Var complex;    // mean over resolutions of the complex MAE
  nn::Var total;      // magnitude + complex
};

// Waveforms are [Bsz, L] at `sample_rate`.
MrTerms MrLossTerms(nn::Graph& g, const nn::Var& s, const nn::Var& s_hat,
                    int sample_rate, const MrLossConfig& cfg = {});
nn::Var MrLoss(nn::Graph& g, const nn::Var& s, const nn::Var& s_hat,
               int sample_rate, const MrLossConfig& cfg = {});
double MrLoss(const Waveform& s, const Waveform& s_hat,
              const MrLossConfig& cfg = {});

// Maps a raw score on [lo, hi] linearly onto [0, 1], clamped.
double QNormalize(double raw, double lo = -0.5, double hi = 4.5);

// Per-item quality score in [0, 1] of (estimate, reference).
using QualityOracle = std::function<double(const Waveform&, const Waveform&)>;

// sigmoid(si_snr / 10).
double BuiltinQualityProxy(const Waveform& s_hat, const Waveform& s);
QualityOracle ProxyOracle();
// Wraps an oracle so its output is clamped to [0, 1].
QualityOracle Clamped(QualityOracle oracle);

struct Lambdas {
  double l1 = 0.5;  // compressed magnitude
  double l2 = 0.5;  // complex
  double l3 = 1.0;  // adversarial
};

struct MetricGanConfig {
  Lambdas lambdas;
  double p = 0.3;
  // Reconstruction terms over the MR resolutions; otherwise the model STFT.
  bool multi_resolution = true;
  MrLossConfig mr;
};

// Two-channel [Bsz, 2, T, F] stack of compressed magnitudes.
nn::Var MgdInput(nn::Graph& g, const model::SpectrumPair& a,
                 const model::SpectrumPair& ref, double p);

struct AdversarialLosses {
  nn::Var generator;
  nn::Var discriminator;
};

// L_g = mean (1 - D(S_hat, S))^2 and
// L_d = mean (1 - D(S, S))^2 + (q_hat - D(S_hat, S))^2 + (q_x - D(X, S))^2,
// the means running over the batch. q_hat and q_x hold one oracle score per
// item.
AdversarialLosses MgdLosses(nn::Graph& g, const model::SpectrumPair& x,
                            const model::SpectrumPair& s,
                            const model::SpectrumPair& s_hat, Discriminator& d,
                            const std::vector<double>& q_hat,
                            const std::vector<double>& q_x, double p = 0.3);

// lambda1 * L_p + lambda2 * L_s + lambda3 * L_g.
nn::Var CombinedObjective(nn::Graph& g, const nn::Var& l_p, const nn::Var& l_s,
                          const nn::Var& l_g, const Lambdas& lambdas = {});
double CombinedObjective(double l_p, double l_s, double l_g,
                         const Lambdas& lambdas = {});

struct MrsdConfig {
  std::vector<double> windows_ms{2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
  std::vector<int> mel_banks{64, 128, 256};
  MrLossConfig mr;
};

// Mel banks for the mel loss, built on the model STFT.
std::vector<dsp::MelBank> BuildMelBanks(const dsp::StftConfig& stft,
                                        const std::vector<int>& n_mels);

// Mean over banks of the mel-spectrogram MSE; `stft` must match the banks.
nn::Var MultiMelLoss(nn::Graph& g, const nn::Var& s, const nn::Var& s_hat,
                     const dsp::StftConfig& stft,
                     const std::vector<dsp::MelBank>& banks);

// Single-channel [Bsz, 1, T, F] magnitudes at `window_ms`, hop window / 2.
nn::Var MrsdInput(nn::Graph& g, const nn::Var& wave, int sample_rate,
                  double window_ms);

struct MrsdLosses {
  nn::Var generator;      // adversarial + L_MR + L_MMEL
  nn::Var discriminator;
  nn::Var adversarial;    // generator adversarial part
  nn::Var mr;
  nn::Var mel;
};

// `ds` holds one discriminator per window in `cfg.windows_ms`.
MrsdLosses ComputeMrsdLosses(nn::Graph& g, const nn::Var& s,
                             const nn::Var& s_hat, const dsp::StftConfig& stft,
                             const std::vector<dsp::MelBank>& banks,
                             const std::vector<Discriminator*>& ds,
                             const MrsdConfig& cfg = {});

}  // namespace bsrnn::objectives

#endif  // BSRNN_OBJECTIVES_LOSSES_H_
