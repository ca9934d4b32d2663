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

#include "bsrnn/data/simulate.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "bsrnn/dsp/fft.h"
#include "bsrnn/error.h"

namespace bsrnn::data {

double Energy(const Waveform& w) {
  double e = 0.0;
  for (float v : w.samples) e += double{v} * v;
  return e;
}

MixResult MixAtSnr(const Waveform& speech, const Waveform& noise, double snr_db) {
  BSRNN_CHECK(speech.size() == noise.size(), ErrorKind::kParameter,
              "speech and noise lengths differ");
  BSRNN_CHECK(std::isfinite(snr_db), ErrorKind::kParameter, "snr must be finite");
  const double es = Energy(speech), en = Energy(noise);
  BSRNN_CHECK(es > 0.0, ErrorKind::kSimulation, "silent speech");
  BSRNN_CHECK(en > 0.0, ErrorKind::kSimulation, "silent noise");
  MixResult r;
  r.gain = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise = Waveform(std::vector<float>(noise.size()), speech.sample_rate);
  r.mixture = Waveform(std::vector<float>(noise.size()), speech.sample_rate);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    r.scaled_noise.samples[i] = static_cast<float>(r.gain * noise.samples[i]);
    r.mixture.samples[i] = speech.samples[i] + r.scaled_noise.samples[i];
  }
  return r;
}

Waveform Reverberate(const Waveform& x, const Waveform& rir, std::size_t shift) {
  const std::size_t n = x.size(), m = rir.size();
  std::size_t size = 1;
  while (size < n + m - 1) size <<= 1;
  const auto& fft = dsp::RealFft::Get(static_cast<int>(std::max<std::size_t>(size, 2)));
  std::vector<double> a(fft.size(), 0.0), b(fft.size(), 0.0);
  std::copy(x.samples.begin(), x.samples.end(), a.begin());
  std::copy(rir.samples.begin(), rir.samples.end(), b.begin());
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  fft.Forward(a.data(), fa.data());
  fft.Forward(b.data(), fb.data());
  for (int k = 0; k < fft.bins(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa.data(), a.data());
  Waveform out(std::vector<float>(n, 0.0f), x.sample_rate);
  const double inv = 1.0 / fft.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + shift;
    if (j < n + m - 1) out.samples[i] = static_cast<float>(a[j] * inv);
  }
  return out;
}

RirResult ApplyRir(const Waveform& speech, const Waveform& rir) {
  BSRNN_CHECK(!rir.samples.empty(), ErrorKind::kSimulation, "empty rir");
  std::size_t peak = 0;
  float best = 0.0f;
  for (std::size_t i = 0; i < rir.size(); ++i) {
    BSRNN_CHECK(std::isfinite(rir.samples[i]), ErrorKind::kSimulation, "non-finite rir");
    if (std::abs(rir.samples[i]) > best) {
      best = std::abs(rir.samples[i]);
      peak = i;
    }
  }
  BSRNN_CHECK(best > 0.0f, ErrorKind::kSimulation, "all-zero rir");
  return {Reverberate(speech, rir, peak), speech, peak};
}

const char* MixCategoryName(MixCategory c) {
  switch (c) {
    case MixCategory::kNoiseOnly: return "noise_only";
    case MixCategory::kNoisePlusInterferer: return "noise_plus_interferer";
    case MixCategory::kInterfererOnly: return "interferer_only";
  }
  return "?";
}

std::size_t SimulationConfig::segment_len() const {
  return static_cast<std::size_t>(std::lround(segment_s * sample_rate));
}

void SimulationConfig::Validate() const {
  BSRNN_CHECK(IsModelRate(sample_rate), ErrorKind::kConfig,
              "simulation rate must be 16000 or 48000");
  BSRNN_CHECK(snr_lo <= snr_hi && sir_lo <= sir_hi, ErrorKind::kConfig,
              "snr/sir ranges must be ordered");
  BSRNN_CHECK(rir_prob >= 0.0 && rir_prob <= 1.0, ErrorKind::kConfig,
              "rir probability must be in [0, 1]");
  double sum = 0.0;
  for (double p : proportions) {
    BSRNN_CHECK(p >= 0.0, ErrorKind::kConfig, "negative mix proportion");
    sum += p;
  }
  BSRNN_CHECK(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kConfig,
              "mix proportions must sum to 1");
  BSRNN_CHECK(segment_s > 0.0, ErrorKind::kConfig, "segment length must be positive");
}

nlohmann::json Draws::ToJson() const {
  nlohmann::json j = {{"category", MixCategoryName(category)},
                      {"rir_applied", rir_applied},
                      {"speech", speech},
                      {"seed", seed}};
  j["snr_db"] = has_noise() ? nlohmann::json(snr_db) : nlohmann::json(nullptr);
  j["sir_db"] = has_interferer() ? nlohmann::json(sir_db) : nlohmann::json(nullptr);
  if (has_noise()) j["noise"] = noise;
  if (has_interferer()) j["interferer"] = interferer;
  if (rir_applied) j["rir"] = rir;
  j["enrollment"] = enrollment;
  return j;
}

Waveform FitLength(const Waveform& w, std::size_t len, Rng& rng) {
  BSRNN_CHECK(!w.samples.empty(), ErrorKind::kSimulation, "empty source clip");
  std::vector<float> out(len);
  if (w.size() >= len) {
    const std::size_t off = static_cast<std::size_t>(rng.Index(w.size() - len + 1));
    std::copy(w.samples.begin() + off, w.samples.begin() + off + len, out.begin());
  } else {
    for (std::size_t i = 0; i < len; ++i) out[i] = w.samples[i % w.size()];
  }
  return Waveform(std::move(out), w.sample_rate);
}

namespace {

const Waveform& Source(const Catalog& c, SourceKind kind, std::size_t i, int rate) {
  const Waveform& w = c.audio(kind, i);
  BSRNN_CHECK(w.sample_rate == rate, ErrorKind::kSimulation,
              std::string(SourceKindName(kind)) + " clip " + std::to_string(i) +
                  " is at " + std::to_string(w.sample_rate) + " Hz, expected " +
                  std::to_string(rate));
  return w;
}

std::size_t Pick(const Catalog& c, SourceKind kind, Rng& rng) {
  BSRNN_CHECK(c.count(kind) > 0, ErrorKind::kSimulation,
              std::string("catalog has no ") + SourceKindName(kind) + " entries");
  return static_cast<std::size_t>(rng.Index(c.count(kind)));
}

constexpr int kMaxAttempts = 8;

}  // namespace

MixtureSpec SimulateExample(const Catalog& catalog, const SimulationConfig& cfg,
                            bool personalized, Rng& rng) {
  cfg.Validate();
  const std::size_t len = cfg.segment_len();
  const int rate = cfg.sample_rate;
  for (int attempt = 0;; ++attempt) {
    MixtureSpec spec;
    Draws& d = spec.draws;
    // Every draw is made unconditionally so that the stream of random
    // numbers does not depend on earlier outcomes.
    const double u_cat = rng.Uniform();
    const double u_rir = rng.Uniform();
    d.snr_db = rng.Uniform(cfg.snr_lo, cfg.snr_hi);
    d.sir_db = rng.Uniform(cfg.sir_lo, cfg.sir_hi);
    if (personalized) {
      if (u_cat < cfg.proportions[0]) {
        d.category = MixCategory::kNoiseOnly;
      } else if (u_cat < cfg.proportions[0] + cfg.proportions[1]) {
        d.category = MixCategory::kNoisePlusInterferer;
      } else {
        d.category = MixCategory::kInterfererOnly;
      }
    }
    d.rir_applied = u_rir < cfg.rir_prob;

    d.speech = Pick(catalog, SourceKind::kSpeech, rng);
    spec.target = FitLength(Source(catalog, SourceKind::kSpeech, d.speech, rate), len, rng);
    spec.reverberant = spec.target;
    std::size_t shift = 0;
    Waveform rir;
    if (d.rir_applied) {
      d.rir = Pick(catalog, SourceKind::kRir, rng);
      rir = Source(catalog, SourceKind::kRir, d.rir, rate);
      auto r = ApplyRir(spec.target, rir);
      spec.reverberant = std::move(r.reverberant);
      shift = r.shift;
    }

    if (d.has_noise()) d.noise = Pick(catalog, SourceKind::kNoise, rng);
    if (d.has_interferer()) d.interferer = Pick(catalog, SourceKind::kInterferer, rng);
    try {
      spec.noise = Waveform(std::vector<float>(len, 0.0f), rate);
      spec.interferer = Waveform(std::vector<float>(len, 0.0f), rate);
      if (d.has_noise()) {
        const Waveform n = FitLength(Source(catalog, SourceKind::kNoise, d.noise, rate), len, rng);
        spec.noise = MixAtSnr(spec.reverberant, n, d.snr_db).scaled_noise;
      }
      if (d.has_interferer()) {
        const Waveform v =
            FitLength(Source(catalog, SourceKind::kInterferer, d.interferer, rate), len, rng);
        spec.interferer = MixAtSnr(spec.reverberant, v, d.sir_db).scaled_noise;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSimulation || attempt + 1 >= kMaxAttempts) throw;
      continue;  // silent speech or noise: draw again
    }
    spec.mixture = Waveform(std::vector<float>(len), rate);
    for (std::size_t i = 0; i < len; ++i) {
      spec.mixture.samples[i] =
          spec.reverberant.samples[i] + spec.noise.samples[i] + spec.interferer.samples[i];
    }

    d.enrollment = d.speech;
    if (personalized) {
      auto same = catalog.SameSpeaker(d.speech);
      if (same.size() > 1) {
        same.erase(std::find(same.begin(), same.end(), d.speech));
      }
      d.enrollment = same[rng.Index(same.size())];
      spec.enrollment =
          FitLength(Source(catalog, SourceKind::kSpeech, d.enrollment, rate), len, rng);
      if (d.rir_applied) spec.enrollment = Reverberate(spec.enrollment, rir, shift);
      spec.embedding = catalog.embedding(SourceKind::kSpeech, d.enrollment);
      if (spec.embedding.empty()) {
        spec.embedding = catalog.embedding(SourceKind::kSpeech, d.speech);
      }
    }
    return spec;
  }
}

MixtureSpec SimulateIndexed(const Catalog& catalog, const SimulationConfig& cfg,
                            bool personalized, uint64_t index) {
  const uint64_t seed = DeriveSeed(cfg.seed, index);
  Rng rng(seed);
  MixtureSpec spec = SimulateExample(catalog, cfg, personalized, rng);
  spec.draws.seed = seed;
  return spec;
}

}  // namespace bsrnn::data
