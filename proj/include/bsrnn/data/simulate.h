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


#ifndef BSRNN_DATA_SIMULATE_H_
#define BSRNN_DATA_SIMULATE_H_

#include <array>
#include <string>
#include <vector>

#include "bsrnn/audio_io.h"
#include "bsrnn/data/catalog.h"
#include "bsrnn/random.h"
#include "json.hpp"

namespace bsrnn::data {

double Energy(const Waveform& w);

struct MixResult {
  Waveform mixture;
  Waveform scaled_noise;
  double gain = 0.0;
};

// Scales noise so that 10 log10(|speech|^2 / |gain * noise|^2) = snr_db.
MixResult MixAtSnr(const Waveform& speech, const Waveform& noise, double snr_db);

struct RirResult {
  Waveform reverberant;
  Waveform reference;  // the input, untouched
  std::size_t shift = 0;  // argmax |rir|
};

// Full convolution, advanced by argmax |rir| and truncated to the input
// length.
RirResult ApplyRir(const Waveform& speech, const Waveform& rir);
Waveform Reverberate(const Waveform& x, const Waveform& rir, std::size_t shift);

enum class MixCategory { kNoiseOnly, kNoisePlusInterferer, kInterfererOnly };
const char* MixCategoryName(MixCategory c);

struct SimulationConfig {
  int sample_rate = 48000;
  double snr_lo = -5.0, snr_hi = 20.0;
  double sir_lo = -5.0, sir_hi = 20.0;
  double rir_prob = 0.2;
  // noise only, noise + interferer, interferer only
  std::array<double, 3> proportions{0.5, 0.3, 0.2};
  double segment_s = 6.0;
  uint64_t seed = 0;

  std::size_t segment_len() const;
  void Validate() const;
};

struct Draws {
  MixCategory category = MixCategory::kNoiseOnly;
  bool rir_applied = false;
  double snr_db = 0.0;  // meaningful when noise is present
  double sir_db = 0.0;  // meaningful when an interferer is present
  std::size_t speech = 0, noise = 0, interferer = 0, rir = 0, enrollment = 0;
  uint64_t seed = 0;

  bool has_noise() const { return category != MixCategory::kInterfererOnly; }
  bool has_interferer() const { return category != MixCategory::kNoiseOnly; }
  nlohmann::json ToJson() const;
};

struct MixtureSpec {
  Waveform mixture;
  Waveform target;       // anechoic
  Waveform reverberant;  // target as it appears in the mixture
  Waveform noise;        // scaled, zeros when absent
  Waveform interferer;   // scaled, zeros when absent
  Waveform enrollment;   // empty when not personalized
  std::vector<float> embedding;  // of the enrollment speaker, may be empty
  Draws draws;
};

// Loops short clips and randomly crops long ones to `len` samples.
Waveform FitLength(const Waveform& w, std::size_t len, Rng& rng);

MixtureSpec SimulateExample(const Catalog& catalog, const SimulationConfig& cfg,
                            bool personalized, Rng& rng);
// Uses a generator seeded from (cfg.seed, index), so any example can be
// regenerated on its own.
MixtureSpec SimulateIndexed(const Catalog& catalog, const SimulationConfig& cfg,
                            bool personalized, uint64_t index);

}  // namespace bsrnn::data

#endif  // BSRNN_DATA_SIMULATE_H_
