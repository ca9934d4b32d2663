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

#ifndef BSRNN_RANDOM_H_
#define BSRNN_RANDOM_H_

#include <cstdint>
#include <random>

namespace bsrnn {

// Platform-stable generator: mt19937_64 is fully specified by the standard,
// and the conversions below avoid the implementation-defined std
// distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return (engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n).
  uint64_t Index(uint64_t n) { return static_cast<uint64_t>(Uniform() * n) % n; }
  double Normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t SplitMix64(uint64_t x);

// Stable per-item seed from a root seed and any number of indices.
uint64_t DeriveSeed(uint64_t root, uint64_t a, uint64_t b = 0, uint64_t c = 0);

}  // namespace bsrnn

#endif  // BSRNN_RANDOM_H_
