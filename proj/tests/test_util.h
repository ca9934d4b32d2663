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


#ifndef BSRNN_TESTS_TEST_UTIL_H_
#define BSRNN_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "bsrnn/nn/tensor.h"
#include "bsrnn/random.h"

namespace bsrnn::testing {

inline std::vector<float> WhiteNoise(std::size_t n, uint64_t seed,
                                     double scale = 0.5) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(scale * rng.Normal());
  return v;
}

inline std::vector<double> Normals(std::size_t n, Rng& rng,
                                   double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

// Direct O(n^2) one-sided DFT of a windowed frame.
inline std::vector<std::complex<double>> NaiveDft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) /
                        static_cast<double>(n);
      acc += x[i] * std::complex<double>(std::cos(th), std::sin(th));
    }
    out[k] = acc;
  }
  return out;
}

// Relative error in the form used by gradient checks: |a-b| / max(|a|,|b|,floor).
inline double RelErr(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central-difference check of d loss / d var over up to `max_probes` entries.
// `loss` must rebuild the graph from the current values of `var`. Returns the
// worst relative error.
inline double CheckGradient(nn::Var var, const std::vector<double>& analytic,
                            const std::function<double()>& loss,
                            int max_probes, uint64_t seed, double eps = 1e-5,
                            double floor = 1e-6) {
  Rng rng(seed);
  double worst = 0.0;
  const int64_t n = var.numel();
  std::vector<int64_t> idx(n);
  for (int64_t i = 0; i < n; ++i) idx[i] = i;
  if (n > max_probes) {
    for (int64_t i = 0; i < max_probes; ++i) {
      std::swap(idx[i], idx[i + rng.Index(n - i)]);
    }
    idx.resize(max_probes);
  }
  for (int64_t i : idx) {
    const double orig = var.value()[i];
    var.mutable_value()[i] = orig + eps;
    const double lp = loss();
    var.mutable_value()[i] = orig - eps;
    const double lm = loss();
    var.mutable_value()[i] = orig;
    const double numeric = (lp - lm) / (2 * eps);
    worst = std::max(worst, RelErr(analytic[i], numeric, floor));
  }
  return worst;
}

}  // namespace bsrnn::testing

#endif  // BSRNN_TESTS_TEST_UTIL_H_
