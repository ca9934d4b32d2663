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

#include "bsrnn/dsp/mel.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bsrnn/error.h"

namespace bsrnn::dsp {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelBank MelBank::Build(int n_mels, int sample_rate, int fft_size) {
  BSRNN_CHECK(n_mels > 0 && sample_rate > 0 && fft_size >= 2,
              ErrorKind::kParameter, "invalid mel bank geometry");
  MelBank bank;
  bank.n_mels = n_mels;
  bank.sample_rate = sample_rate;
  bank.fft_size = fft_size;
  const int bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  const double top_mel = HzToMel(sample_rate / 2.0 + bin_hz);

  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = MelToHz(top_mel * i / (n_mels + 1));
  }
  bank.weights = Eigen::MatrixXd::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      bank.weights(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return bank;
}

Eigen::MatrixXd MelSpectrogram(const ComplexSpectrogram& spec,
                               const MelBank& bank) {
  BSRNN_CHECK(bank.num_bins() == spec.bins(), ErrorKind::kParameter,
              "mel bank has " + std::to_string(bank.num_bins()) +
                  " bins, spectrogram has " + std::to_string(spec.bins()));
  return bank.weights * spec.data.cwiseAbs();
}

}  // namespace bsrnn::dsp
