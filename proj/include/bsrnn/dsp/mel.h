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

#ifndef BSRNN_DSP_MEL_H_
#define BSRNN_DSP_MEL_H_

#include <Eigen/Core>

#include "bsrnn/dsp/stft.h"

namespace bsrnn::dsp {

double HzToMel(double hz);  // HTK: 2595 log10(1 + f / 700)
double MelToHz(double mel);

// Triangular, area-unnormalized HTK filterbank. Filter centres are equally
// spaced in mel between 0 Hz and one bin above Nyquist, so the Nyquist bin
// keeps a positive weight in the top filter.
struct MelBank {
  int n_mels = 0;
  int sample_rate = 0;
  int fft_size = 0;
  Eigen::MatrixXd weights;  // n_mels x F

  static MelBank Build(int n_mels, int sample_rate, int fft_size);
  int num_bins() const { return static_cast<int>(weights.cols()); }
};

// weights * |spec|, n_mels x T.
Eigen::MatrixXd MelSpectrogram(const ComplexSpectrogram& spec,
                               const MelBank& bank);

}  // namespace bsrnn::dsp

#endif  // BSRNN_DSP_MEL_H_
