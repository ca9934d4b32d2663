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

#ifndef BSRNN_DSP_FFT_H_
#define BSRNN_DSP_FFT_H_

#include <complex>

namespace bsrnn::dsp {

// Real-input FFT of a fixed length backed by an FFTW plan. Execution is
// thread-safe; plans are created once per size under a lock.
class RealFft {
 public:
  static const RealFft& Get(int n);

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / N), k = 0..N/2.
  void Forward(const double* in, std::complex<double>* out) const;
  // Unnormalized Hermitian inverse: out[n] = sum over the full spectrum.
  // Imaginary parts of the DC and Nyquist bins are ignored.
  void Inverse(const std::complex<double>* in, double* out) const;

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft();

 private:
  explicit RealFft(int n);

  int n_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace bsrnn::dsp

#endif  // BSRNN_DSP_FFT_H_
