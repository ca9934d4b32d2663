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

#ifndef BSRNN_DSP_STFT_H_
#define BSRNN_DSP_STFT_H_

#include <Eigen/Core>
#include <span>
#include <vector>

#include "bsrnn/audio_io.h"

namespace bsrnn::dsp {

// Hann-windowed STFT geometry. The FFT size equals the window length.
struct StftConfig {
  int sample_rate = 48000;
  int window_len = 960;
  int hop_len = 480;

  // window_len = round(window_ms * rate / 1000), same for the hop.
  static StftConfig FromMs(int sample_rate, double window_ms, double hop_ms);
  // 20/10 ms at 48 kHz, 32/8 ms at 16 kHz.
  static StftConfig ForRate(int sample_rate);

  int num_bins() const { return window_len / 2 + 1; }
  int NumFrames(std::size_t num_samples) const;
  double frames_per_second() const {
    return static_cast<double>(sample_rate) / hop_len;
  }
  void Validate() const;

  bool operator==(const StftConfig&) const = default;
};

// Periodic Hann window of length n.
std::vector<double> HannWindow(int n);

// F x T; column t is frame t (contiguous in memory).
struct ComplexSpectrogram {
  Eigen::MatrixXcd data;
  StftConfig config;

  int bins() const { return static_cast<int>(data.rows()); }
  int frames() const { return static_cast<int>(data.cols()); }
};

ComplexSpectrogram Stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add with the analysis window as synthesis window and
// division by the summed squared-window envelope. Positions whose envelope
// is zero come out as 0; out_len beyond the frames' support is an error.
Waveform Istft(const ComplexSpectrogram& spec, std::size_t out_len);

Eigen::MatrixXd Magnitude(const ComplexSpectrogram& spec);

// Elementwise mag^p; mag must be non-negative and p positive.
Eigen::MatrixXd PowerCompress(const Eigen::MatrixXd& mag, double p);

// Raw-buffer kernels shared with the differentiable graph ops. Spectra are
// laid out frame-major: index t * F + f.
namespace kernels {

void Analyze(std::span<const double> x, const StftConfig& cfg,
             std::span<double> re, std::span<double> im);
// Accumulates the adjoint of Analyze into gx.
void AnalyzeAdjoint(std::span<const double> gre, std::span<const double> gim,
                    const StftConfig& cfg, std::span<double> gx);

std::vector<double> Envelope(const StftConfig& cfg, int frames,
                             std::size_t out_len);
void Synthesize(std::span<const double> re, std::span<const double> im,
                int frames, const StftConfig& cfg, std::span<double> out);
// Accumulates the adjoint of Synthesize into gre / gim.
void SynthesizeAdjoint(std::span<const double> gout, int frames,
                       const StftConfig& cfg, std::span<double> gre,
                       std::span<double> gim);

// Largest output length a T-frame spectrogram can reconstruct.
std::size_t SupportLength(const StftConfig& cfg, int frames);

}  // namespace kernels
}  // namespace bsrnn::dsp

#endif  // BSRNN_DSP_STFT_H_
