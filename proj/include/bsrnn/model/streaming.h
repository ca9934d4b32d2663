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


#ifndef BSRNN_MODEL_STREAMING_H_
#define BSRNN_MODEL_STREAMING_H_

#include <span>
#include <vector>

#include "bsrnn/model/model.h"

namespace bsrnn::model {

// Frame-by-frame causal enhancement. Every hop of input completes one STFT
// frame, which is enhanced and overlap-added; output lags input by
// window - hop samples. Sequence LSTM state is zeroed every
// reset_period_s of frames.
class StreamingEnhancer {
 public:
  StreamingEnhancer(Model& model, const std::vector<float>* embedding = nullptr);

  // Returns one hop of output per completed input hop.
  std::vector<float> Push(std::span<const float> samples);
  // Ends the stream, returning the trailing latency() samples (plus any
  // partial hop still buffered).
  std::vector<float> Flush();
  // Replaces the initial zero history with the given latency() samples.
  // Only valid before the first Push.
  void Prime(std::span<const float> history);
  void ResetState();

  int latency() const { return latency_; }
  int64_t frames_processed() const { return frames_; }
  int64_t samples_in() const { return samples_in_; }

 private:
  void ProcessFrame(std::vector<float>& out);

  Model& model_;
  nn::Var embedding_;
  dsp::StftConfig cfg_;
  int latency_;
  int reset_frames_;
  std::vector<double> window_;
  std::vector<double> envelope_;  // steady-state squared-window sum per hop slot
  std::vector<double> input_;     // analysis buffer
  std::vector<double> ola_;       // overlap-add accumulator, window_len long
  std::vector<float> pending_;
  SequenceState state_;
  int64_t frames_ = 0;
  int64_t frames_since_reset_ = 0;
  int64_t samples_in_ = 0;
  int64_t samples_out_ = 0;
};

}  // namespace bsrnn::model

#endif  // BSRNN_MODEL_STREAMING_H_
