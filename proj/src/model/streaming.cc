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

#include "bsrnn/model/streaming.h"

#include <complex>

#include "bsrnn/dsp/fft.h"
#include "bsrnn/error.h"

namespace bsrnn::model {

namespace {
constexpr double kEnvelopeFloor = 1e-10;
}  // namespace

StreamingEnhancer::StreamingEnhancer(Model& model,
                                     const std::vector<float>* embedding)
    : model_(model), cfg_(model.config().stft) {
  BSRNN_CHECK(model.config().causal, ErrorKind::kUsage,
              "streaming needs a causal checkpoint");
  const bool personalized = model.config().personalized;
  BSRNN_CHECK(personalized == (embedding != nullptr), ErrorKind::kUsage,
              personalized ? "personalized model needs an enrollment embedding"
                           : "model is not personalized but an embedding was given");
  if (embedding != nullptr) {
    BSRNN_CHECK(static_cast<int>(embedding->size()) == model.config().embedding_dim,
                ErrorKind::kConfig, "embedding dimension mismatch");
    embedding_ = nn::Var::Constant(
        {1, static_cast<int64_t>(embedding->size())},
        std::vector<double>(embedding->begin(), embedding->end()));
  }
  latency_ = StreamLatency(cfg_);
  reset_frames_ = model.config().reset_frames();
  window_ = dsp::HannWindow(cfg_.window_len);
  envelope_.assign(cfg_.hop_len, 0.0);
  for (int i = 0; i < cfg_.hop_len; ++i) {
    for (int j = i; j < cfg_.window_len; j += cfg_.hop_len) {
      envelope_[i] += window_[j] * window_[j];
    }
  }
  input_.assign(latency_, 0.0);
  ola_.assign(cfg_.window_len, 0.0);
  state_ = model.ZeroState(1);
}

void StreamingEnhancer::Prime(std::span<const float> history) {
  BSRNN_CHECK(frames_ == 0 && pending_.empty(), ErrorKind::kUsage,
              "prime is only valid before the first push");
  BSRNN_CHECK(static_cast<int>(history.size()) == latency_, ErrorKind::kLength,
              "history must hold exactly " + std::to_string(latency_) + " samples");
  input_.assign(history.begin(), history.end());
}

void StreamingEnhancer::ResetState() {
  state_ = model_.ZeroState(1);
  frames_since_reset_ = 0;
}

void StreamingEnhancer::ProcessFrame(std::vector<float>& out) {
  const int n = cfg_.window_len, hop = cfg_.hop_len, bins = cfg_.num_bins();
  if (reset_frames_ > 0 && frames_since_reset_ == reset_frames_) ResetState();

  std::vector<double> re(bins), im(bins);
  dsp::kernels::Analyze(input_, cfg_, re, im);
  nn::Graph g(false);
  SpectrumPair y = model_.Forward(
      g, {nn::Var::Constant({1, 1, bins}, std::move(re)),
          nn::Var::Constant({1, 1, bins}, std::move(im))},
      embedding_, false, 0, &state_);

  std::vector<std::complex<double>> spec(bins);
  for (int f = 0; f < bins; ++f) spec[f] = {y.re.value()[f], y.im.value()[f]};
  std::vector<double> frame(n);
  dsp::RealFft::Get(n).Inverse(spec.data(), frame.data());
  for (int i = 0; i < n; ++i) ola_[i] += frame[i] * window_[i] / n;

  for (int i = 0; i < hop; ++i) {
    out.push_back(envelope_[i] > kEnvelopeFloor
                      ? static_cast<float>(ola_[i] / envelope_[i])
                      : 0.0f);
  }
  std::copy(ola_.begin() + hop, ola_.end(), ola_.begin());
  std::fill(ola_.end() - hop, ola_.end(), 0.0);
  input_.erase(input_.begin(), input_.begin() + hop);
  ++frames_;
  ++frames_since_reset_;
}

std::vector<float> StreamingEnhancer::Push(std::span<const float> samples) {
  std::vector<float> out;
  samples_in_ += static_cast<int64_t>(samples.size());
  pending_.insert(pending_.end(), samples.begin(), samples.end());
  const std::size_t hop = cfg_.hop_len;
  std::size_t used = 0;
  while (pending_.size() - used >= hop) {
    input_.insert(input_.end(), pending_.begin() + used,
                  pending_.begin() + used + hop);
    used += hop;
    ProcessFrame(out);
  }
  pending_.erase(pending_.begin(), pending_.begin() + used);
  samples_out_ += static_cast<int64_t>(out.size());
  return out;
}

std::vector<float> StreamingEnhancer::Flush() {
  std::vector<float> out;
  const int64_t target = samples_in_ + latency_;
  const std::size_t hop = cfg_.hop_len;
  pending_.resize(((pending_.size() + hop - 1) / hop) * hop, 0.0f);
  while (samples_out_ + static_cast<int64_t>(out.size()) < target) {
    if (pending_.size() < hop) pending_.resize(hop, 0.0f);
    input_.insert(input_.end(), pending_.begin(), pending_.begin() + hop);
    pending_.erase(pending_.begin(), pending_.begin() + hop);
    ProcessFrame(out);
  }
  out.resize(target - samples_out_);
  samples_out_ = target;
  pending_.clear();
  return out;
}

}  // namespace bsrnn::model
