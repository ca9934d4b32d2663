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


#ifndef BSRNN_MODEL_MODEL_H_
#define BSRNN_MODEL_MODEL_H_

#include <optional>
#include <string>
#include <vector>

#include "bsrnn/audio_io.h"
#include "bsrnn/dsp/stft.h"
#include "bsrnn/model/scheme.h"
#include "bsrnn/nn/graph.h"
#include "bsrnn/nn/params.h"
#include "json.hpp"

namespace bsrnn::model {

struct ModelConfig {
  dsp::StftConfig stft;
  BandSplitScheme scheme;
  int feature_dim = 96;  // N
  int num_blocks = 6;
  int hidden = 0;      // LSTM width; 0 means 2N
  int mlp_hidden = 0;  // mask MLP width; 0 means 4N
  bool causal = true;  // causal models use batch norm, offline layer norm
  bool personalized = false;
  int embedding_dim = 256;  // E
  double reset_period_s = 10.0;

  int lstm_hidden() const { return hidden > 0 ? hidden : 2 * feature_dim; }
  int mask_hidden() const { return mlp_hidden > 0 ? mlp_hidden : 4 * feature_dim; }
  nn::NormKind norm() const {
    return causal ? nn::NormKind::kBatch : nn::NormKind::kLayer;
  }
  // Frames between sequence-state resets; 0 disables resets.
  int reset_frames() const;

  // Full-band (48 kHz, N = 96) or wide-band (16 kHz, N = 128) defaults.
  static ModelConfig Default(int sample_rate = 48000, bool causal = true,
                             bool personalized = false);
  void Validate() const;

  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
  bool operator==(const ModelConfig& o) const { return ToJson() == o.ToJson(); }
};

// Sequence-level LSTM state carried across calls when streaming.
struct SequenceState {
  std::vector<nn::Var> h;  // per block, [Bsz * K, H]
  std::vector<nn::Var> c;
};

struct SpectrumPair {
  nn::Var re;  // [Bsz, T, F]
  nn::Var im;
};

// Band-split RNN. Spectra are frame-major tensors [Bsz, T, F]; subband
// features are laid out [K, Bsz * T, N] so band-level scans run over the
// leading axis.
class Model {
 public:
  explicit Model(ModelConfig cfg, uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Z = FC(Norm(interleaved re/im of each band)).
  nn::Var BandSplit(nn::Graph& g, const SpectrumPair& x, bool training);
  // Multiplicative gate FC(e) applied to every band and frame of z.
  nn::Var EnrollFuse(nn::Graph& g, const nn::Var& z, const nn::Var& embedding,
                     int64_t batch, int64_t frames);
  // Band-level modelling of block `block`, independently per frame.
  nn::Var BandLevel(nn::Graph& g, int block, const nn::Var& z, bool training);
  // Sequence-level modelling over time; `state` (optional) supplies the
  // initial LSTM state and receives the final one.
  nn::Var SequenceLevel(nn::Graph& g, int block, const nn::Var& z,
                        int64_t batch, int64_t frames, bool training,
                        int reset_every, SequenceState* state);
  // Mask and residual per bin from the last block output.
  std::pair<SpectrumPair, SpectrumPair> MaskEstimate(nn::Graph& g,
                                                     const nn::Var& q,
                                                     int64_t batch,
                                                     int64_t frames);

  // Full spectral forward: S_hat = M * X + R. `embedding` is [Bsz, E] for
  // personalized models and must be undefined otherwise.
  SpectrumPair Forward(nn::Graph& g, const SpectrumPair& x,
                       const nn::Var& embedding, bool training,
                       int reset_every = 0, SequenceState* state = nullptr);
  // Waveform forward for training, x [Bsz, L] -> [Bsz, L]. Samples past the
  // last full frame are zero.
  nn::Var ForwardWave(nn::Graph& g, const nn::Var& x, const nn::Var& embedding,
                      bool training);

  // Inference on a waveform with the framing used by the streaming engine,
  // so a causal model reproduces its streamed output sample for sample.
  Waveform Enhance(const Waveform& x,
                   const std::vector<float>* embedding = nullptr);

  // Hand-set mask parameters so that S_hat = X exactly.
  void SetIdentityMask();
  // Zero weight, unit bias on the enrollment projection.
  void SetIdentityEnrollment();

  SequenceState ZeroState(int64_t batch) const;

 private:
  struct BlockParams {
    nn::LstmWeights band_fwd, band_bwd, band_uni;
    nn::LinearParams band_fc_bi, band_fc_uni;
    nn::NormParams band_norm;
    nn::LstmWeights seq_fwd, seq_bwd;
    nn::LinearParams seq_fc;
    nn::NormParams seq_norm;
  };
  struct MaskParams {
    nn::LinearParams fc1, fc2;
  };

  nn::Var CheckEmbedding(const std::vector<float>* embedding) const;

  ModelConfig cfg_;
  nn::ParamStore params_;
  std::vector<nn::NormParams> split_norm_;
  std::vector<nn::LinearParams> split_fc_;
  std::vector<BlockParams> blocks_;
  std::vector<MaskParams> mask_;
  nn::LinearParams enroll_;
};

// Left padding (window - hop samples) used by Enhance and the stream.
int StreamLatency(const dsp::StftConfig& cfg);

}  // namespace bsrnn::model

#endif  // BSRNN_MODEL_MODEL_H_
