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

#include "bsrnn/model/model.h"

#include <cmath>

#include "bsrnn/error.h"

namespace bsrnn::model {

using nn::Graph;
using nn::Var;

int ModelConfig::reset_frames() const {
  if (reset_period_s <= 0.0) return 0;
  return static_cast<int>(std::lround(reset_period_s * stft.frames_per_second()));
}

ModelConfig ModelConfig::Default(int sample_rate, bool causal,
                                 bool personalized) {
  ModelConfig cfg;
  cfg.stft = dsp::StftConfig::ForRate(sample_rate);
  cfg.scheme = BandSplitScheme::ForRate(sample_rate);
  cfg.feature_dim = sample_rate == 48000 ? 96 : 128;
  cfg.causal = causal;
  cfg.personalized = personalized;
  return cfg;
}

void ModelConfig::Validate() const {
  stft.Validate();
  scheme.Validate(stft.num_bins());
  BSRNN_CHECK(feature_dim >= 1, ErrorKind::kConfig, "feature_dim must be >= 1");
  BSRNN_CHECK(num_blocks >= 0, ErrorKind::kConfig, "num_blocks must be >= 0");
  BSRNN_CHECK(hidden >= 0 && mlp_hidden >= 0, ErrorKind::kConfig,
              "hidden sizes must be >= 0");
  BSRNN_CHECK(!personalized || embedding_dim >= 1, ErrorKind::kConfig,
              "embedding_dim must be >= 1");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"sample_rate", stft.sample_rate},
          {"window_len", stft.window_len},
          {"hop_len", stft.hop_len},
          {"band_edges", scheme.edges},
          {"split_band", scheme.split_band},
          {"feature_dim", feature_dim},
          {"num_blocks", num_blocks},
          {"hidden", lstm_hidden()},
          {"mlp_hidden", mask_hidden()},
          {"causal", causal},
          {"personalized", personalized},
          {"embedding_dim", embedding_dim},
          {"reset_period_s", reset_period_s}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.stft.sample_rate = j.at("sample_rate").get<int>();
    cfg.stft.window_len = j.at("window_len").get<int>();
    cfg.stft.hop_len = j.at("hop_len").get<int>();
    cfg.scheme.edges = j.at("band_edges").get<std::vector<int>>();
    cfg.scheme.split_band = j.at("split_band").get<int>();
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.num_blocks = j.at("num_blocks").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.mlp_hidden = j.at("mlp_hidden").get<int>();
    cfg.causal = j.at("causal").get<bool>();
    cfg.personalized = j.at("personalized").get<bool>();
    cfg.embedding_dim = j.at("embedding_dim").get<int>();
    cfg.reset_period_s = j.at("reset_period_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("model config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

int StreamLatency(const dsp::StftConfig& cfg) {
  return cfg.window_len - cfg.hop_len;
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.Validate();
  Rng rng(seed);
  const int K = cfg_.scheme.num_bands();
  const int B = cfg_.scheme.split_band;
  const int64_t N = cfg_.feature_dim;
  const int64_t H = cfg_.lstm_hidden();
  const auto norm = cfg_.norm();
  for (int k = 0; k < K; ++k) {
    const std::string p = "split." + std::to_string(k);
    const int64_t w = 2 * cfg_.scheme.width(k);
    split_norm_.push_back(nn::AddNorm(params_, p + ".norm", norm, w));
    split_fc_.push_back(nn::AddLinear(params_, p + ".fc", w, N, rng));
  }
  for (int l = 0; l < cfg_.num_blocks; ++l) {
    const std::string p = "block." + std::to_string(l);
    BlockParams b;
    b.band_fwd = nn::AddLstm(params_, p + ".band.fwd", N, H, rng);
    b.band_bwd = nn::AddLstm(params_, p + ".band.bwd", N, H, rng);
    b.band_fc_bi = nn::AddLinear(params_, p + ".band.fc_bi", 2 * H, N, rng);
    if (B < K) {
      b.band_uni = nn::AddLstm(params_, p + ".band.uni", N, H, rng);
      b.band_fc_uni = nn::AddLinear(params_, p + ".band.fc_uni", H, N, rng);
    }
    b.band_norm = nn::AddNorm(params_, p + ".band.norm", norm, N);
    b.seq_fwd = nn::AddLstm(params_, p + ".seq.fwd", N, H, rng);
    if (!cfg_.causal) b.seq_bwd = nn::AddLstm(params_, p + ".seq.bwd", N, H, rng);
    b.seq_fc = nn::AddLinear(params_, p + ".seq.fc", cfg_.causal ? H : 2 * H, N, rng);
    b.seq_norm = nn::AddNorm(params_, p + ".seq.norm", norm, N);
    blocks_.push_back(std::move(b));
  }
  const int64_t M = cfg_.mask_hidden();
  for (int k = 0; k < K; ++k) {
    const std::string p = "mask." + std::to_string(k);
    MaskParams m;
    m.fc1 = nn::AddLinear(params_, p + ".fc1", N, M, rng);
    m.fc2 = nn::AddLinear(params_, p + ".fc2", M, 8 * cfg_.scheme.width(k), rng);
    mask_.push_back(m);
  }
  if (cfg_.personalized) {
    enroll_ = nn::AddLinear(params_, "enroll.fc", cfg_.embedding_dim, N, rng);
    SetIdentityEnrollment();
  }
}

Var Model::BandSplit(Graph& g, const SpectrumPair& x, bool training) {
  const int F = cfg_.scheme.num_bins();
  BSRNN_CHECK(x.re.rank() == 3 && x.re.dim(2) == F, ErrorKind::kScheme,
              "spectrum has " + std::to_string(x.re.rank() == 3 ? x.re.dim(2) : -1) +
                  " bins, scheme expects " + std::to_string(F));
  const int64_t bsz = x.re.dim(0), frames = x.re.dim(1);
  std::vector<Var> bands;
  for (int k = 0; k < cfg_.scheme.num_bands(); ++k) {
    const int b = cfg_.scheme.begin(k), w = cfg_.scheme.width(k);
    Var re = g.Reshape(g.Slice(x.re, 2, b, b + w), {bsz, frames, w, 1});
    Var im = g.Reshape(g.Slice(x.im, 2, b, b + w), {bsz, frames, w, 1});
    Var v = g.Reshape(g.Concat({re, im}, 3), {bsz * frames, 2 * w});
    v = nn::ApplyNorm(g, v, split_norm_[k], training);
    v = g.Linear(v, split_fc_[k].weight, split_fc_[k].bias);
    bands.push_back(g.Reshape(v, {1, bsz * frames, cfg_.feature_dim}));
  }
  return g.Concat(bands, 0);
}

Var Model::EnrollFuse(Graph& g, const Var& z, const Var& embedding,
                      int64_t batch, int64_t frames) {
  BSRNN_CHECK(embedding.rank() == 2 && embedding.dim(0) == batch &&
                  embedding.dim(1) == cfg_.embedding_dim,
              ErrorKind::kConfig,
              "embedding must be [" + std::to_string(batch) + ", " +
                  std::to_string(cfg_.embedding_dim) + "], got " +
                  nn::ShapeString(embedding.shape()));
  const int64_t K = cfg_.scheme.num_bands(), N = cfg_.feature_dim;
  Var gate = g.Linear(embedding, enroll_.weight, enroll_.bias);
  gate = g.BroadcastTo(g.Reshape(gate, {1, batch, 1, N}), {K, batch, frames, N});
  return g.Mul(z, g.Reshape(gate, {K, batch * frames, N}));
}

Var Model::BandLevel(Graph& g, int block, const Var& z, bool training) {
  BlockParams& p = blocks_.at(block);
  const int K = cfg_.scheme.num_bands();
  const int B = cfg_.scheme.split_band;
  Var low = B == K ? z : g.Slice(z, 0, 0, B);
  nn::LstmResult fwd = g.Lstm(low, Var(), Var(), p.band_fwd);
  nn::LstmResult bwd = g.Lstm(low, Var(), Var(), p.band_bwd, true);
  Var q = g.Linear(g.Concat({fwd.output, bwd.output}, 2), p.band_fc_bi.weight,
                   p.band_fc_bi.bias);
  if (B < K) {
    nn::LstmResult uni = g.Lstm(g.Slice(z, 0, B, K), fwd.h_final, fwd.c_final,
                                p.band_uni);
    Var q2 = g.Linear(uni.output, p.band_fc_uni.weight, p.band_fc_uni.bias);
    q = g.Concat({q, q2}, 0);
  }
  return nn::ApplyNorm(g, g.Add(z, q), p.band_norm, training);
}

Var Model::SequenceLevel(Graph& g, int block, const Var& z, int64_t batch,
                         int64_t frames, bool training, int reset_every,
                         SequenceState* state) {
  BlockParams& p = blocks_.at(block);
  const int64_t K = cfg_.scheme.num_bands(), N = cfg_.feature_dim;
  Var seq = g.Reshape(g.Permute(g.Reshape(z, {K, batch, frames, N}), {2, 1, 0, 3}),
                      {frames, batch * K, N});
  Var h0, c0;
  if (state != nullptr) {
    h0 = state->h.at(block);
    c0 = state->c.at(block);
  }
  nn::LstmResult fwd = g.Lstm(seq, h0, c0, p.seq_fwd, false, reset_every);
  if (state != nullptr) {
    state->h[block] = fwd.h_final;
    state->c[block] = fwd.c_final;
  }
  Var out = fwd.output;
  if (!cfg_.causal) {
    nn::LstmResult bwd = g.Lstm(seq, Var(), Var(), p.seq_bwd, true);
    out = g.Concat({out, bwd.output}, 2);
  }
  out = g.Linear(out, p.seq_fc.weight, p.seq_fc.bias);
  out = g.Reshape(g.Permute(g.Reshape(out, {frames, batch, K, N}), {2, 1, 0, 3}),
                  {K, batch * frames, N});
  return nn::ApplyNorm(g, g.Add(z, out), p.seq_norm, training);
}

std::pair<SpectrumPair, SpectrumPair> Model::MaskEstimate(Graph& g,
                                                          const Var& q,
                                                          int64_t batch,
                                                          int64_t frames) {
  const int64_t rows = batch * frames, N = cfg_.feature_dim;
  std::vector<Var> mre, mim, rre, rim;
  for (int k = 0; k < cfg_.scheme.num_bands(); ++k) {
    const int64_t w = cfg_.scheme.width(k);
    Var v = g.Reshape(g.Slice(q, 0, k, k + 1), {rows, N});
    v = g.Tanh(g.Linear(v, mask_[k].fc1.weight, mask_[k].fc1.bias));
    v = g.Glu(g.Linear(v, mask_[k].fc2.weight, mask_[k].fc2.bias));
    mre.push_back(g.Slice(v, 1, 0, w));
    mim.push_back(g.Slice(v, 1, w, 2 * w));
    rre.push_back(g.Slice(v, 1, 2 * w, 3 * w));
    rim.push_back(g.Slice(v, 1, 3 * w, 4 * w));
  }
  const int64_t F = cfg_.scheme.num_bins();
  auto join = [&](const std::vector<Var>& parts) {
    return g.Reshape(g.Concat(parts, 1), {batch, frames, F});
  };
  return {{join(mre), join(mim)}, {join(rre), join(rim)}};
}

SpectrumPair Model::Forward(Graph& g, const SpectrumPair& x,
                            const Var& embedding, bool training,
                            int reset_every, SequenceState* state) {
  const int64_t batch = x.re.dim(0), frames = x.re.dim(1);
  if (cfg_.personalized) {
    BSRNN_CHECK(embedding.defined(), ErrorKind::kUsage,
                "personalized model needs an enrollment embedding");
  } else {
    BSRNN_CHECK(!embedding.defined(), ErrorKind::kUsage,
                "model is not personalized but an embedding was given");
  }
  Var z = BandSplit(g, x, training);
  if (cfg_.personalized) z = EnrollFuse(g, z, embedding, batch, frames);
  for (int l = 0; l < cfg_.num_blocks; ++l) {
    z = BandLevel(g, l, z, training);
    z = SequenceLevel(g, l, z, batch, frames, training, reset_every, state);
  }
  auto [mask, res] = MaskEstimate(g, z, batch, frames);
  SpectrumPair out;
  out.re = g.Add(g.Sub(g.Mul(mask.re, x.re), g.Mul(mask.im, x.im)), res.re);
  out.im = g.Add(g.Add(g.Mul(mask.re, x.im), g.Mul(mask.im, x.re)), res.im);
  return out;
}

Var Model::ForwardWave(Graph& g, const Var& x, const Var& embedding,
                       bool training) {
  const int64_t batch = x.dim(0), len = x.dim(1);
  auto [re, im] = g.Stft(x, cfg_.stft);
  SpectrumPair y = Forward(g, {re, im}, embedding, training);
  const int frames = static_cast<int>(re.dim(1));
  const int64_t support =
      static_cast<int64_t>(dsp::kernels::SupportLength(cfg_.stft, frames));
  Var out = g.Istft(y.re, y.im, cfg_.stft, static_cast<std::size_t>(support));
  if (support < len) {
    out = g.Concat({out, Var::Zeros({batch, len - support})}, 1);
  }
  return out;
}

Var Model::CheckEmbedding(const std::vector<float>* embedding) const {
  if (!cfg_.personalized) {
    BSRNN_CHECK(embedding == nullptr, ErrorKind::kUsage,
                "model is not personalized but an embedding was given");
    return Var();
  }
  BSRNN_CHECK(embedding != nullptr, ErrorKind::kUsage,
              "personalized model needs an enrollment embedding");
  BSRNN_CHECK(static_cast<int>(embedding->size()) == cfg_.embedding_dim,
              ErrorKind::kConfig,
              "embedding has " + std::to_string(embedding->size()) +
                  " dims, model expects " + std::to_string(cfg_.embedding_dim));
  return Var::Constant({1, cfg_.embedding_dim},
                       std::vector<double>(embedding->begin(), embedding->end()));
}

Waveform Model::Enhance(const Waveform& x, const std::vector<float>* embedding) {
  BSRNN_CHECK(x.sample_rate == cfg_.stft.sample_rate, ErrorKind::kParameter,
              "input rate " + std::to_string(x.sample_rate) +
                  " does not match model rate " +
                  std::to_string(cfg_.stft.sample_rate));
  Var emb = CheckEmbedding(embedding);
  const int64_t len = static_cast<int64_t>(x.size());
  BSRNN_CHECK(len > 0, ErrorKind::kLength, "empty input");
  const int64_t lat = StreamLatency(cfg_.stft);
  const int64_t hop = cfg_.stft.hop_len;
  const int64_t frames = (lat + len - 1) / hop + 1;
  const int64_t padded_len = (frames - 1) * hop + cfg_.stft.window_len;
  std::vector<double> padded(padded_len, 0.0);
  for (int64_t i = 0; i < len; ++i) padded[lat + i] = x.samples[i];

  Graph g(false);
  auto [re, im] = g.Stft(Var::Constant({1, padded_len}, std::move(padded)), cfg_.stft);
  SpectrumPair y =
      Forward(g, {re, im}, emb, false, cfg_.causal ? cfg_.reset_frames() : 0);
  Var out = g.Istft(y.re, y.im, cfg_.stft, static_cast<std::size_t>(padded_len));
  Waveform w;
  w.sample_rate = x.sample_rate;
  w.samples.resize(len);
  for (int64_t i = 0; i < len; ++i) {
    w.samples[i] = static_cast<float>(out.value()[lat + i]);
  }
  return w;
}

void Model::SetIdentityMask() {
  for (int k = 0; k < cfg_.scheme.num_bands(); ++k) {
    const int64_t w = cfg_.scheme.width(k);
    auto wt = mask_[k].fc2.weight.mutable_value();
    std::fill(wt.begin(), wt.end(), 0.0);
    auto b = mask_[k].fc2.bias.mutable_value();
    std::fill(b.begin(), b.end(), 0.0);
    // GLU value half carries [mask_re | mask_im | res_re | res_im]; with a
    // zero gate input sigmoid(0) = 0.5 exactly, so 2 * 0.5 = 1.
    for (int64_t j = 0; j < w; ++j) b[j] = 2.0;
  }
}

void Model::SetIdentityEnrollment() {
  if (!cfg_.personalized) return;
  auto w = enroll_.weight.mutable_value();
  std::fill(w.begin(), w.end(), 0.0);
  auto b = enroll_.bias.mutable_value();
  std::fill(b.begin(), b.end(), 1.0);
}

SequenceState Model::ZeroState(int64_t batch) const {
  SequenceState s;
  const int64_t rows = batch * cfg_.scheme.num_bands();
  for (int l = 0; l < cfg_.num_blocks; ++l) {
    s.h.push_back(Var::Zeros({rows, cfg_.lstm_hidden()}));
    s.c.push_back(Var::Zeros({rows, cfg_.lstm_hidden()}));
  }
  return s;
}

}  // namespace bsrnn::model
