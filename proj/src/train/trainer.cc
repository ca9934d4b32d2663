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

#include "bsrnn/train/trainer.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bsrnn/error.h"
#include "bsrnn/random.h"

namespace bsrnn::train {

using nn::Graph;
using nn::Var;

const char* PhaseName(Phase p) {
  switch (p) {
    case Phase::kPretrainMr: return "pretrain_mr";
    case Phase::kFinetuneMgd: return "finetune_mgd";
    case Phase::kFinetuneMrsd: return "finetune_mrsd";
  }
  return "?";
}

Phase ParsePhase(const std::string& s) {
  for (Phase p : {Phase::kPretrainMr, Phase::kFinetuneMgd, Phase::kFinetuneMrsd}) {
    if (s == PhaseName(p)) return p;
  }
  throw Error(ErrorKind::kConfig, "unknown training phase '" + s + "'");
}

void TrainConfig::Validate() const {
  BSRNN_CHECK(lr0 > 0.0 && std::isfinite(lr0), ErrorKind::kConfig, "lr0 must be positive");
  BSRNN_CHECK(decay > 0.0 && decay <= 1.0, ErrorKind::kConfig, "decay must be in (0, 1]");
  BSRNN_CHECK(decay_every > 0, ErrorKind::kConfig, "decay_every must be positive");
  BSRNN_CHECK(clip_norm > 0.0, ErrorKind::kConfig, "clip_norm must be positive");
  BSRNN_CHECK(max_iters >= 0, ErrorKind::kConfig, "max_iters must be non-negative");
  BSRNN_CHECK(early_stop_window > 0, ErrorKind::kConfig,
              "early_stop_window must be positive");
  BSRNN_CHECK(batch_size > 0, ErrorKind::kConfig, "batch_size must be positive");
  BSRNN_CHECK(validation_every > 0, ErrorKind::kConfig,
              "validation_every must be positive");
  BSRNN_CHECK(validation_size > 0, ErrorKind::kConfig, "validation_size must be positive");
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"phase", PhaseName(phase)},
          {"lr0", lr0},
          {"decay", decay},
          {"decay_every", decay_every},
          {"clip_norm", clip_norm},
          {"max_iters", max_iters},
          {"early_stop_window", early_stop_window},
          {"batch_size", batch_size},
          {"validation_every", validation_every},
          {"validation_size", validation_size},
          {"seed", seed},
          {"lambda1", mgd.lambdas.l1},
          {"lambda2", mgd.lambdas.l2},
          {"lambda3", mgd.lambdas.l3},
          {"multi_resolution", mgd.multi_resolution}};
}

double LrSchedule(int64_t iter, const TrainConfig& cfg) {
  BSRNN_CHECK(iter >= 0, ErrorKind::kParameter, "iteration must be non-negative");
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(iter / cfg.decay_every));
}

Batch MakeBatch(const std::vector<Waveform>& noisy, const std::vector<Waveform>& clean,
                const std::vector<std::vector<float>>& embeddings) {
  BSRNN_CHECK(!noisy.empty() && noisy.size() == clean.size(), ErrorKind::kParameter,
              "batch needs matching noisy and clean lists");
  const std::size_t len = noisy[0].size();
  std::vector<double> x, s;
  for (std::size_t b = 0; b < noisy.size(); ++b) {
    BSRNN_CHECK(noisy[b].size() == len && clean[b].size() == len, ErrorKind::kParameter,
                "batch items must share one length");
    x.insert(x.end(), noisy[b].samples.begin(), noisy[b].samples.end());
    s.insert(s.end(), clean[b].samples.begin(), clean[b].samples.end());
  }
  const int64_t nb = static_cast<int64_t>(noisy.size());
  Batch out{Var::Constant({nb, static_cast<int64_t>(len)}, std::move(x)),
            Var::Constant({nb, static_cast<int64_t>(len)}, std::move(s)), Var()};
  if (!embeddings.empty()) {
    BSRNN_CHECK(embeddings.size() == noisy.size(), ErrorKind::kParameter,
                "one embedding per batch item");
    std::vector<double> e;
    for (const auto& v : embeddings) {
      BSRNN_CHECK(!v.empty() && v.size() == embeddings[0].size(), ErrorKind::kConfig,
                  "personalized batch needs equal-size embeddings");
      e.insert(e.end(), v.begin(), v.end());
    }
    out.embedding = Var::Constant({nb, static_cast<int64_t>(embeddings[0].size())},
                                  std::move(e));
  }
  return out;
}

SimulatedSource::SimulatedSource(const data::Catalog* catalog, data::SimulationConfig sim,
                                 bool personalized, int batch_size, uint64_t seed)
    : catalog_(catalog),
      sim_(std::move(sim)),
      personalized_(personalized),
      batch_size_(batch_size),
      seed_(seed) {
  sim_.Validate();
  BSRNN_CHECK(batch_size > 0, ErrorKind::kConfig, "batch_size must be positive");
}

Batch SimulatedSource::Assemble(const std::vector<data::MixtureSpec>& specs) const {
  std::vector<Waveform> noisy, clean;
  std::vector<std::vector<float>> emb;
  for (const auto& s : specs) {
    noisy.push_back(s.mixture);
    clean.push_back(s.target);
    if (personalized_) {
      BSRNN_CHECK(!s.embedding.empty(), ErrorKind::kSimulation,
                  "personalized training needs speaker embeddings in the catalog");
      emb.push_back(s.embedding);
    }
  }
  return MakeBatch(noisy, clean, emb);
}

Batch SimulatedSource::Get(int64_t iter) {
  std::vector<data::MixtureSpec> specs;
  for (int k = 0; k < batch_size_; ++k) {
    Rng rng(DeriveSeed(seed_, static_cast<uint64_t>(iter), static_cast<uint64_t>(k)));
    specs.push_back(data::SimulateExample(*catalog_, sim_, personalized_, rng));
  }
  return Assemble(specs);
}

std::vector<Batch> SimulatedSource::ValidationSet(int size) const {
  std::vector<Batch> out;
  std::vector<data::MixtureSpec> specs;
  for (int k = 0; k < size; ++k) {
    Rng rng(DeriveSeed(seed_, ~uint64_t{0}, static_cast<uint64_t>(k), 1));
    specs.push_back(data::SimulateExample(*catalog_, sim_, personalized_, rng));
    if (static_cast<int>(specs.size()) == batch_size_ || k + 1 == size) {
      out.push_back(Assemble(specs));
      specs.clear();
    }
  }
  return out;
}

Validator MrValidator(std::vector<Batch> batches) {
  return [batches = std::move(batches)](model::Model& m) {
    double total = 0.0;
    for (const Batch& b : batches) {
      Graph g(false);
      Var est = m.ForwardWave(g, b.noisy, b.embedding, false);
      total += objectives::MrLoss(g, b.clean, est, m.config().stft.sample_rate).item();
    }
    return total / batches.size();
  };
}

namespace {

bool AnyNonzeroGrad(const nn::ParamStore& p) {
  for (const auto& name : p.names()) {
    for (double g : p.Get(name).grad()) {
      if (g != 0.0) return true;
    }
  }
  return false;
}

Waveform Row(const Var& v, int64_t b, int rate) {
  const int64_t len = v.dim(1);
  auto row = v.value().subspan(b * len, len);
  return Waveform(std::vector<float>(row.begin(), row.end()), rate);
}

std::pair<Var, Var> Spectrum(Graph& g, const Var& wave, const dsp::StftConfig& st) {
  return g.Stft(wave, st);
}

constexpr const char* kMomentM = "adam.m/";
constexpr const char* kMomentV = "adam.v/";

}  // namespace

Trainer::Trainer(model::Model* model, TrainConfig cfg, BatchSource* source,
                 Validator validator)
    : model_(model),
      cfg_(std::move(cfg)),
      source_(source),
      validator_(std::move(validator)),
      oracle_(objectives::Clamped(objectives::ProxyOracle())),
      adam_(&model->params()) {
  cfg_.Validate();
  const uint64_t dseed = DeriveSeed(cfg_.seed, 0xD15C);
  if (cfg_.phase == Phase::kFinetuneMgd) {
    discs_.push_back(objectives::MakeMgdDiscriminator(dseed));
  } else if (cfg_.phase == Phase::kFinetuneMrsd) {
    for (std::size_t k = 0; k < cfg_.mrsd.windows_ms.size(); ++k) {
      discs_.push_back(objectives::MakeMrsdDiscriminator(
          DeriveSeed(dseed, k), "disc.mrsd." + std::to_string(k)));
    }
    mel_banks_ = objectives::BuildMelBanks(model_->config().stft, cfg_.mrsd.mel_banks);
  }
  for (auto& d : discs_) disc_adams_.push_back(std::make_unique<nn::Adam>(d.params()));
  if (!cfg_.out_dir.empty()) {
    std::filesystem::create_directories(cfg_.out_dir);
    log_file_ = std::make_unique<std::ofstream>(
        std::filesystem::path(cfg_.out_dir) / "train_log.jsonl", std::ios::app);
    log_ = log_file_.get();
  }
}

bool Trainer::done() const { return stopped_early_ || iter_ >= cfg_.max_iters; }

void Trainer::Run() {
  while (!done()) Step();
}

void Trainer::Abort(const std::string& why) {
  if (!cfg_.out_dir.empty()) WriteCheckpoint("diagnostic.bsrnn");
  throw Error(ErrorKind::kTraining, "iteration " + std::to_string(iter_) + ": " + why);
}

void Trainer::WriteCheckpoint(const std::string& name) const {
  model::SaveCheckpoint((std::filesystem::path(cfg_.out_dir) / name).string(),
                        MakeCheckpoint());
}

double Trainer::GeneratorStep(const Batch& b, StepStats& st) {
  const auto& mcfg = model_->config();
  const int rate = mcfg.stft.sample_rate;
  model_->params().ZeroGrad();
  Graph g;
  Var est = model_->ForwardWave(g, b.noisy, b.embedding, true);

  std::vector<double> q_hat, q_x;
  if (cfg_.phase != Phase::kPretrainMr) {
    // Discriminator step on the detached estimate.
    const Var est_c = Var::Constant(est.shape(), {est.value().begin(), est.value().end()});
    for (auto& d : discs_) {
      d.params()->SetRequiresGrad(true);
      d.params()->ZeroGrad();
    }
    Graph gd;
    Var ld;
    if (cfg_.phase == Phase::kFinetuneMgd) {
      for (int64_t i = 0; i < b.clean.dim(0); ++i) {
        const Waveform s = Row(b.clean, i, rate);
        q_hat.push_back(oracle_(Row(est_c, i, rate), s));
        q_x.push_back(oracle_(Row(b.noisy, i, rate), s));
      }
      auto [xr, xi] = Spectrum(gd, b.noisy, mcfg.stft);
      auto [sr, si] = Spectrum(gd, b.clean, mcfg.stft);
      auto [er, ei] = Spectrum(gd, est_c, mcfg.stft);
      ld = objectives::MgdLosses(gd, {xr, xi}, {sr, si}, {er, ei}, discs_[0], q_hat, q_x,
                                 cfg_.mgd.p)
               .discriminator;
    } else {
      std::vector<objectives::Discriminator*> ptrs;
      for (auto& d : discs_) ptrs.push_back(&d);
      ld = objectives::ComputeMrsdLosses(gd, b.clean, est_c, mcfg.stft, mel_banks_, ptrs,
                                         cfg_.mrsd)
               .discriminator;
    }
    if (!std::isfinite(ld.item())) Abort("non-finite discriminator loss");
    gd.Backward(ld);
    st.gen_frozen_in_d_step = !AnyNonzeroGrad(model_->params());
    try {
      for (std::size_t k = 0; k < discs_.size(); ++k) {
        nn::ClipGradNorm(*discs_[k].params(), cfg_.clip_norm);
        disc_adams_[k]->Step(st.lr);
      }
    } catch (const Error& e) {
      Abort(e.what());
    }
    st.disc_loss = ld.item();
    st.losses["disc"] = st.disc_loss;
    for (auto& d : discs_) {
      d.params()->ZeroGrad();
      d.params()->SetRequiresGrad(false);
    }
  }

  Var loss;
  switch (cfg_.phase) {
    case Phase::kPretrainMr:
      loss = objectives::MrLoss(g, b.clean, est, rate);
      st.losses["mr"] = loss.item();
      break;
    case Phase::kFinetuneMgd: {
      objectives::MrLossConfig mr = cfg_.mgd.mr;
      mr.p = cfg_.mgd.p;
      if (!cfg_.mgd.multi_resolution) {
        mr.windows_ms = {1000.0 * mcfg.stft.window_len / rate};
      }
      auto terms = objectives::MrLossTerms(g, b.clean, est, rate, mr);
      auto [xr, xi] = Spectrum(g, b.noisy, mcfg.stft);
      auto [sr, si] = Spectrum(g, b.clean, mcfg.stft);
      auto [er, ei] = Spectrum(g, est, mcfg.stft);
      auto adv = objectives::MgdLosses(g, {xr, xi}, {sr, si}, {er, ei}, discs_[0], q_hat,
                                       q_x, cfg_.mgd.p);
      loss = objectives::CombinedObjective(g, terms.magnitude, terms.complex,
                                           adv.generator, cfg_.mgd.lambdas);
      st.losses["l_p"] = terms.magnitude.item();
      st.losses["l_s"] = terms.complex.item();
      st.losses["l_g"] = adv.generator.item();
      break;
    }
    case Phase::kFinetuneMrsd: {
      std::vector<objectives::Discriminator*> ptrs;
      for (auto& d : discs_) ptrs.push_back(&d);
      auto l = objectives::ComputeMrsdLosses(g, b.clean, est, mcfg.stft, mel_banks_, ptrs,
                                             cfg_.mrsd);
      loss = l.generator;
      st.losses["adv"] = l.adversarial.item();
      st.losses["mr"] = l.mr.item();
      st.losses["mel"] = l.mel.item();
      break;
    }
  }
  if (!std::isfinite(loss.item())) Abort("non-finite loss");
  g.Backward(loss);
  for (auto& d : discs_) {
    if (AnyNonzeroGrad(*d.params())) st.disc_frozen_in_g_step = false;
  }
  try {
    st.grad_norm = nn::ClipGradNorm(model_->params(), cfg_.clip_norm);
    st.clipped = st.grad_norm > cfg_.clip_norm;
    adam_.Step(st.lr);
  } catch (const Error& e) {
    Abort(e.what());
  }
  // Keep running statistics representable in a float checkpoint.
  for (const auto& name : model_->params().names()) {
    if (model_->params().trainable(name)) continue;
    for (double& v : model_->params().Get(name).mutable_value()) v = static_cast<float>(v);
  }
  return loss.item();
}

StepStats Trainer::Step() {
  BSRNN_CHECK(!done(), ErrorKind::kUsage, "training already finished");
  StepStats st;
  st.lr = LrSchedule(iter_, cfg_);
  const Batch b = source_->Get(iter_);
  st.loss = GeneratorStep(b, st);
  ++iter_;
  st.iter = iter_;
  if (validator_ && iter_ % cfg_.validation_every == 0) {
    const double v = validator_(*model_);
    st.val = v;
    const bool improved = best_iter_ < 0 || v < best_val_;
    if (improved) {
      best_val_ = v;
      best_iter_ = iter_;
    }
    if (!cfg_.out_dir.empty()) {
      WriteCheckpoint("ckpt_" + std::to_string(iter_) + ".bsrnn");
      if (improved) WriteCheckpoint("best.bsrnn");
    }
  }
  if (validator_ && best_iter_ >= 0 && iter_ - best_iter_ >= cfg_.early_stop_window) {
    stopped_early_ = true;
  }
  if (log_) {
    nlohmann::json j = {{"iter", st.iter}, {"phase", PhaseName(cfg_.phase)},
                        {"lr", st.lr},     {"losses", st.losses},
                        {"grad_norm", st.grad_norm}, {"clipped", st.clipped}};
    j["val"] = st.val ? nlohmann::json(*st.val) : nlohmann::json(nullptr);
    *log_ << j.dump() << "\n";
    log_->flush();
  }
  if (iter_ == cfg_.max_iters && !cfg_.out_dir.empty()) WriteCheckpoint("last.bsrnn");
  history_.push_back(st);
  return st;
}

namespace {

void PutMoments(model::Checkpoint& c, const nn::ParamStore& params, const nn::Adam& adam) {
  for (const auto& [name, m] : adam.first_moment()) {
    const auto& shape = params.Get(name).shape();
    c.Put({kMomentM + name, shape, std::vector<float>(m.begin(), m.end())});
    const auto& v = adam.second_moment().at(name);
    c.Put({kMomentV + name, shape, std::vector<float>(v.begin(), v.end())});
  }
}

void TakeMoments(const model::Checkpoint& c, const nn::ParamStore& params, nn::Adam& adam) {
  adam.first_moment().clear();
  adam.second_moment().clear();
  for (const auto& name : params.trainable_names()) {
    const auto* m = c.Find(kMomentM + name);
    const auto* v = c.Find(kMomentV + name);
    if (m == nullptr && v == nullptr) continue;
    const auto n = static_cast<std::size_t>(params.Get(name).numel());
    BSRNN_CHECK(m && v && m->data.size() == n && v->data.size() == n,
                ErrorKind::kCheckpoint, "incomplete optimizer state for " + name);
    adam.first_moment()[name].assign(m->data.begin(), m->data.end());
    adam.second_moment()[name].assign(v->data.begin(), v->data.end());
  }
}

}  // namespace

model::Checkpoint Trainer::MakeCheckpoint() const {
  model::Checkpoint c = model::CheckpointFromModel(*model_);
  PutMoments(c, model_->params(), adam_);
  nlohmann::json disc_steps = nlohmann::json::array();
  for (std::size_t k = 0; k < discs_.size(); ++k) {
    auto& d = const_cast<objectives::ConvDiscriminator&>(discs_[k]);
    for (const auto& name : d.params()->names()) c.Put(name, d.params()->Get(name));
    PutMoments(c, *d.params(), *disc_adams_[k]);
    disc_steps.push_back(disc_adams_[k]->step_count());
  }
  c.meta["train"] = {{"iter", iter_},
                     {"best_val", best_val_},
                     {"best_iter", best_iter_},
                     {"stopped_early", stopped_early_},
                     {"adam_step", adam_.step_count()},
                     {"disc_adam_steps", disc_steps},
                     {"config", cfg_.ToJson()}};
  return c;
}

void Trainer::Restore(const model::Checkpoint& ckpt) {
  BSRNN_CHECK(ckpt.meta.contains("train"), ErrorKind::kCheckpoint,
              "checkpoint has no training state");
  const auto& t = ckpt.meta.at("train");
  try {
    BSRNN_CHECK(t.at("config").at("phase") == PhaseName(cfg_.phase), ErrorKind::kCheckpoint,
                "checkpoint was written by phase " +
                    t.at("config").at("phase").get<std::string>());
    BSRNN_CHECK(model::ModelConfig::FromJson(ckpt.meta.at("model")) == model_->config(),
                ErrorKind::kCheckpoint, "checkpoint model config differs");
    model::LoadModelTensors(*model_, ckpt);
    TakeMoments(ckpt, model_->params(), adam_);
    adam_.set_step_count(t.at("adam_step").get<int64_t>());
    const auto& steps = t.at("disc_adam_steps");
    BSRNN_CHECK(steps.size() == discs_.size(), ErrorKind::kCheckpoint,
                "discriminator count differs");
    for (std::size_t k = 0; k < discs_.size(); ++k) {
      auto* p = discs_[k].params();
      for (const auto& name : p->names()) {
        const auto* nt = ckpt.Find(name);
        BSRNN_CHECK(nt != nullptr && nt->shape == p->Get(name).shape(),
                    ErrorKind::kCheckpoint, "missing discriminator tensor " + name);
        std::copy(nt->data.begin(), nt->data.end(), p->Get(name).mutable_value().begin());
      }
      TakeMoments(ckpt, *p, *disc_adams_[k]);
      disc_adams_[k]->set_step_count(steps[k].get<int64_t>());
    }
    iter_ = t.at("iter").get<int64_t>();
    best_val_ = t.at("best_val").get<double>();
    best_iter_ = t.at("best_iter").get<int64_t>();
    stopped_early_ = t.at("stopped_early").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kCheckpoint, std::string("bad training state: ") + e.what());
  }
}

std::unique_ptr<model::Model> WarmStartPse(const model::Checkpoint& base,
                                           const model::ModelConfig& pse_config,
                                           uint64_t seed,
                                           std::vector<std::string>* consumed) {
  BSRNN_CHECK(base.meta.contains("model"), ErrorKind::kCheckpoint,
              "base checkpoint has no model config");
  nlohmann::json bj = base.meta.at("model");
  nlohmann::json pj = pse_config.ToJson();
  BSRNN_CHECK(!bj.value("personalized", false), ErrorKind::kCheckpoint,
              "warm start needs a non-personalized base");
  BSRNN_CHECK(pse_config.personalized, ErrorKind::kCheckpoint,
              "warm start target must be personalized");
  for (const char* key : {"personalized", "embedding_dim"}) {
    bj.erase(key);
    pj.erase(key);
  }
  BSRNN_CHECK(bj == pj, ErrorKind::kCheckpoint,
              "base and personalized configs differ outside the enrollment module");
  auto m = std::make_unique<model::Model>(pse_config, seed);
  std::vector<std::string> used;
  for (const auto& t : base.tensors) {
    if (t.name.rfind("adam.", 0) == 0 || t.name.rfind("disc.", 0) == 0) continue;
    BSRNN_CHECK(m->params().Has(t.name), ErrorKind::kCheckpoint,
                "base tensor " + t.name + " has no counterpart");
    Var v = m->params().Get(t.name);
    BSRNN_CHECK(v.shape() == t.shape, ErrorKind::kCheckpoint, "shape mismatch for " + t.name);
    BSRNN_CHECK(std::find(used.begin(), used.end(), t.name) == used.end(),
                ErrorKind::kCheckpoint, "duplicate tensor " + t.name);
    std::copy(t.data.begin(), t.data.end(), v.mutable_value().begin());
    used.push_back(t.name);
  }
  for (const auto& name : m->params().names()) {
    if (std::find(used.begin(), used.end(), name) != used.end()) continue;
    BSRNN_CHECK(name.rfind("enroll.", 0) == 0, ErrorKind::kCheckpoint,
                "base checkpoint lacks tensor " + name);
  }
  m->SetIdentityEnrollment();
  if (consumed) *consumed = std::move(used);
  return m;
}

}  // namespace bsrnn::train
