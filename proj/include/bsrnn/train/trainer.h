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


#ifndef BSRNN_TRAIN_TRAINER_H_
#define BSRNN_TRAIN_TRAINER_H_

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bsrnn/data/simulate.h"
#include "bsrnn/model/checkpoint.h"
#include "bsrnn/model/model.h"
#include "bsrnn/nn/optim.h"
#include "bsrnn/objectives/losses.h"
#include "json.hpp"

namespace bsrnn::train {

enum class Phase { kPretrainMr, kFinetuneMgd, kFinetuneMrsd };
const char* PhaseName(Phase p);
Phase ParsePhase(const std::string& s);

struct TrainConfig {
  Phase phase = Phase::kPretrainMr;
  double lr0 = 1e-3;
  double decay = 0.98;
  int64_t decay_every = 20000;
  double clip_norm = 5.0;
  int64_t max_iters = 400000;
  int64_t early_stop_window = 20000;
  int batch_size = 4;
  int64_t validation_every = 1000;
  int validation_size = 8;
  uint64_t seed = 0;
  std::string out_dir;  // checkpoints and log; empty disables both
  objectives::MetricGanConfig mgd;
  objectives::MrsdConfig mrsd;

  void Validate() const;
  nlohmann::json ToJson() const;
};

// lr0 * decay^floor(iter / decay_every).
double LrSchedule(int64_t iter, const TrainConfig& cfg = {});

struct Batch {
  nn::Var noisy;      // [B, L]
  nn::Var clean;      // [B, L]
  nn::Var embedding;  // [B, E] for personalized models, else undefined
};

class BatchSource {
 public:
  virtual ~BatchSource() = default;
  // Must depend only on `iter`, so that resumed runs see the same data.
  virtual Batch Get(int64_t iter) = 0;
};

// On-the-fly simulation; slot k of batch i uses seed (seed, i, k).
class SimulatedSource : public BatchSource {
 public:
  SimulatedSource(const data::Catalog* catalog, data::SimulationConfig sim,
                  bool personalized, int batch_size, uint64_t seed);
  Batch Get(int64_t iter) override;
  // A fixed held-out set drawn from a disjoint seed stream.
  std::vector<Batch> ValidationSet(int size) const;

 private:
  Batch Assemble(const std::vector<data::MixtureSpec>& specs) const;

  const data::Catalog* catalog_;
  data::SimulationConfig sim_;
  bool personalized_;
  int batch_size_;
  uint64_t seed_;
};

// The same batch at every iteration.
class FixedSource : public BatchSource {
 public:
  explicit FixedSource(Batch b) : batch_(std::move(b)) {}
  Batch Get(int64_t) override { return batch_; }

 private:
  Batch batch_;
};

Batch MakeBatch(const std::vector<Waveform>& noisy, const std::vector<Waveform>& clean,
                const std::vector<std::vector<float>>& embeddings = {});

// Lower is better.
using Validator = std::function<double(model::Model&)>;
// Mean L_MR of the model output over a fixed list of batches.
Validator MrValidator(std::vector<Batch> batches);

struct StepStats {
  int64_t iter = 0;  // iterations completed after this step
  double lr = 0.0;
  double loss = 0.0;          // generator objective
  double disc_loss = 0.0;     // GAN phases only
  double grad_norm = 0.0;     // pre-clip generator norm
  bool clipped = false;
  nlohmann::json losses = nlohmann::json::object();
  std::optional<double> val;
  // Gradient-flow audit: the generator step left discriminator gradients
  // untouched and the discriminator step left generator gradients untouched.
  bool disc_frozen_in_g_step = true;
  bool gen_frozen_in_d_step = true;
};

class Trainer {
 public:
  Trainer(model::Model* model, TrainConfig cfg, BatchSource* source,
          Validator validator = {});

  // Trains until max_iters or early stopping.
  void Run();
  // One iteration plus validation/checkpointing when due.
  StepStats Step();

  bool done() const;
  bool stopped_early() const { return stopped_early_; }
  int64_t iter() const { return iter_; }
  double best_val() const { return best_val_; }
  int64_t best_iter() const { return best_iter_; }
  const std::vector<StepStats>& history() const { return history_; }

  void set_log(std::ostream* log) { log_ = log; }
  void set_oracle(objectives::QualityOracle q) { oracle_ = std::move(q); }

  // Full resumable state: model, optimizer moments, discriminators and
  // counters.
  model::Checkpoint MakeCheckpoint() const;
  void Restore(const model::Checkpoint& ckpt);

  std::vector<objectives::ConvDiscriminator>& discriminators() { return discs_; }

 private:
  double GeneratorStep(const Batch& b, StepStats& st);
  void WriteCheckpoint(const std::string& name) const;
  void Abort(const std::string& why);

  model::Model* model_;
  TrainConfig cfg_;
  BatchSource* source_;
  Validator validator_;
  objectives::QualityOracle oracle_;
  nn::Adam adam_;
  std::vector<objectives::ConvDiscriminator> discs_;
  std::vector<std::unique_ptr<nn::Adam>> disc_adams_;
  std::vector<dsp::MelBank> mel_banks_;

  int64_t iter_ = 0;
  double best_val_ = 0.0;
  int64_t best_iter_ = -1;
  bool stopped_early_ = false;
  std::vector<StepStats> history_;
  std::ostream* log_ = nullptr;
  std::unique_ptr<std::ostream> log_file_;
};

// PSE model from a non-personalized checkpoint: every base tensor is
// copied and the enrollment gate starts at identity, so the first forward
// matches the base model for any embedding. `consumed` receives the copied
// tensor names.
std::unique_ptr<model::Model> WarmStartPse(const model::Checkpoint& base,
                                           const model::ModelConfig& pse_config,
                                           uint64_t seed = 0,
                                           std::vector<std::string>* consumed = nullptr);

}  // namespace bsrnn::train

#endif  // BSRNN_TRAIN_TRAINER_H_
