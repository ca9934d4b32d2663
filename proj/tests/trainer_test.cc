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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "bsrnn/error.h"
#include "bsrnn/model/checkpoint.h"
#include "bsrnn/train/trainer.h"
#include "doctest.h"
#include "test_util.h"
#include "toy.h"

using namespace bsrnn;
using namespace bsrnn::train;
using nn::Var;

namespace {

constexpr int kRate = 16000;

std::filesystem::path TempDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bsrnn_train_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Harmonic "speech" plus white noise, one second.
Batch OverfitExample() {
  std::vector<float> clean(kRate), noisy(kRate);
  const auto n = testing::WhiteNoise(kRate, 9, 0.1);
  for (int i = 0; i < kRate; ++i) {
    const double t = static_cast<double>(i) / kRate;
    const double env = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * 3 * t);
    clean[i] = static_cast<float>(
        env * (0.3 * std::sin(2 * std::numbers::pi * 220 * t) +
               0.15 * std::sin(2 * std::numbers::pi * 660 * t)));
    noisy[i] = clean[i] + n[i];
  }
  return MakeBatch({Waveform(noisy, kRate)}, {Waveform(clean, kRate)});
}

data::Catalog ToyCatalog(bool embeddings) {
  data::Catalog c;
  for (int k = 0; k < 3; ++k) {
    std::vector<float> e(16, 0.1f);
    e[k] = 1.0f;
    c.Add(data::SourceKind::kSpeech, Waveform(testing::WhiteNoise(5000, 1 + k, 0.3), kRate),
          "spk" + std::to_string(k % 2), embeddings ? e : std::vector<float>{});
  }
  c.Add(data::SourceKind::kNoise, Waveform(testing::WhiteNoise(3000, 7, 0.2), kRate));
  c.Add(data::SourceKind::kInterferer, Waveform(testing::WhiteNoise(3000, 8, 0.2), kRate));
  std::vector<float> rir(200, 0.0f);
  rir[5] = 1.0f;
  rir[90] = 0.3f;
  c.Add(data::SourceKind::kRir, Waveform(rir, kRate));
  return c;
}

data::SimulationConfig ToySim() {
  data::SimulationConfig s;
  s.sample_rate = kRate;
  s.segment_s = 0.1;
  return s;
}

TrainConfig SmallConfig(Phase phase, int64_t iters) {
  TrainConfig c;
  c.phase = phase;
  c.max_iters = iters;
  c.batch_size = 2;
  c.seed = 5;
  return c;
}

std::vector<std::vector<double>> Snapshot(const nn::ParamStore& p) {
  std::vector<std::vector<double>> out;
  for (const auto& name : p.names()) {
    out.emplace_back(p.Get(name).value().begin(), p.Get(name).value().end());
  }
  return out;
}

class NanSource : public BatchSource {
 public:
  Batch Get(int64_t) override {
    std::vector<float> x(1280, 0.1f);
    x[300] = NAN;
    return MakeBatch({Waveform(x, kRate)}, {Waveform(std::vector<float>(1280, 0.1f), kRate)});
  }
};

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(LrSchedule(0) == 1e-3);
  CHECK(LrSchedule(19999) == 1e-3);
  CHECK(LrSchedule(20000) == doctest::Approx(9.8e-4).epsilon(1e-15));
  CHECK(LrSchedule(40000) == doctest::Approx(9.604e-4).epsilon(1e-15));
  CHECK(LrSchedule(40000) == 1e-3 * 0.98 * 0.98);
  CHECK_THROWS_AS(LrSchedule(-1), Error);
}

TEST_CASE("toy model overfits a single example") {
  model::Model m(testing::ToyConfig(8, 5, 16, 1), 1);
  FixedSource src(OverfitExample());
  TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 500);
  cfg.batch_size = 1;
  cfg.lr0 = 3e-3;  // desk-scale override
  Trainer t(&m, cfg, &src);
  t.Run();
  const auto& h = t.history();
  REQUIRE(h.size() == 500);
  const double first = h.front().loss, last = h.back().loss;
  MESSAGE("L_MR " << first << " -> " << last);
  CHECK(last <= 0.1 * first);
}

TEST_CASE("early stopping fires exactly one window after the last best") {
  model::Model m(testing::ToyConfig(4, 3, 8, 1), 2);
  FixedSource src(OverfitExample());
  SUBCASE("frozen metric") {
    TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 1000);
    cfg.batch_size = 1;
    cfg.validation_every = 1;
    cfg.early_stop_window = 7;
    Trainer t(&m, cfg, &src, [](model::Model&) { return 1.0; });
    t.Run();
    CHECK(t.stopped_early());
    CHECK(t.best_iter() == 1);
    CHECK(t.iter() == 1 + 7);
  }
  SUBCASE("metric improving until iteration 12") {
    TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 1000);
    cfg.batch_size = 1;
    cfg.validation_every = 2;
    cfg.early_stop_window = 6;
    int calls = 0;
    Trainer t(&m, cfg, &src, [&](model::Model&) {
      ++calls;
      return calls <= 6 ? 10.0 - calls : 5.0;
    });
    t.Run();
    CHECK(t.best_iter() == 12);
    CHECK(t.iter() == 12 + 6);
  }
}

TEST_CASE("resumed training is bit-identical to uninterrupted training") {
  const auto catalog = ToyCatalog(false);
  for (Phase phase : {Phase::kPretrainMr, Phase::kFinetuneMgd, Phase::kFinetuneMrsd}) {
    CAPTURE(PhaseName(phase));
    const int64_t total = phase == Phase::kPretrainMr ? 100 : 10;
    SimulatedSource src(&catalog, ToySim(), false, 2, 17);
    model::Model straight(testing::ToyConfig(4, 3, 8, 1), 3);
    Trainer a(&straight, SmallConfig(phase, total), &src);
    a.Run();

    model::Model first(testing::ToyConfig(4, 3, 8, 1), 3);
    Trainer b(&first, SmallConfig(phase, total), &src);
    for (int64_t i = 0; i < total / 2; ++i) b.Step();
    const auto bytes = model::EncodeCheckpoint(b.MakeCheckpoint());

    const auto ckpt = model::DecodeCheckpoint(bytes);
    auto resumed = model::ModelFromCheckpoint(ckpt);
    Trainer c(resumed.get(), SmallConfig(phase, total), &src);
    c.Restore(ckpt);
    CHECK(c.iter() == total / 2);
    c.Run();
    CHECK(c.iter() == total);
    CHECK(Snapshot(resumed->params()) == Snapshot(straight.params()));
    for (std::size_t k = 0; k < a.discriminators().size(); ++k) {
      CHECK(Snapshot(*c.discriminators()[k].params()) ==
            Snapshot(*a.discriminators()[k].params()));
    }
  }
}

TEST_CASE("gradient clipping and the adversarial alternation audits") {
  const auto catalog = ToyCatalog(false);
  SimulatedSource src(&catalog, ToySim(), false, 2, 4);
  for (Phase phase : {Phase::kPretrainMr, Phase::kFinetuneMgd, Phase::kFinetuneMrsd}) {
    CAPTURE(PhaseName(phase));
    model::Model m(testing::ToyConfig(4, 3, 8, 1), 6);
    TrainConfig cfg = SmallConfig(phase, 6);
    cfg.clip_norm = 0.05;
    Trainer t(&m, cfg, &src);
    std::vector<std::vector<std::vector<double>>> before;
    for (auto& d : t.discriminators()) before.push_back(Snapshot(*d.params()));
    bool any_clipped = false;
    for (int i = 0; i < 6; ++i) {
      const auto st = t.Step();
      CHECK(st.clipped == (st.grad_norm > cfg.clip_norm));
      any_clipped |= st.clipped;
      CHECK(st.disc_frozen_in_g_step);
      CHECK(st.gen_frozen_in_d_step);
      CHECK(std::isfinite(st.loss));
    }
    CHECK(any_clipped);
    for (std::size_t k = 0; k < t.discriminators().size(); ++k) {
      CHECK(Snapshot(*t.discriminators()[k].params()) != before[k]);
    }
  }
  // A large threshold never clips.
  model::Model m(testing::ToyConfig(4, 3, 8, 1), 6);
  TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 3);
  cfg.clip_norm = 1e9;
  Trainer t(&m, cfg, &src);
  t.Run();
  for (const auto& st : t.history()) CHECK_FALSE(st.clipped);
}

TEST_CASE("pse warm start reproduces the base model and then learns") {
  model::Model base(testing::ToyConfig(4, 3, 8, 1), 8);
  const auto ckpt = model::CheckpointFromModel(base);
  auto pse_cfg = testing::ToyConfig(4, 3, 8, 1, true, true);
  std::vector<std::string> consumed;
  auto pse = WarmStartPse(ckpt, pse_cfg, 9, &consumed);
  CHECK(consumed == base.params().names());
  const Waveform x(testing::WhiteNoise(3000, 1, 0.3), kRate);
  const Waveform ref = base.Enhance(x);
  Rng rng(3);
  for (int k = 0; k < 3; ++k) {
    std::vector<float> e(16);
    for (float& v : e) v = static_cast<float>(rng.Normal());
    CHECK(pse->Enhance(x, &e).samples == ref.samples);
  }

  auto mismatch = testing::ToyConfig(4, 3, 12, 1, true, true);
  try {
    WarmStartPse(ckpt, mismatch);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCheckpoint);
  }
  CHECK_THROWS_AS(WarmStartPse(ckpt, testing::ToyConfig(4, 3, 8, 1, true, false)), Error);

  const auto catalog = ToyCatalog(true);
  SimulatedSource src(&catalog, ToySim(), true, 2, 1);
  const auto enroll_before = Snapshot(pse->params());
  Trainer t(pse.get(), SmallConfig(Phase::kPretrainMr, 1), &src);
  t.Run();
  std::vector<float> e(16, 0.25f);
  const Waveform after = pse->Enhance(x, &e);
  double diff = 0.0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    diff = std::max(diff, std::abs(double{after.samples[i]} - ref.samples[i]));
  }
  CHECK(diff > 0.0);
  const Var w = pse->params().Get("enroll.fc.weight");
  double wmax = 0.0;
  for (double v : w.value()) wmax = std::max(wmax, std::abs(v));
  CHECK(wmax > 0.0);
}

TEST_CASE("checkpoints, best alias and the training log") {
  const auto dir = TempDir("ckpt");
  model::Model m(testing::ToyConfig(4, 3, 8, 1), 10);
  FixedSource src(OverfitExample());
  TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 4);
  cfg.batch_size = 1;
  cfg.validation_every = 2;
  cfg.out_dir = dir.string();
  {
    Trainer t(&m, cfg, &src, MrValidator({src.Get(0)}));
    t.Run();
  }
  CHECK(std::filesystem::exists(dir / "ckpt_2.bsrnn"));
  CHECK(std::filesystem::exists(dir / "ckpt_4.bsrnn"));
  CHECK(std::filesystem::exists(dir / "best.bsrnn"));
  CHECK(std::filesystem::exists(dir / "last.bsrnn"));
  auto restored = model::ModelFromCheckpoint(model::LoadCheckpoint((dir / "last.bsrnn").string()));
  CHECK(Snapshot(restored->params()) == Snapshot(m.params()));
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"iter", "phase", "lr", "losses", "grad_norm", "val"}) {
      CHECK(j.contains(key));
    }
    ++lines;
    CHECK(j["iter"] == lines);
    CHECK(j["val"].is_null() == (lines % 2 == 1));
  }
  CHECK(lines == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a non-finite loss aborts with a diagnostic checkpoint") {
  const auto dir = TempDir("nan");
  model::Model m(testing::ToyConfig(4, 3, 8, 1), 11);
  NanSource src;
  TrainConfig cfg = SmallConfig(Phase::kPretrainMr, 5);
  cfg.out_dir = dir.string();
  Trainer t(&m, cfg, &src);
  try {
    t.Step();
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTraining);
  }
  CHECK(std::filesystem::exists(dir / "diagnostic.bsrnn"));
  std::filesystem::remove_all(dir);
}
