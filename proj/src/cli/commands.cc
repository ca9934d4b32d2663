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

#include "bsrnn/cli/commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bsrnn/cli/run_config.h"
#include "bsrnn/data/catalog.h"
#include "bsrnn/data/simulate.h"
#include "bsrnn/error.h"
#include "bsrnn/metrics/metrics.h"
#include "bsrnn/model/checkpoint.h"
#include "bsrnn/model/macs.h"
#include "bsrnn/model/streaming.h"
#include "bsrnn/objectives/losses.h"
#include "bsrnn/train/trainer.h"

namespace bsrnn::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  RunConfig Load() const {
    RunConfig rc;
    if (!file.empty()) rc.LoadFile(FindConfig(file));
    for (const auto& s : sets) rc.Set(s);
    return rc;
  }
};

void AddConfigArgs(CLI::App* app, ConfigArgs& args) {
  app->add_option("--config", args.file, "key = value config file");
  app->add_option("--set", args.sets, "override, key=value")->take_all();
}

std::string Fnv(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

void EchoConfig(const RunConfig& rc) {
  std::cerr << "# resolved config (hash " << rc.Hash() << ")\n" << rc.Resolved();
}

void EchoModel(const model::ModelConfig& cfg) {
  const std::string text = cfg.ToJson().dump();
  std::cerr << "# model config (hash " << Fnv(text) << ")\n" << text << "\n";
}

std::vector<float> LoadEmbedding(const std::string& path) {
  if (path.empty()) return {};
  return data::ReadEmbedding(path).vector;
}

int CmdSimulate(const ConfigArgs& ca, int64_t count, const std::string& out) {
  const RunConfig rc = ca.Load();
  EchoConfig(rc);
  BSRNN_CHECK(!rc.Get("sim.catalog").empty(), ErrorKind::kUsage, "sim.catalog is not set");
  BSRNN_CHECK(count >= 0, ErrorKind::kUsage, "--count must be non-negative");
  const auto catalog = data::Catalog::FromFile(rc.Get("sim.catalog"));
  const auto sim = rc.Simulation();
  const bool personalized = rc.GetBool("model.personalized");
  fs::create_directories(out);
  std::ofstream draws(fs::path(out) / "draws.jsonl");
  BSRNN_CHECK(draws.good(), ErrorKind::kIo, "cannot write " + out + "/draws.jsonl");
  for (int64_t i = 0; i < count; ++i) {
    const auto spec = data::SimulateIndexed(catalog, sim, personalized, i);
    auto path = [&](const char* stem) {
      return (fs::path(out) / (std::string(stem) + "_" + std::to_string(i) + ".wav")).string();
    };
    WriteWav(path("mixture"), spec.mixture);
    WriteWav(path("target"), spec.target);
    WriteWav(path("reverberant"), spec.reverberant);
    if (spec.draws.has_noise()) WriteWav(path("noise"), spec.noise);
    if (spec.draws.has_interferer()) WriteWav(path("interferer"), spec.interferer);
    if (personalized) {
      WriteWav(path("enroll"), spec.enrollment);
      if (!spec.embedding.empty()) {
        data::WriteEmbedding(
            (fs::path(out) / ("enroll_" + std::to_string(i) + ".emb")).string(),
            spec.embedding);
      }
    }
    nlohmann::json j = spec.draws.ToJson();
    j["index"] = i;
    draws << j.dump() << "\n";
  }
  std::cout << "wrote " << count << " examples to " << out << "\n";
  return kExitOk;
}

objectives::QualityOracle CommandOracle(const std::string& cmd, const std::string& pattern,
                                        const std::string& dir) {
  return [cmd, pattern, dir](const Waveform& est, const Waveform& ref) {
    const std::string e = (fs::path(dir) / "oracle_est.wav").string();
    const std::string r = (fs::path(dir) / "oracle_ref.wav").string();
    WriteWav(e, est);
    WriteWav(r, ref);
    try {
      return objectives::QNormalize(metrics::ExternalScore(e, r, cmd, pattern));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::kAdapter) throw;
      // Fall back to the built-in proxy when the external tool fails.
      return objectives::BuiltinQualityProxy(est, ref);
    }
  };
}

int CmdTrain(const ConfigArgs& ca) {
  const RunConfig rc = ca.Load();
  EchoConfig(rc);
  BSRNN_CHECK(!rc.Get("sim.catalog").empty(), ErrorKind::kUsage, "sim.catalog is not set");
  const auto tcfg = rc.Training();
  const std::string init = rc.Get("train.init");
  const std::string resume = rc.Get("train.resume");
  std::unique_ptr<model::Model> m;
  std::optional<model::Checkpoint> resume_ckpt;
  if (!resume.empty()) {
    resume_ckpt = model::LoadCheckpoint(resume);
    m = model::ModelFromCheckpoint(*resume_ckpt);
  } else if (!init.empty()) {
    const auto base = model::LoadCheckpoint(init);
    const auto base_cfg = model::ModelConfig::FromJson(base.meta.at("model"));
    if (rc.GetBool("model.personalized") && !base_cfg.personalized) {
      model::ModelConfig pse = base_cfg;
      pse.personalized = true;
      pse.embedding_dim = static_cast<int>(rc.GetInt("model.embedding_dim"));
      m = train::WarmStartPse(base, pse, static_cast<uint64_t>(rc.GetInt("model.seed")));
    } else {
      m = model::ModelFromCheckpoint(base);
    }
  } else {
    BSRNN_CHECK(tcfg.phase == train::Phase::kPretrainMr, ErrorKind::kUsage,
                std::string(train::PhaseName(tcfg.phase)) +
                    " needs a pretrained checkpoint in train.init");
    m = std::make_unique<model::Model>(rc.Model(),
                                       static_cast<uint64_t>(rc.GetInt("model.seed")));
  }
  EchoModel(m->config());
  auto sim = rc.Simulation();
  BSRNN_CHECK(sim.sample_rate == m->config().stft.sample_rate, ErrorKind::kConfig,
              "simulation rate differs from the model rate");
  const auto catalog = data::Catalog::FromFile(rc.Get("sim.catalog"));
  train::SimulatedSource source(&catalog, sim, m->config().personalized, tcfg.batch_size,
                                tcfg.seed);
  train::Trainer trainer(m.get(), tcfg, &source,
                         train::MrValidator(source.ValidationSet(tcfg.validation_size)));
  if (!rc.Get("adapter.quality_cmd").empty()) {
    trainer.set_oracle(
        CommandOracle(rc.Get("adapter.quality_cmd"), rc.Get("adapter.quality_pattern"),
                      tcfg.out_dir.empty() ? fs::temp_directory_path().string() : tcfg.out_dir));
  }
  if (resume_ckpt) trainer.Restore(*resume_ckpt);
  trainer.Run();
  if (!tcfg.out_dir.empty() && trainer.history().empty() == false &&
      !fs::exists(fs::path(tcfg.out_dir) / "last.bsrnn")) {
    model::SaveCheckpoint((fs::path(tcfg.out_dir) / "last.bsrnn").string(),
                          trainer.MakeCheckpoint());
  }
  nlohmann::json summary = {{"iterations", trainer.iter()},
                            {"stopped_early", trainer.stopped_early()},
                            {"best_iter", trainer.best_iter()},
                            {"out_dir", tcfg.out_dir}};
  summary["best_val"] =
      trainer.best_iter() >= 0 ? nlohmann::json(trainer.best_val()) : nlohmann::json(nullptr);
  summary["final_loss"] = trainer.history().empty()
                              ? nlohmann::json(nullptr)
                              : nlohmann::json(trainer.history().back().loss);
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

std::vector<float> StreamWhole(model::Model& m, const std::vector<float>* emb,
                               const std::vector<float>& x) {
  model::StreamingEnhancer s(m, emb);
  std::vector<float> out;
  const std::size_t hop = m.config().stft.hop_len;
  for (std::size_t i = 0; i < x.size(); i += hop) {
    auto y = s.Push(std::span<const float>(x.data() + i, std::min(hop, x.size() - i)));
    out.insert(out.end(), y.begin(), y.end());
  }
  auto tail = s.Flush();
  out.insert(out.end(), tail.begin(), tail.end());
  // Drop the algorithmic latency so the result lines up with the input.
  const std::size_t lat = s.latency();
  return std::vector<float>(out.begin() + lat, out.begin() + lat + x.size());
}

int CmdEnhance(const std::string& ckpt_path, const std::string& in, const std::string& out,
               const std::string& enroll, bool stream, bool raw) {
  auto m = model::ModelFromCheckpoint(model::LoadCheckpoint(ckpt_path));
  EchoModel(m->config());
  const auto emb = LoadEmbedding(enroll);
  const std::vector<float>* e = enroll.empty() ? nullptr : &emb;
  if (raw) {
    // Raw float32 on stdin/stdout, processed hop by hop. The output is
    // delayed by the model latency and includes the flushed tail.
    model::StreamingEnhancer s(*m, e);
    std::vector<float> buf(m->config().stft.hop_len);
    std::size_t n;
    while ((n = std::fread(buf.data(), sizeof(float), buf.size(), stdin)) > 0) {
      auto y = s.Push(std::span<const float>(buf.data(), n));
      std::fwrite(y.data(), sizeof(float), y.size(), stdout);
      std::fflush(stdout);
    }
    auto tail = s.Flush();
    std::fwrite(tail.data(), sizeof(float), tail.size(), stdout);
    std::fflush(stdout);
    return kExitOk;
  }
  BSRNN_CHECK(!in.empty() && !out.empty(), ErrorKind::kUsage, "--in and --out are required");
  const Waveform x = ReadWav(in);
  BSRNN_CHECK(x.sample_rate == m->config().stft.sample_rate, ErrorKind::kConfig,
              "input is at " + std::to_string(x.sample_rate) + " Hz, model expects " +
                  std::to_string(m->config().stft.sample_rate));
  Waveform y = stream ? Waveform(StreamWhole(*m, e, x.samples), x.sample_rate) : m->Enhance(x, e);
  WriteWav(out, y);
  std::cerr << "enhanced " << x.size() << " samples" << (stream ? " (streaming)" : "") << "\n";
  return kExitOk;
}

int CmdEval(const std::string& ref, const std::string& est, const std::string& cmd,
            const std::string& pattern) {
  const auto r = metrics::Evaluate(est, ref, cmd, pattern);
  std::cout << r.ToJson().dump() << "\n";
  return kExitOk;
}

int CmdMacs(const ConfigArgs& ca, const std::string& ckpt) {
  model::ModelConfig cfg;
  if (!ckpt.empty()) {
    cfg = model::ModelConfig::FromJson(model::LoadCheckpoint(ckpt).meta.at("model"));
  } else {
    const RunConfig rc = ca.Load();
    EchoConfig(rc);
    cfg = rc.Model();
  }
  EchoModel(cfg);
  std::cout << model::CountMacs(cfg).ToString();
  return kExitOk;
}

int CmdRtf(const std::string& ckpt, double seconds, int runs) {
  auto m = model::ModelFromCheckpoint(model::LoadCheckpoint(ckpt));
  EchoModel(m->config());
  const double rtf = metrics::MeasureRtf(*m, seconds, runs);
  std::cout << nlohmann::json({{"rtf", rtf}, {"seconds", seconds}, {"runs", runs}}).dump()
            << "\n";
  return kExitOk;
}

int CmdInspect(const std::string& ckpt_path) {
  const auto ckpt = model::LoadCheckpoint(ckpt_path);
  std::cout << ckpt.meta.dump(2) << "\n";
  int64_t total = 0;
  for (const auto& t : ckpt.tensors) {
    std::cout << t.name << " " << nn::ShapeString(t.shape) << "\n";
    total += static_cast<int64_t>(t.data.size());
  }
  std::cout << ckpt.tensors.size() << " tensors, " << total << " values\n";
  return kExitOk;
}

}  // namespace

int Main(int argc, char** argv) {
  CLI::App app{"Band-split RNN speech enhancement"};
  app.require_subcommand(1);

  ConfigArgs sim_args, train_args, macs_args;
  int64_t count = 1;
  std::string out_dir = "sim";
  auto* sim = app.add_subcommand("simulate", "write simulated training mixtures");
  AddConfigArgs(sim, sim_args);
  sim->add_option("--count", count, "number of examples");
  sim->add_option("--out", out_dir, "output directory");

  auto* trn = app.add_subcommand("train", "train or finetune a model");
  AddConfigArgs(trn, train_args);

  std::string ckpt, in, out, enroll;
  bool stream = false, raw = false;
  auto* enh = app.add_subcommand("enhance", "enhance a recording");
  enh->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  enh->add_option("--in", in, "input wav");
  enh->add_option("--out", out, "output wav");
  enh->add_option("--enroll", enroll, "enrollment embedding file");
  enh->add_flag("--stream", stream, "frame-by-frame streaming inference");
  enh->add_flag("--raw", raw, "raw float32 samples on stdin/stdout (streaming)");

  std::string ref, est, pesq_cmd, pesq_pattern = "(float)";
  auto* ev = app.add_subcommand("eval", "objective metrics of an estimate");
  ev->add_option("--ref", ref, "reference wav")->required();
  ev->add_option("--est", est, "estimate wav")->required();
  ev->add_option("--pesq-cmd", pesq_cmd, "external scorer, e.g. 'pesq {ref} {est}'");
  ev->add_option("--pesq-pattern", pesq_pattern, "score pattern containing (float)");

  std::string macs_ckpt;
  auto* mc = app.add_subcommand("macs", "analytic multiply-accumulate count");
  AddConfigArgs(mc, macs_args);
  mc->add_option("--checkpoint", macs_ckpt, "count for a checkpoint instead");

  std::string rtf_ckpt;
  double seconds = 10.0;
  int runs = 5;
  auto* rt = app.add_subcommand("rtf", "streaming real-time factor");
  rt->add_option("--checkpoint", rtf_ckpt, "model checkpoint")->required();
  rt->add_option("--seconds", seconds, "audio duration");
  rt->add_option("--runs", runs, "timed runs after one warm-up");

  std::string insp_ckpt;
  auto* ins = app.add_subcommand("inspect", "print checkpoint metadata and tensors");
  ins->add_option("--checkpoint", insp_ckpt, "checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (*sim) return CmdSimulate(sim_args, count, out_dir);
    if (*trn) return CmdTrain(train_args);
    if (*enh) return CmdEnhance(ckpt, in, out, enroll, stream, raw);
    if (*ev) return CmdEval(ref, est, pesq_cmd, pesq_pattern);
    if (*mc) return CmdMacs(macs_args, macs_ckpt);
    if (*rt) return CmdRtf(rtf_ckpt, seconds, runs);
    if (*ins) return CmdInspect(insp_ckpt);
  } catch (const Error& e) {
    std::cerr << "bsrnn: " << e.what() << "\n";
    const bool usage = e.kind() == ErrorKind::kUsage || e.kind() == ErrorKind::kConfig;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "bsrnn: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace bsrnn::cli
