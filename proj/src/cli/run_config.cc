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

#include "bsrnn/cli/run_config.h"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bsrnn/error.h"

namespace bsrnn::cli {

const std::vector<std::pair<std::string, std::string>>& RunConfig::Schema() {
  static const std::vector<std::pair<std::string, std::string>> kSchema = {
      {"model.sample_rate", "48000"},
      {"model.window_ms", "auto"},
      {"model.hop_ms", "auto"},
      {"model.band_edges", "auto"},
      {"model.num_bands", "auto"},
      {"model.split_band", "auto"},
      {"model.feature_dim", "auto"},
      {"model.num_blocks", "6"},
      {"model.hidden", "auto"},
      {"model.mlp_hidden", "auto"},
      {"model.causal", "true"},
      {"model.personalized", "false"},
      {"model.embedding_dim", "256"},
      {"model.reset_period_s", "10"},
      {"model.seed", "0"},
      {"sim.catalog", ""},
      {"sim.snr_lo", "-5"},
      {"sim.snr_hi", "20"},
      {"sim.sir_lo", "-5"},
      {"sim.sir_hi", "20"},
      {"sim.rir_prob", "0.2"},
      {"sim.p_noise_only", "0.5"},
      {"sim.p_noise_interferer", "0.3"},
      {"sim.p_interferer_only", "0.2"},
      {"sim.segment_s", "6"},
      {"sim.seed", "0"},
      {"train.phase", "pretrain_mr"},
      {"train.lr0", "0.001"},
      {"train.decay", "0.98"},
      {"train.decay_every", "20000"},
      {"train.clip_norm", "5"},
      {"train.max_iters", "auto"},
      {"train.early_stop_window", "20000"},
      {"train.batch_size", "4"},
      {"train.validation_every", "1000"},
      {"train.validation_size", "8"},
      {"train.seed", "0"},
      {"train.out_dir", "runs"},
      {"train.init", ""},
      {"train.resume", ""},
      {"objective.p", "0.3"},
      {"objective.lambda1", "0.5"},
      {"objective.lambda2", "0.5"},
      {"objective.lambda3", "1"},
      {"objective.multi_resolution", "true"},
      {"adapter.pesq_cmd", ""},
      {"adapter.pesq_pattern", "(float)"},
      {"adapter.quality_cmd", ""},
      {"adapter.quality_pattern", "(float)"},
  };
  return kSchema;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : Schema()) values_[k] = v;
}

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::Set(const std::string& key, const std::string& value) {
  BSRNN_CHECK(values_.count(key) > 0, ErrorKind::kConfig, "unknown config key '" + key + "'");
  values_[key] = value;
}

void RunConfig::Set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  BSRNN_CHECK(eq != std::string::npos, ErrorKind::kConfig,
              "expected key=value, got '" + assignment + "'");
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

void RunConfig::LoadText(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    try {
      Set(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  BSRNN_CHECK(in.good(), ErrorKind::kIo, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  LoadText(ss.str(), path);
}

const std::string& RunConfig::Get(const std::string& key) const {
  auto it = values_.find(key);
  BSRNN_CHECK(it != values_.end(), ErrorKind::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::GetDouble(const std::string& key) const {
  const std::string& v = Get(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kConfig, key + " must be a number, got '" + v + "'");
}

int64_t RunConfig::GetInt(const std::string& key) const {
  const std::string& v = Get(key);
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kConfig, key + " must be an integer, got '" + v + "'");
}

bool RunConfig::GetBool(const std::string& key) const {
  const std::string& v = Get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::kConfig, key + " must be true or false, got '" + v + "'");
}

model::ModelConfig RunConfig::Model() const {
  const int rate = static_cast<int>(GetInt("model.sample_rate"));
  BSRNN_CHECK(IsModelRate(rate), ErrorKind::kConfig, "model.sample_rate must be 16000 or 48000");
  model::ModelConfig c =
      model::ModelConfig::Default(rate, GetBool("model.causal"), GetBool("model.personalized"));
  if (!IsAuto("model.window_ms") || !IsAuto("model.hop_ms")) {
    const auto def = dsp::StftConfig::ForRate(rate);
    const double w = IsAuto("model.window_ms") ? 1000.0 * def.window_len / rate
                                               : GetDouble("model.window_ms");
    const double h = IsAuto("model.hop_ms") ? 1000.0 * def.hop_len / rate
                                            : GetDouble("model.hop_ms");
    c.stft = dsp::StftConfig::FromMs(rate, w, h);
  }
  if (!IsAuto("model.band_edges")) {
    std::vector<int> edges;
    std::stringstream ss(Get("model.band_edges"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        edges.push_back(std::stoi(Trim(tok)));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kConfig, "model.band_edges must be comma-separated integers");
      }
    }
    c.scheme.edges = edges;
    c.scheme.split_band = static_cast<int>(edges.size()) - 1;
  } else if (!IsAuto("model.num_bands") || c.scheme.num_bins() != c.stft.num_bins()) {
    // Equal-width bands when the preset table does not fit.
    const int k = IsAuto("model.num_bands")
                      ? std::min(c.scheme.num_bands(), c.stft.num_bins())
                      : static_cast<int>(GetInt("model.num_bands"));
    BSRNN_CHECK(k >= 1 && k <= c.stft.num_bins(), ErrorKind::kConfig,
                "model.num_bands out of range");
    c.scheme = model::BandSplitScheme::Uniform(c.stft.num_bins(), k, k);
  }
  if (!IsAuto("model.split_band")) c.scheme.split_band = static_cast<int>(GetInt("model.split_band"));
  if (!IsAuto("model.feature_dim")) c.feature_dim = static_cast<int>(GetInt("model.feature_dim"));
  c.num_blocks = static_cast<int>(GetInt("model.num_blocks"));
  if (!IsAuto("model.hidden")) c.hidden = static_cast<int>(GetInt("model.hidden"));
  if (!IsAuto("model.mlp_hidden")) c.mlp_hidden = static_cast<int>(GetInt("model.mlp_hidden"));
  c.embedding_dim = static_cast<int>(GetInt("model.embedding_dim"));
  c.reset_period_s = GetDouble("model.reset_period_s");
  c.Validate();
  return c;
}

data::SimulationConfig RunConfig::Simulation() const {
  data::SimulationConfig s;
  s.sample_rate = static_cast<int>(GetInt("model.sample_rate"));
  s.snr_lo = GetDouble("sim.snr_lo");
  s.snr_hi = GetDouble("sim.snr_hi");
  s.sir_lo = GetDouble("sim.sir_lo");
  s.sir_hi = GetDouble("sim.sir_hi");
  s.rir_prob = GetDouble("sim.rir_prob");
  s.proportions = {GetDouble("sim.p_noise_only"), GetDouble("sim.p_noise_interferer"),
                   GetDouble("sim.p_interferer_only")};
  s.segment_s = GetDouble("sim.segment_s");
  s.seed = static_cast<uint64_t>(GetInt("sim.seed"));
  s.Validate();
  return s;
}

train::TrainConfig RunConfig::Training() const {
  train::TrainConfig t;
  t.phase = train::ParsePhase(Get("train.phase"));
  t.lr0 = GetDouble("train.lr0");
  t.decay = GetDouble("train.decay");
  t.decay_every = GetInt("train.decay_every");
  t.clip_norm = GetDouble("train.clip_norm");
  t.max_iters = IsAuto("train.max_iters")
                    ? (t.phase == train::Phase::kPretrainMr ? 400000 : 100000)
                    : GetInt("train.max_iters");
  t.early_stop_window = GetInt("train.early_stop_window");
  t.batch_size = static_cast<int>(GetInt("train.batch_size"));
  t.validation_every = GetInt("train.validation_every");
  t.validation_size = static_cast<int>(GetInt("train.validation_size"));
  t.seed = static_cast<uint64_t>(GetInt("train.seed"));
  t.out_dir = Get("train.out_dir");
  t.mgd.p = GetDouble("objective.p");
  t.mgd.mr.p = t.mgd.p;
  t.mrsd.mr.p = t.mgd.p;
  t.mgd.lambdas = {GetDouble("objective.lambda1"), GetDouble("objective.lambda2"),
                   GetDouble("objective.lambda3")};
  t.mgd.multi_resolution = GetBool("objective.multi_resolution");
  t.Validate();
  return t;
}

std::string RunConfig::Resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::Hash() const {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : Resolved()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::string FindConfig(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::path(name).is_absolute() || fs::exists(name)) return name;
  if (const char* env = std::getenv("BSRNN_CONFIG_PATH")) {
    std::stringstream ss(env);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (dir.empty()) continue;
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) return p.string();
    }
  }
  throw Error(ErrorKind::kIo, "config '" + name + "' not found (BSRNN_CONFIG_PATH searched)");
}

}  // namespace bsrnn::cli
