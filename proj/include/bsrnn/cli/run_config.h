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


#ifndef BSRNN_CLI_RUN_CONFIG_H_
#define BSRNN_CLI_RUN_CONFIG_H_

#include <map>
#include <string>
#include <vector>

#include "bsrnn/data/simulate.h"
#include "bsrnn/model/model.h"
#include "bsrnn/train/trainer.h"

namespace bsrnn::cli {

// Flat key = value settings. Every key has a default; "auto" selects the
// preset for the configured sample rate.
class RunConfig {
 public:
  RunConfig();

  // Lines are "key = value"; '#' starts a comment. Unknown keys and
  // malformed lines are config errors.
  void LoadText(const std::string& text, const std::string& origin);
  void LoadFile(const std::string& path);
  // "key=value" override.
  void Set(const std::string& assignment);
  void Set(const std::string& key, const std::string& value);

  const std::string& Get(const std::string& key) const;
  bool IsAuto(const std::string& key) const { return Get(key) == "auto"; }
  double GetDouble(const std::string& key) const;
  int64_t GetInt(const std::string& key) const;
  bool GetBool(const std::string& key) const;

  model::ModelConfig Model() const;
  data::SimulationConfig Simulation() const;
  train::TrainConfig Training() const;

  // Canonical "key = value" lines in key order and their FNV-1a hash.
  std::string Resolved() const;
  std::string Hash() const;

  static const std::vector<std::pair<std::string, std::string>>& Schema();

 private:
  std::map<std::string, std::string> values_;
};

// Finds a config file: absolute or existing relative paths are used as
// given; otherwise each directory of BSRNN_CONFIG_PATH (colon separated) is
// tried in order.
std::string FindConfig(const std::string& name);

}  // namespace bsrnn::cli

#endif  // BSRNN_CLI_RUN_CONFIG_H_
