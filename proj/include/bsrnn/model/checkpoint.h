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


#ifndef BSRNN_MODEL_CHECKPOINT_H_
#define BSRNN_MODEL_CHECKPOINT_H_

#include <memory>
#include <string>
#include <vector>

#include "bsrnn/model/model.h"
#include "json.hpp"

namespace bsrnn::model {

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<float> data;
};

// Layout, all integers little-endian:
//   "BSRNNCKP" | u32 version | u32 n | n bytes of JSON metadata |
//   u32 count | count x (u32 name_len | name | u32 rank | rank x u64 dim |
//   float32 data, row-major) | u32 CRC32 of every preceding byte
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* Find(const std::string& name) const;
  void Put(const std::string& name, const nn::Var& v);
  void Put(NamedTensor t);
};

constexpr uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(const std::vector<unsigned char>& bytes);
void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);

// meta["model"] holds the config; every parameter and buffer is stored under
// its own name.
Checkpoint CheckpointFromModel(const Model& m);
// Copies every model tensor from the checkpoint. Names outside the model
// are allowed only under the "adam." and "disc." prefixes.
std::unique_ptr<Model> ModelFromCheckpoint(const Checkpoint& ckpt);
void LoadModelTensors(Model& m, const Checkpoint& ckpt);

}  // namespace bsrnn::model

#endif  // BSRNN_MODEL_CHECKPOINT_H_
