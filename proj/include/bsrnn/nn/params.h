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


#ifndef BSRNN_NN_PARAMS_H_
#define BSRNN_NN_PARAMS_H_

#include <map>
#include <string>
#include <vector>

#include "bsrnn/nn/graph.h"
#include "bsrnn/random.h"

namespace bsrnn::nn {

// Named tensors of a model in insertion order. Trainable entries are
// parameters; the rest are buffers such as batch-norm running statistics.
class ParamStore {
 public:
  Var Add(const std::string& name, Shape shape, std::vector<double> values,
          bool trainable = true);
  bool Has(const std::string& name) const { return index_.count(name) > 0; }
  Var Get(const std::string& name) const;
  bool trainable(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::vector<std::string> trainable_names() const;
  int64_t NumParameters() const;

  void ZeroGrad();
  // Toggles gradient tracking on every trainable entry.
  void SetRequiresGrad(bool on);
  // Copies values from `other` for every name present in both; returns the
  // names that were copied.
  std::vector<std::string> CopyFrom(const ParamStore& other);

 private:
  struct Entry {
    Var var;
    bool trainable;
  };
  std::vector<std::string> order_;
  std::map<std::string, Entry> index_;
};

std::vector<double> UniformValues(Rng& rng, int64_t n, double bound);
std::vector<double> ConstantValues(int64_t n, double v);

struct LinearParams {
  Var weight;  // [out, in]
  Var bias;    // [out]
};

// Uniform ±1/sqrt(in) weights, zero bias.
LinearParams AddLinear(ParamStore& store, const std::string& prefix,
                       int64_t in, int64_t out, Rng& rng);
// Uniform ±1/sqrt(in) for w_ih, ±1/sqrt(H) for w_hh; bias 0 except +1 on the
// forget gate.
LstmWeights AddLstm(ParamStore& store, const std::string& prefix, int64_t in,
                    int64_t hidden, Rng& rng);

enum class NormKind { kLayer, kBatch };

struct NormParams {
  NormKind kind = NormKind::kLayer;
  Var gamma;
  Var beta;
  BatchNormBuffers buffers;  // only for kBatch
};

NormParams AddNorm(ParamStore& store, const std::string& prefix, NormKind kind,
                   int64_t channels);
Var ApplyNorm(Graph& g, const Var& x, NormParams& norm, bool training);

}  // namespace bsrnn::nn

#endif  // BSRNN_NN_PARAMS_H_
