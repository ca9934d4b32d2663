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

#include "bsrnn/nn/params.h"

#include <cmath>

#include "bsrnn/error.h"

namespace bsrnn::nn {

Var ParamStore::Add(const std::string& name, Shape shape,
                    std::vector<double> values, bool trainable) {
  BSRNN_CHECK(!Has(name), ErrorKind::kParameter, "duplicate tensor " + name);
  Var v = trainable ? Var::Parameter(std::move(shape), std::move(values))
                    : Var::Constant(std::move(shape), std::move(values));
  order_.push_back(name);
  index_.emplace(name, Entry{v, trainable});
  return v;
}

Var ParamStore::Get(const std::string& name) const {
  auto it = index_.find(name);
  BSRNN_CHECK(it != index_.end(), ErrorKind::kParameter,
              "unknown tensor " + name);
  return it->second.var;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = index_.find(name);
  BSRNN_CHECK(it != index_.end(), ErrorKind::kParameter,
              "unknown tensor " + name);
  return it->second.trainable;
}

std::vector<std::string> ParamStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& n : order_) {
    if (index_.at(n).trainable) out.push_back(n);
  }
  return out;
}

int64_t ParamStore::NumParameters() const {
  int64_t n = 0;
  for (const auto& [name, e] : index_) {
    if (e.trainable) n += e.var.numel();
  }
  return n;
}

void ParamStore::ZeroGrad() {
  for (auto& [name, e] : index_) e.var.ZeroGrad();
}

void ParamStore::SetRequiresGrad(bool on) {
  for (auto& [name, e] : index_) {
    if (e.trainable) e.var.set_requires_grad(on);
  }
}

std::vector<std::string> ParamStore::CopyFrom(const ParamStore& other) {
  std::vector<std::string> copied;
  for (const auto& n : order_) {
    if (!other.Has(n)) continue;
    Var src = other.Get(n);
    Var dst = index_.at(n).var;
    BSRNN_CHECK(src.shape() == dst.shape(), ErrorKind::kCheckpoint,
                "shape mismatch for " + n + ": " + ShapeString(src.shape()) +
                    " vs " + ShapeString(dst.shape()));
    std::copy(src.value().begin(), src.value().end(),
              dst.mutable_value().begin());
    copied.push_back(n);
  }
  return copied;
}

std::vector<double> UniformValues(Rng& rng, int64_t n, double bound) {
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<float>(rng.Uniform(-bound, bound));
  return v;
}

std::vector<double> ConstantValues(int64_t n, double v) {
  return std::vector<double>(n, v);
}

LinearParams AddLinear(ParamStore& store, const std::string& prefix,
                       int64_t in, int64_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearParams p;
  p.weight = store.Add(prefix + ".weight", {out, in},
                       UniformValues(rng, out * in, bound));
  p.bias = store.Add(prefix + ".bias", {out}, ConstantValues(out, 0.0));
  return p;
}

LstmWeights AddLstm(ParamStore& store, const std::string& prefix, int64_t in,
                    int64_t hidden, Rng& rng) {
  LstmWeights w;
  w.w_ih = store.Add(prefix + ".w_ih", {4 * hidden, in},
                     UniformValues(rng, 4 * hidden * in,
                                   1.0 / std::sqrt(static_cast<double>(in))));
  w.w_hh = store.Add(
      prefix + ".w_hh", {4 * hidden, hidden},
      UniformValues(rng, 4 * hidden * hidden,
                    1.0 / std::sqrt(static_cast<double>(hidden))));
  std::vector<double> b(4 * hidden, 0.0);
  for (int64_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  w.bias = store.Add(prefix + ".b", {4 * hidden}, std::move(b));
  return w;
}

NormParams AddNorm(ParamStore& store, const std::string& prefix, NormKind kind,
                   int64_t channels) {
  NormParams p;
  p.kind = kind;
  p.gamma = store.Add(prefix + ".gamma", {channels}, ConstantValues(channels, 1.0));
  p.beta = store.Add(prefix + ".beta", {channels}, ConstantValues(channels, 0.0));
  if (kind == NormKind::kBatch) {
    p.buffers.running_mean = store.Add(prefix + ".running_mean", {channels},
                                       ConstantValues(channels, 0.0), false);
    p.buffers.running_var = store.Add(prefix + ".running_var", {channels},
                                      ConstantValues(channels, 1.0), false);
  }
  return p;
}

Var ApplyNorm(Graph& g, const Var& x, NormParams& norm, bool training) {
  if (norm.kind == NormKind::kLayer) return g.LayerNorm(x, norm.gamma, norm.beta);
  return g.BatchNorm(x, norm.gamma, norm.beta, norm.buffers, training);
}

}  // namespace bsrnn::nn
