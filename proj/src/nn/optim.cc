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

#include "bsrnn/nn/optim.h"

#include <cmath>

#include "bsrnn/error.h"

namespace bsrnn::nn {

Adam::Adam(ParamStore* params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& name : params_->trainable_names()) {
    const auto n = params_->Get(name).numel();
    m_[name].assign(n, 0.0);
    v_[name].assign(n, 0.0);
  }
}

void Adam::Step(double lr) {
  CheckFiniteGrads(*params_);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  auto round = [this](double x) {
    return cfg_.float32_state ? static_cast<double>(static_cast<float>(x)) : x;
  };
  for (const auto& name : params_->trainable_names()) {
    Var p = params_->Get(name);
    if (!p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    m.resize(p.numel(), 0.0);
    v.resize(p.numel(), 0.0);
    auto g = p.grad();
    auto w = p.mutable_value();
    for (int64_t i = 0; i < p.numel(); ++i) {
      m[i] = round(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i]);
      v[i] = round(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i]);
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      w[i] = round(w[i] - lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }
}

void CheckFiniteGrads(const ParamStore& params) {
  for (const auto& name : params.trainable_names()) {
    Var p = params.Get(name);
    if (!p.has_grad()) continue;
    for (double x : p.grad()) {
      BSRNN_CHECK(std::isfinite(x), ErrorKind::kTraining,
                  "non-finite gradient in " + name);
    }
  }
}

double ClipGradNorm(ParamStore& params, double max_norm) {
  CheckFiniteGrads(params);
  double sq = 0.0;
  for (const auto& name : params.trainable_names()) {
    Var p = params.Get(name);
    if (!p.has_grad()) continue;
    for (double x : p.grad()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& name : params.trainable_names()) {
      Var p = params.Get(name);
      if (!p.has_grad()) continue;
      for (double& x : p.mutable_grad()) x *= s;
    }
  }
  return norm;
}

}  // namespace bsrnn::nn
