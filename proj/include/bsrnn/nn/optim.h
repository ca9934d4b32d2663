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


#ifndef BSRNN_NN_OPTIM_H_
#define BSRNN_NN_OPTIM_H_

#include <map>
#include <string>
#include <vector>

#include "bsrnn/nn/params.h"

namespace bsrnn::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Round parameters and moments to float32 after every update so that the
  // state survives a float32 checkpoint unchanged.
  bool float32_state = true;
};

class Adam {
 public:
  Adam(ParamStore* params, AdamConfig cfg = {});

  // One bias-corrected update of every trainable entry that has a gradient.
  // A non-finite gradient raises a training error naming the tensor.
  void Step(double lr);

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }
  std::map<std::string, std::vector<double>>& first_moment() { return m_; }
  std::map<std::string, std::vector<double>>& second_moment() { return v_; }
  const std::map<std::string, std::vector<double>>& first_moment() const {
    return m_;
  }
  const std::map<std::string, std::vector<double>>& second_moment() const {
    return v_;
  }

 private:
  ParamStore* params_;
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// Global L2 norm over all trainable gradients. If it exceeds max_norm every
// gradient is scaled by max_norm / norm. Returns the pre-clip norm.
double ClipGradNorm(ParamStore& params, double max_norm);

// Throws a training error naming the first tensor with a NaN/Inf gradient.
void CheckFiniteGrads(const ParamStore& params);

}  // namespace bsrnn::nn

#endif  // BSRNN_NN_OPTIM_H_
