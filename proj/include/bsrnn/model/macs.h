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


#ifndef BSRNN_MODEL_MACS_H_
#define BSRNN_MODEL_MACS_H_

#include <string>
#include <utility>
#include <vector>

#include "bsrnn/model/model.h"

namespace bsrnn::model {

// Analytic multiply-accumulate count. Matrix products in FC layers, LSTM
// gates (4H * (in + H) per step), the mask MLPs and the enrollment
// projection are counted; nonlinearities, norms and the STFT are not.
struct MacsReport {
  std::vector<std::pair<std::string, double>> layers;  // per frame
  double per_frame = 0.0;
  double frames_per_second = 0.0;

  double per_second() const { return per_frame * frames_per_second; }
  std::string ToString() const;
};

MacsReport CountMacs(const ModelConfig& cfg);

}  // namespace bsrnn::model

#endif  // BSRNN_MODEL_MACS_H_
