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

#include "bsrnn/model/macs.h"

#include <cstdio>
#include <sstream>

namespace bsrnn::model {

namespace {

double LstmStep(double in, double hidden) { return 4.0 * hidden * (in + hidden); }

}  // namespace

MacsReport CountMacs(const ModelConfig& cfg) {
  cfg.Validate();
  MacsReport r;
  r.frames_per_second = cfg.stft.frames_per_second();
  const double N = cfg.feature_dim, H = cfg.lstm_hidden(), M = cfg.mask_hidden();
  const int K = cfg.scheme.num_bands(), B = cfg.scheme.split_band;
  auto add = [&r](std::string name, double macs) {
    r.layers.emplace_back(std::move(name), macs);
    r.per_frame += macs;
  };

  double split = 0.0, mask = 0.0;
  for (int k = 0; k < K; ++k) {
    const double w = cfg.scheme.width(k);
    split += 2.0 * w * N;
    mask += N * M + M * 8.0 * w;
  }
  add("band_split.fc", split);
  if (cfg.personalized) add("enroll.fc", cfg.embedding_dim * N);
  for (int l = 0; l < cfg.num_blocks; ++l) {
    const std::string p = "block." + std::to_string(l);
    add(p + ".band.bilstm", 2.0 * B * LstmStep(N, H));
    add(p + ".band.fc_bi", B * 2.0 * H * N);
    if (B < K) {
      add(p + ".band.unilstm", (K - B) * LstmStep(N, H));
      add(p + ".band.fc_uni", (K - B) * H * N);
    }
    const double dirs = cfg.causal ? 1.0 : 2.0;
    add(p + ".seq.lstm", dirs * K * LstmStep(N, H));
    add(p + ".seq.fc", K * dirs * H * N);
  }
  add("mask.mlp", mask);
  return r;
}

std::string MacsReport::ToString() const {
  std::ostringstream os;
  char buf[160];
  for (const auto& [name, macs] : layers) {
    std::snprintf(buf, sizeof(buf), "%-24s %14.0f MACs/frame %9.4f GMACs/s\n",
                  name.c_str(), macs, macs * frames_per_second / 1e9);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-24s %14.0f MACs/frame %9.4f GMACs/s\n",
                "total", per_frame, per_second() / 1e9);
  os << buf;
  return os.str();
}

}  // namespace bsrnn::model
