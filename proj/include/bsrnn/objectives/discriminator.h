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


#ifndef BSRNN_OBJECTIVES_DISCRIMINATOR_H_
#define BSRNN_OBJECTIVES_DISCRIMINATOR_H_

#include <string>
#include <vector>

#include "bsrnn/nn/graph.h"
#include "bsrnn/nn/params.h"

namespace bsrnn::objectives {

// Maps a [Bsz, C, T, F] spectrogram stack to one score per item, [Bsz].
class Discriminator {
 public:
  virtual ~Discriminator() = default;
  virtual nn::Var Forward(nn::Graph& g, const nn::Var& input) = 0;
  // Null for discriminators without trainable state.
  virtual nn::ParamStore* params() { return nullptr; }
};

// 3x3 stride-2 convolutions with leaky rectifiers, global mean pool and a
// linear head, optionally squashed by a sigmoid.
class ConvDiscriminator : public Discriminator {
 public:
  ConvDiscriminator(const std::string& prefix, int in_channels,
                    std::vector<int> channels, bool sigmoid_head,
                    uint64_t seed);

  nn::Var Forward(nn::Graph& g, const nn::Var& input) override;
  nn::ParamStore* params() override { return &params_; }
  const std::string& prefix() const { return prefix_; }

 private:
  struct Layer {
    nn::Var weight;  // [O, C, 3, 3]
    nn::Var bias;    // [O]
  };
  std::string prefix_;
  int in_channels_;
  bool sigmoid_head_;
  nn::ParamStore params_;
  std::vector<Layer> layers_;
  nn::LinearParams head_;
};

// Outputs the same value for every input. Used to pin the adversarial
// losses to their closed forms.
class ConstantDiscriminator : public Discriminator {
 public:
  explicit ConstantDiscriminator(double value) : value_(value) {}
  nn::Var Forward(nn::Graph& g, const nn::Var& input) override;

 private:
  double value_;
};

// MetricGAN discriminator: two channels (estimate, reference), four layers,
// sigmoid output.
ConvDiscriminator MakeMgdDiscriminator(uint64_t seed,
                                       const std::string& prefix = "disc.mgd");
// One single-channel three-layer discriminator with an unbounded head.
ConvDiscriminator MakeMrsdDiscriminator(uint64_t seed, const std::string& prefix);

}  // namespace bsrnn::objectives

#endif  // BSRNN_OBJECTIVES_DISCRIMINATOR_H_
