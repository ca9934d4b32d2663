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

#include "bsrnn/objectives/discriminator.h"

#include <cmath>

#include "bsrnn/error.h"

namespace bsrnn::objectives {

ConvDiscriminator::ConvDiscriminator(const std::string& prefix, int in_channels,
                                     std::vector<int> channels,
                                     bool sigmoid_head, uint64_t seed)
    : prefix_(prefix), in_channels_(in_channels), sigmoid_head_(sigmoid_head) {
  BSRNN_CHECK(in_channels > 0 && !channels.empty(), ErrorKind::kConfig,
              "discriminator needs input channels and at least one layer");
  Rng rng(seed);
  int c = in_channels;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const int o = channels[l];
    const double bound = 1.0 / std::sqrt(9.0 * c);
    const std::string name = prefix + ".conv." + std::to_string(l);
    Layer layer;
    layer.weight = params_.Add(name + ".weight", {o, c, 3, 3},
                               nn::UniformValues(rng, int64_t{o} * c * 9, bound));
    layer.bias = params_.Add(name + ".bias", {o}, nn::UniformValues(rng, o, bound));
    layers_.push_back(layer);
    c = o;
  }
  head_ = nn::AddLinear(params_, prefix + ".head", c, 1, rng);
}

nn::Var ConvDiscriminator::Forward(nn::Graph& g, const nn::Var& input) {
  BSRNN_CHECK(input.rank() == 4 && input.dim(1) == in_channels_,
              ErrorKind::kParameter,
              "discriminator input must be [B, " + std::to_string(in_channels_) +
                  ", T, F], got " + nn::ShapeString(input.shape()));
  nn::Var h = input;
  for (const Layer& layer : layers_) {
    h = g.LeakyRelu(g.Conv2d(h, layer.weight, layer.bias, 2, 2, 1, 1), 0.2);
  }
  const int64_t b = h.dim(0), c = h.dim(1);
  h = g.MeanLastAxis(g.Reshape(h, {b, c, h.dim(2) * h.dim(3)}));
  h = g.Linear(h, head_.weight, head_.bias);
  if (sigmoid_head_) h = g.Sigmoid(h);
  return g.Reshape(h, {b});
}

nn::Var ConstantDiscriminator::Forward(nn::Graph& g, const nn::Var& input) {
  // Zero-weighted dependence on the input keeps gradients flowing
  // (identically zero) back into whatever produced it.
  const int64_t b = input.dim(0);
  nn::Var flat = g.Reshape(input, {b, input.numel() / b});
  nn::Var zero = g.Scale(g.MeanLastAxis(flat), 0.0);
  return g.AddScalar(zero, value_);
}

ConvDiscriminator MakeMgdDiscriminator(uint64_t seed, const std::string& prefix) {
  return ConvDiscriminator(prefix, 2, {8, 16, 16, 32}, true, seed);
}

ConvDiscriminator MakeMrsdDiscriminator(uint64_t seed, const std::string& prefix) {
  return ConvDiscriminator(prefix, 1, {8, 16, 16}, false, seed);
}

}  // namespace bsrnn::objectives
