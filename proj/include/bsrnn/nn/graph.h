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

#ifndef BSRNN_NN_GRAPH_H_
#define BSRNN_NN_GRAPH_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bsrnn/dsp/stft.h"
#include "bsrnn/nn/tensor.h"

namespace bsrnn::nn {

// Gate order along the 4H axis is input, forget, cell, output.
struct LstmWeights {
  Var w_ih;  // [4H, in]
  Var w_hh;  // [4H, H]
  Var bias;  // [4H]

  int64_t hidden() const { return w_hh.dim(1); }
  int64_t input() const { return w_ih.dim(1); }
};

struct LstmResult {
  Var output;   // [S, B, H]
  Var h_final;  // [B, H], state after the last processed step
  Var c_final;  // [B, H]
};

struct BatchNormBuffers {
  Var running_mean;  // [C], updated in place in training mode
  Var running_var;   // [C]
  double momentum = 0.99;
  double eps = 1e-5;
};

// Dynamic reverse-mode tape. Every op computes its value eagerly; when the
// graph is recording and an input requires a gradient, a backward closure is
// appended. Backward() replays the closures in reverse creation order, which
// is a valid topological order because ops only consume existing tensors.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t tape_size() const { return tape_.size(); }
  // Throw a training error as soon as an op produces NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  // Seeds d(loss)/d(loss) = 1 and runs the tape. Usage error if the loss is
  // not a scalar or is detached from every parameter.
  void Backward(const Var& loss);

  // Elementwise (same shapes).
  Var Add(const Var& a, const Var& b);
  Var Sub(const Var& a, const Var& b);
  Var Mul(const Var& a, const Var& b);
  Var Scale(const Var& a, double s);
  Var AddScalar(const Var& a, double s);
  Var Tanh(const Var& a);
  Var Sigmoid(const Var& a);
  Var LeakyRelu(const Var& a, double slope);
  Var Abs(const Var& a);
  Var Square(const Var& a);
  // a^p for a >= 0. The derivative at 0 is taken as 0 and, for p < 1, the
  // base is floored at 1e-8 when forming the derivative.
  Var Pow(const Var& a, double p);
  Var Magnitude(const Var& re, const Var& im);

  // Reductions.
  Var Sum(const Var& a);
  Var Mean(const Var& a);
  Var MeanLastAxis(const Var& a);

  // Shape manipulation.
  Var Reshape(const Var& a, Shape shape);
  Var Permute(const Var& a, const std::vector<int>& perm);
  Var Slice(const Var& a, int axis, int64_t begin, int64_t end);
  Var Concat(const std::vector<Var>& parts, int axis);
  Var BroadcastTo(const Var& a, Shape shape);
  Var Detach(const Var& a);

  // Layers. Linear treats every leading index of x as a row; bias optional.
  Var Linear(const Var& x, const Var& weight, const Var& bias);
  Var Glu(const Var& x);
  Var LayerNorm(const Var& x, const Var& gamma, const Var& beta,
                double eps = 1e-5);
  // Channels-last; statistics over all leading indices when training.
  Var BatchNorm(const Var& x, const Var& gamma, const Var& beta,
                BatchNormBuffers& buffers, bool training);
  // x [S, B, in] scanned over S (backwards when reverse). h0/c0 [B, H] may
  // be undefined for zero state. With reset_every = R > 0 the state is zeroed
  // before every processed step whose index is a positive multiple of R.
  LstmResult Lstm(const Var& x, const Var& h0, const Var& c0,
                  const LstmWeights& w, bool reverse = false,
                  int reset_every = 0);
  // x [B, C, H, W], weight [O, C, KH, KW], bias [O].
  Var Conv2d(const Var& x, const Var& weight, const Var& bias, int stride_h,
             int stride_w, int pad_h, int pad_w);

  // Signal ops. Stft maps [B, L] to (re, im), each [B, T, F].
  std::pair<Var, Var> Stft(const Var& x, const dsp::StftConfig& cfg);
  Var Istft(const Var& re, const Var& im, const dsp::StftConfig& cfg,
            std::size_t out_len);

 private:
  Var MakeOutput(Shape shape, std::vector<double> values,
                 std::initializer_list<const Var*> inputs, const char* op);
  void Record(const Var& out, std::function<void()> fn);

  bool record_;
  bool check_finite_ = false;
  std::vector<std::function<void()>> tape_;
};

}  // namespace bsrnn::nn

#endif  // BSRNN_NN_GRAPH_H_
