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

#include <cmath>

#include "bsrnn/error.h"
#include "bsrnn/nn/graph.h"
#include "bsrnn/nn/optim.h"
#include "bsrnn/nn/params.h"
#include "doctest.h"
#include "test_util.h"

using namespace bsrnn;
using namespace bsrnn::nn;

namespace {

Var RandomParam(Shape shape, Rng& rng, double scale = 1.0) {
  const int64_t n = NumElements(shape);
  return Var::Parameter(std::move(shape), testing::Normals(n, rng, scale));
}

// Projects an op output onto fixed random weights so every element matters.
Var Project(Graph& g, const Var& out, uint64_t seed) {
  Rng rng(seed);
  Var w = Var::Constant(out.shape(), testing::Normals(out.numel(), rng));
  return g.Sum(g.Mul(out, w));
}

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Worst central-difference error over every input of `build`.
double GradCheck(const Builder& build, std::vector<Var> inputs, uint64_t seed,
                 int probes = 12) {
  auto loss_value = [&]() {
    Graph g(false);
    return Project(g, build(g, inputs), seed).item();
  };
  for (Var& v : inputs) v.ZeroGrad();
  Graph g;
  g.Backward(Project(g, build(g, inputs), seed));
  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    std::vector<double> analytic(inputs[i].grad().begin(), inputs[i].grad().end());
    worst = std::max(worst, testing::CheckGradient(inputs[i], analytic, loss_value,
                                                   probes, seed + i));
  }
  return worst;
}

constexpr int kSeeds = 50;

}  // namespace

TEST_CASE("elementwise and shape ops pass gradient checks") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(100 + s);
    Var a = RandomParam({2, 3, 4}, rng), b = RandomParam({2, 3, 4}, rng);
    Var pos = Var::Parameter({2, 3, 4}, std::vector<double>(24));
    for (double& v : pos.mutable_value()) v = 0.1 + rng.Uniform();
    worst = std::max(worst, GradCheck([](Graph& g, const std::vector<Var>& in) {
      Var x = g.Add(g.Mul(in[0], in[1]), g.Sub(g.Tanh(in[0]), g.Sigmoid(in[1])));
      x = g.Add(x, g.Scale(g.Square(g.LeakyRelu(in[1], 0.2)), 0.5));
      x = g.Add(x, g.AddScalar(g.Pow(in[2], 0.3), 1.0));
      x = g.Add(x, g.Magnitude(in[0], in[1]));
      x = g.Add(x, g.Abs(in[0]));
      return x;
    }, {a, b, pos}, s));
    worst = std::max(worst, GradCheck([](Graph& g, const std::vector<Var>& in) {
      Var p = g.Permute(in[0], {2, 0, 1});
      Var r = g.Reshape(p, {8, 3});
      Var sl = g.Slice(r, 0, 2, 6);
      Var c = g.Concat({sl, g.Slice(g.Reshape(in[1], {8, 3}), 0, 0, 3)}, 0);
      Var bc = g.BroadcastTo(g.Slice(c, 1, 1, 2), {2, 7, 3});
      return g.Add(g.MeanLastAxis(bc), g.BroadcastTo(g.Mean(in[0]), {2, 7}));
    }, {a, b}, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("linear, glu and layer norm pass gradient checks") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(200 + s);
    Var x = RandomParam({3, 2, 5}, rng), w = RandomParam({6, 5}, rng),
        b = RandomParam({6}, rng), gm = RandomParam({6}, rng),
        bt = RandomParam({6}, rng);
    worst = std::max(worst, GradCheck([](Graph& g, const std::vector<Var>& in) {
      Var y = g.Linear(in[0], in[1], in[2]);
      Var n = g.LayerNorm(y, in[3], in[4]);
      return g.Glu(g.Tanh(n));
    }, {x, w, b, gm, bt}, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("batch norm passes gradient checks in both modes") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(300 + s);
    Var x = RandomParam({4, 3, 5}, rng), gm = RandomParam({5}, rng),
        bt = RandomParam({5}, rng);
    for (bool training : {true, false}) {
      worst = std::max(worst, GradCheck([training](Graph& g, const std::vector<Var>& in) {
        BatchNormBuffers buf{Var::Constant({5}, {0.1, -0.2, 0.3, 0.0, 0.5}),
                             Var::Constant({5}, {1.0, 2.0, 0.5, 1.5, 0.7})};
        return g.BatchNorm(in[0], in[1], in[2], buf, training);
      }, {x, gm, bt}, s));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("lstm passes gradient checks with states, reversal and resets") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(400 + s);
    const int64_t hid = 3, in = 4;
    Var x = RandomParam({5, 2, in}, rng), h0 = RandomParam({2, hid}, rng),
        c0 = RandomParam({2, hid}, rng), wih = RandomParam({4 * hid, in}, rng, 0.5),
        whh = RandomParam({4 * hid, hid}, rng, 0.5),
        bias = RandomParam({4 * hid}, rng, 0.5);
    const bool reverse = s % 2 == 1;
    const int reset = (s % 3 == 0) ? 2 : 0;
    worst = std::max(worst, GradCheck([=](Graph& g, const std::vector<Var>& v) {
      LstmWeights w{v[3], v[4], v[5]};
      LstmResult r = g.Lstm(v[0], v[1], v[2], w, reverse, reset);
      Var tail = g.Reshape(g.Concat({r.h_final, r.c_final}, 1), {1, 2, 2 * hid});
      return g.Concat({g.Reshape(r.output, {1, 5 * 2 * hid}),
                       g.Reshape(tail, {1, 4 * hid})}, 1);
    }, {x, h0, c0, wih, whh, bias}, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("conv2d passes gradient checks") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(500 + s);
    Var x = RandomParam({2, 2, 7, 6}, rng), w = RandomParam({3, 2, 3, 3}, rng),
        b = RandomParam({3}, rng);
    worst = std::max(worst, GradCheck([](Graph& g, const std::vector<Var>& in) {
      return g.LeakyRelu(g.Conv2d(in[0], in[1], in[2], 2, 2, 1, 1), 0.2);
    }, {x, w, b}, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("stft and istft ops pass gradient checks") {
  const dsp::StftConfig cfg = dsp::StftConfig::FromMs(16000, 2, 1);
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    Rng rng(600 + s);
    Var x = RandomParam({2, 32 * 5}, rng);
    worst = std::max(worst, GradCheck([&](Graph& g, const std::vector<Var>& in) {
      auto [re, im] = g.Stft(in[0], cfg);
      Var y = g.Istft(g.Tanh(re), im, cfg, 32 * 5 - 3);
      return g.Add(g.Sum(g.Magnitude(re, im)), g.Sum(y));
    }, {x}, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("three layer toy network matches finite differences") {
  double worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(700 + s);
    std::vector<Var> p = {RandomParam({8, 4}, rng),  RandomParam({8}, rng),
                          RandomParam({8, 8}, rng),  RandomParam({8}, rng),
                          RandomParam({2, 8}, rng),  RandomParam({2}, rng)};
    Var x = Var::Constant({5, 4}, testing::Normals(20, rng));
    worst = std::max(worst, GradCheck([x](Graph& g, const std::vector<Var>& v) {
      Var h = g.Tanh(g.Linear(x, v[0], v[1]));
      h = g.Sigmoid(g.Linear(h, v[2], v[3]));
      return g.Linear(h, v[4], v[5]);
    }, p, s));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("linear layer gradient is the outer product with the input") {
  Var w = Var::Parameter({3, 2}, {1, 2, 3, 4, 5, 6});
  Var x = Var::Constant({2}, {0.5, -1.5});
  Graph g;
  g.Backward(g.Sum(g.Linear(x, w, Var())));
  for (int r = 0; r < 3; ++r) {
    CHECK(w.grad()[r * 2] == 0.5);
    CHECK(w.grad()[r * 2 + 1] == -1.5);
  }
}

TEST_CASE("constant zero loss gives zero gradients") {
  Rng rng(1);
  Var w = RandomParam({3, 2}, rng);
  Graph g;
  g.Backward(g.Scale(g.Sum(w), 0.0));
  for (double v : w.grad()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects detached and non-scalar losses") {
  Graph g;
  Var c = Var::Constant({1}, {2.0});
  CHECK_THROWS_AS(g.Backward(g.Tanh(c)), Error);
  Rng rng(2);
  Var w = RandomParam({2}, rng);
  try {
    g.Backward(g.Tanh(w));
    FAIL("expected usage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
  try {
    g.Backward(g.Sum(g.Detach(w)));
    FAIL("expected usage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
}

TEST_CASE("shape mismatches are parameter errors") {
  Graph g;
  Var a = Var::Zeros({2, 3}), b = Var::Zeros({3, 2});
  try {
    g.Add(a, b);
    FAIL("expected parameter error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParameter);
  }
  CHECK_THROWS_AS(g.Linear(a, Var::Zeros({4, 2}), Var()), Error);
  CHECK_THROWS_AS(g.Glu(Var::Zeros({3})), Error);
}

TEST_CASE("glu of [x | 0] halves x") {
  Graph g(false);
  Var y = g.Glu(Var::Constant({4}, {2.0, -6.0, 0.0, 0.0}));
  CHECK(y.value()[0] == 1.0);
  CHECK(y.value()[1] == -3.0);
}

TEST_CASE("lstm step with zero weights halves the cell") {
  Graph g(false);
  const int64_t hid = 3;
  LstmWeights w{Var::Zeros({4 * hid, 2}), Var::Zeros({4 * hid, hid}),
                Var::Zeros({4 * hid})};
  Var x = Var::Constant({1, 1, 2}, {0.7, -0.4});
  Var c0 = Var::Constant({1, hid}, {0.2, -0.6, 1.0});
  LstmResult r = g.Lstm(x, Var::Zeros({1, hid}), c0, w);
  for (int j = 0; j < hid; ++j) {
    CHECK(r.c_final.value()[j] == doctest::Approx(0.5 * c0.value()[j]).epsilon(1e-15));
    CHECK(r.h_final.value()[j] ==
          doctest::Approx(0.5 * std::tanh(0.5 * c0.value()[j])).epsilon(1e-15));
  }
  LstmResult z = g.Lstm(x, Var(), Var(), w);
  for (int j = 0; j < hid; ++j) {
    CHECK(z.h_final.value()[j] == 0.0);
    CHECK(z.c_final.value()[j] == 0.0);
  }
}

TEST_CASE("lstm resets match restarting the scan") {
  Rng rng(3);
  ParamStore store;
  LstmWeights w = AddLstm(store, "l", 2, 4, rng);
  Var x = Var::Constant({6, 1, 2}, testing::Normals(12, rng));
  Graph g(false);
  LstmResult full = g.Lstm(x, Var(), Var(), w, false, 4);
  LstmResult tail = g.Lstm(g.Slice(x, 0, 4, 6), Var(), Var(), w);
  for (int i = 0; i < 8; ++i) {
    CHECK(full.output.value()[4 * 4 + i] == tail.output.value()[i]);
  }
}

TEST_CASE("layer norm of a constant vector is zero before the affine map") {
  Graph g(false);
  Var y = g.LayerNorm(Var::Constant({4}, {3, 3, 3, 3}), Var::Constant({4}, {2, 2, 2, 2}),
                      Var::Zeros({4}));
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("batch norm inference is frame local and training updates stats") {
  Rng rng(4);
  BatchNormBuffers buf{Var::Constant({3}, {0.5, -0.5, 1.0}),
                       Var::Constant({3}, {2.0, 1.0, 0.5})};
  Var gm = Var::Constant({3}, {1.0, 2.0, 0.5}), bt = Var::Constant({3}, {0, 1, 0});
  Var x = Var::Constant({4, 3}, testing::Normals(12, rng));
  Graph g(false);
  Var y = g.BatchNorm(x, gm, bt, buf, false);
  Var x2 = Var::Constant({4, 3}, std::vector<double>(x.value().begin(), x.value().end()));
  for (int j = 3; j < 12; ++j) x2.mutable_value()[j] += 5.0;
  Var y2 = g.BatchNorm(x2, gm, bt, buf, false);
  for (int j = 0; j < 3; ++j) CHECK(y.value()[j] == y2.value()[j]);

  Var ones = Var::Constant({2, 3}, {1, 1, 1, 3, 3, 3});
  g.BatchNorm(ones, gm, bt, buf, true);
  CHECK(buf.running_mean.value()[0] == doctest::Approx(0.99 * 0.5 + 0.01 * 2.0));
  // Unbiased batch variance of {1, 3} is 2.
  CHECK(buf.running_var.value()[0] == doctest::Approx(0.99 * 2.0 + 0.01 * 2.0));
}

TEST_CASE("clip grad norm") {
  ParamStore store;
  Var a = store.Add("a", {2}, {0, 0});
  Var b = store.Add("b", {1}, {0});
  a.mutable_grad()[0] = 6.0;
  a.mutable_grad()[1] = 0.0;
  b.mutable_grad()[0] = 8.0;
  CHECK(ClipGradNorm(store, 5.0) == doctest::Approx(10.0));
  CHECK(a.grad()[0] == doctest::Approx(3.0));
  CHECK(b.grad()[0] == doctest::Approx(4.0));
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 0.0;
  CHECK(ClipGradNorm(store, 5.0) == doctest::Approx(3.0));
  CHECK(a.grad()[0] == 3.0);
}

TEST_CASE("adam converges on a quadratic and rejects nan gradients") {
  ParamStore store;
  Var w = store.Add("w", {1}, {1.0});
  Adam adam(&store, AdamConfig{.float32_state = false});
  for (int i = 0; i < 200; ++i) {
    store.ZeroGrad();
    Graph g;
    g.Backward(g.Sum(g.Square(w)));
    adam.Step(0.1);
  }
  CHECK(std::abs(w.value()[0]) < 1e-2);

  w.mutable_grad()[0] = std::nan("");
  try {
    adam.Step(0.1);
    FAIL("expected training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTraining);
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
}

TEST_CASE("adam update is deterministic") {
  auto run = []() {
    ParamStore store;
    Rng rng(8);
    LinearParams p = AddLinear(store, "fc", 3, 2, rng);
    Adam adam(&store);
    Var x = Var::Constant({4, 3}, testing::Normals(12, rng));
    for (int i = 0; i < 5; ++i) {
      store.ZeroGrad();
      Graph g;
      g.Backward(g.Sum(g.Square(g.Linear(x, p.weight, p.bias))));
      adam.Step(1e-2);
    }
    return std::vector<double>(p.weight.value().begin(), p.weight.value().end());
  };
  CHECK(run() == run());
}
