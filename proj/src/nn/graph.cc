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

#include "bsrnn/nn/graph.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "bsrnn/error.h"

namespace bsrnn::nn {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

void CheckSameShape(const Var& a, const Var& b, const char* op) {
  BSRNN_CHECK(a.defined() && b.defined(), ErrorKind::kParameter,
              std::string(op) + ": undefined operand");
  BSRNN_CHECK(a.shape() == b.shape(), ErrorKind::kParameter,
              std::string(op) + ": shape mismatch " + ShapeString(a.shape()) +
                  " vs " + ShapeString(b.shape()));
}

double SigmoidScalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<int64_t> Strides(const Shape& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    s[i] = s[i + 1] * shape[i + 1];
  }
  return s;
}

int NormalizeAxis(int axis, int rank) {
  if (axis < 0) axis += rank;
  BSRNN_CHECK(axis >= 0 && axis < rank, ErrorKind::kParameter,
              "axis out of range");
  return axis;
}

}  // namespace

Var Graph::MakeOutput(Shape shape, std::vector<double> values,
                      std::initializer_list<const Var*> inputs,
                      const char* op) {
  Var out = Var::Constant(std::move(shape), std::move(values));
  if (record_) {
    for (const Var* in : inputs) {
      if (in->defined() && in->requires_grad()) {
        out.set_requires_grad(true);
        break;
      }
    }
  }
  if (check_finite_) {
    for (double v : out.value()) {
      BSRNN_CHECK(std::isfinite(v), ErrorKind::kTraining,
                  std::string("non-finite value produced by ") + op);
    }
  }
  return out;
}

void Graph::Record(const Var& out, std::function<void()> fn) {
  if (out.requires_grad()) tape_.push_back(std::move(fn));
}

void Graph::Backward(const Var& loss) {
  BSRNN_CHECK(loss.defined() && loss.numel() == 1, ErrorKind::kUsage,
              "backward needs a scalar loss");
  BSRNN_CHECK(record_, ErrorKind::kUsage, "backward on a non-recording graph");
  BSRNN_CHECK(loss.requires_grad(), ErrorKind::kUsage,
              "loss is detached from every parameter");
  Var seed = loss;
  seed.mutable_grad()[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  tape_.clear();
}

// ---------------------------------------------------------------------------
// Elementwise

Var Graph::Add(const Var& a, const Var& b) {
  CheckSameShape(a, b, "add");
  std::vector<double> v(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) v[i] = a.value()[i] + b.value()[i];
  Var out = MakeOutput(a.shape(), std::move(v), {&a, &b}, "add");
  Record(out, [a, b, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    for (const Var* in : {&a, &b}) {
      if (!in->requires_grad()) continue;
      auto gi = in->mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
  return out;
}

Var Graph::Sub(const Var& a, const Var& b) {
  CheckSameShape(a, b, "sub");
  std::vector<double> v(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) v[i] = a.value()[i] - b.value()[i];
  Var out = MakeOutput(a.shape(), std::move(v), {&a, &b}, "sub");
  Record(out, [a, b, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Var Graph::Mul(const Var& a, const Var& b) {
  CheckSameShape(a, b, "mul");
  std::vector<double> v(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) v[i] = a.value()[i] * b.value()[i];
  Var out = MakeOutput(a.shape(), std::move(v), {&a, &b}, "mul");
  Record(out, [a, b, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
  return out;
}

Var Graph::Scale(const Var& a, double s) {
  std::vector<double> v(a.value().begin(), a.value().end());
  for (double& x : v) x *= s;
  Var out = MakeOutput(a.shape(), std::move(v), {&a}, "scale");
  Record(out, [a, out, s]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
  return out;
}

Var Graph::AddScalar(const Var& a, double s) {
  std::vector<double> v(a.value().begin(), a.value().end());
  for (double& x : v) x += s;
  Var out = MakeOutput(a.shape(), std::move(v), {&a}, "add_scalar");
  Record(out, [a, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

namespace {

// Unary op whose derivative is a function of (input, output).
template <typename F, typename D>
Var Unary(Graph* graph, const Var& a, const char* name, F f, D dfdx,
          std::function<Var(Shape, std::vector<double>, const Var&)> make,
          std::function<void(const Var&, std::function<void()>)> record) {
  (void)graph;
  std::vector<double> v(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) v[i] = f(a.value()[i]);
  Var out = make(a.shape(), std::move(v), a);
  record(out, [a, out, dfdx]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * dfdx(a.value()[i], out.value()[i]);
    }
  });
  (void)name;
  return out;
}

}  // namespace

#define BSRNN_UNARY(NAME, FWD, DERIV)                                        \
  Unary(                                                                     \
      this, a, NAME, FWD, DERIV,                                             \
      [this](Shape s, std::vector<double> v, const Var& in) {                \
        return MakeOutput(std::move(s), std::move(v), {&in}, NAME);          \
      },                                                                     \
      [this](const Var& o, std::function<void()> fn) { Record(o, std::move(fn)); })

Var Graph::Tanh(const Var& a) {
  return BSRNN_UNARY(
      "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Graph::Sigmoid(const Var& a) {
  return BSRNN_UNARY(
      "sigmoid", [](double x) { return SigmoidScalar(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var Graph::LeakyRelu(const Var& a, double slope) {
  return BSRNN_UNARY(
      "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var Graph::Abs(const Var& a) {
  return BSRNN_UNARY(
      "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var Graph::Square(const Var& a) {
  return BSRNN_UNARY(
      "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var Graph::Pow(const Var& a, double p) {
  BSRNN_CHECK(p > 0.0, ErrorKind::kParameter, "pow exponent must be > 0");
  return BSRNN_UNARY(
      "pow", [p](double x) { return std::pow(x, p); },
      [p](double x, double) {
        if (x <= 0.0) return 0.0;
        const double base = p < 1.0 ? std::max(x, 1e-8) : x;
        return p * std::pow(base, p - 1.0);
      });
}

#undef BSRNN_UNARY

Var Graph::Magnitude(const Var& re, const Var& im) {
  CheckSameShape(re, im, "magnitude");
  std::vector<double> v(re.numel());
  for (int64_t i = 0; i < re.numel(); ++i) {
    v[i] = std::hypot(re.value()[i], im.value()[i]);
  }
  Var out = MakeOutput(re.shape(), std::move(v), {&re, &im}, "magnitude");
  Record(out, [re, im, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto m = out.value();
    if (re.requires_grad()) {
      auto gr = re.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) {
        if (m[i] > 0) gr[i] += g[i] * re.value()[i] / m[i];
      }
    }
    if (im.requires_grad()) {
      auto gi = im.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) {
        if (m[i] > 0) gi[i] += g[i] * im.value()[i] / m[i];
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Var Graph::Sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  Var out = MakeOutput({}, {s}, {&a}, "sum");
  Record(out, [a, out]() mutable {
    if (!out.has_grad()) return;
    const double g = out.grad()[0];
    for (double& x : a.mutable_grad()) x += g;
  });
  return out;
}

Var Graph::Mean(const Var& a) {
  BSRNN_CHECK(a.numel() > 0, ErrorKind::kParameter, "mean of empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.numel()));
}

Var Graph::MeanLastAxis(const Var& a) {
  BSRNN_CHECK(a.rank() >= 1, ErrorKind::kParameter, "mean_last needs rank >= 1");
  const int64_t d = a.dim(-1);
  const int64_t rows = a.numel() / d;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<double> v(rows, 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += a.value()[r * d + j];
    v[r] = s / d;
  }
  Var out = MakeOutput(std::move(shape), std::move(v), {&a}, "mean_last");
  Record(out, [a, out, d, rows]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < d; ++j) ga[r * d + j] += g[r] / d;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation

Var Graph::Reshape(const Var& a, Shape shape) {
  BSRNN_CHECK(NumElements(shape) == a.numel(), ErrorKind::kParameter,
              "reshape " + ShapeString(a.shape()) + " -> " + ShapeString(shape));
  Var out = MakeOutput(std::move(shape),
                       std::vector<double>(a.value().begin(), a.value().end()),
                       {&a}, "reshape");
  Record(out, [a, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Var Graph::Permute(const Var& a, const std::vector<int>& perm) {
  const int r = a.rank();
  BSRNN_CHECK(static_cast<int>(perm.size()) == r, ErrorKind::kParameter,
              "permutation rank mismatch");
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = a.shape()[perm[i]];
  const auto in_strides = Strides(a.shape());
  // Source offset for every destination element, in destination order.
  std::vector<int64_t> src(a.numel());
  std::vector<int64_t> idx(r, 0);
  for (int64_t o = 0; o < a.numel(); ++o) {
    int64_t off = 0;
    for (int i = 0; i < r; ++i) off += idx[i] * in_strides[perm[i]];
    src[o] = off;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> v(a.numel());
  for (int64_t o = 0; o < a.numel(); ++o) v[o] = a.value()[src[o]];
  Var out = MakeOutput(std::move(out_shape), std::move(v), {&a}, "permute");
  Record(out, [a, out, src = std::move(src)]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t o = 0; o < g.size(); ++o) ga[src[o]] += g[o];
  });
  return out;
}

Var Graph::Slice(const Var& a, int axis, int64_t begin, int64_t end) {
  axis = NormalizeAxis(axis, a.rank());
  const int64_t dim = a.shape()[axis];
  BSRNN_CHECK(0 <= begin && begin <= end && end <= dim, ErrorKind::kParameter,
              "slice bounds out of range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.shape()[i];
  for (int i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
  const int64_t len = end - begin;
  Shape shape = a.shape();
  shape[axis] = len;
  std::vector<double> v(outer * len * inner);
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = a.value().data() + (o * dim + begin) * inner;
    std::copy(src, src + len * inner, v.begin() + o * len * inner);
  }
  Var out = MakeOutput(std::move(shape), std::move(v), {&a}, "slice");
  Record(out, [a, out, outer, inner, dim, begin, len]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t j = 0; j < len * inner; ++j) {
        ga[(o * dim + begin) * inner + j] += g[o * len * inner + j];
      }
    }
  });
  return out;
}

Var Graph::Concat(const std::vector<Var>& parts, int axis) {
  BSRNN_CHECK(!parts.empty(), ErrorKind::kParameter, "concat of nothing");
  const int r = parts[0].rank();
  axis = NormalizeAxis(axis, r);
  Shape shape = parts[0].shape();
  int64_t total = 0;
  for (const Var& p : parts) {
    BSRNN_CHECK(p.rank() == r, ErrorKind::kParameter, "concat rank mismatch");
    for (int i = 0; i < r; ++i) {
      BSRNN_CHECK(i == axis || p.shape()[i] == shape[i], ErrorKind::kParameter,
                  "concat shape mismatch " + ShapeString(p.shape()));
    }
    total += p.shape()[axis];
  }
  shape[axis] = total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= shape[i];
  std::vector<double> v(outer * total * inner);
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const int64_t len = p.shape()[axis];
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(p.value().data() + o * len * inner,
                p.value().data() + (o + 1) * len * inner,
                v.begin() + (o * total + off) * inner);
    }
    off += len;
  }
  bool any = false;
  for (const Var& p : parts) any = any || (p.requires_grad() && record_);
  Var out = Var::Constant(std::move(shape), std::move(v));
  out.set_requires_grad(any);
  Record(out, [parts, out, offsets, outer, inner, total, axis]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    for (size_t k = 0; k < parts.size(); ++k) {
      const Var& p = parts[k];
      if (!p.requires_grad()) continue;
      const int64_t len = p.shape()[axis];
      auto gp = p.mutable_grad();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t j = 0; j < len * inner; ++j) {
          gp[o * len * inner + j] += g[(o * total + offsets[k]) * inner + j];
        }
      }
    }
  });
  return out;
}

Var Graph::BroadcastTo(const Var& a, Shape shape) {
  const int r = static_cast<int>(shape.size());
  BSRNN_CHECK(a.rank() <= r, ErrorKind::kParameter, "broadcast to lower rank");
  Shape src_shape(r - a.rank(), 1);
  src_shape.insert(src_shape.end(), a.shape().begin(), a.shape().end());
  for (int i = 0; i < r; ++i) {
    BSRNN_CHECK(src_shape[i] == 1 || src_shape[i] == shape[i],
                ErrorKind::kParameter,
                "cannot broadcast " + ShapeString(a.shape()) + " to " +
                    ShapeString(shape));
  }
  const auto src_strides = Strides(src_shape);
  const int64_t n = NumElements(shape);
  std::vector<int64_t> src(n);
  std::vector<int64_t> idx(r, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t off = 0;
    for (int i = 0; i < r; ++i) {
      if (src_shape[i] != 1) off += idx[i] * src_strides[i];
    }
    src[o] = off;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> v(n);
  for (int64_t o = 0; o < n; ++o) v[o] = a.value()[src[o]];
  Var out = MakeOutput(std::move(shape), std::move(v), {&a}, "broadcast");
  Record(out, [a, out, src = std::move(src)]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto ga = a.mutable_grad();
    for (size_t o = 0; o < g.size(); ++o) ga[src[o]] += g[o];
  });
  return out;
}

Var Graph::Detach(const Var& a) {
  return Var::Constant(a.shape(),
                       std::vector<double>(a.value().begin(), a.value().end()));
}

// ---------------------------------------------------------------------------
// Layers

Var Graph::Linear(const Var& x, const Var& weight, const Var& bias) {
  BSRNN_CHECK(weight.rank() == 2, ErrorKind::kParameter, "linear weight rank");
  const int64_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  BSRNN_CHECK(x.rank() >= 1 && x.dim(-1) == in_dim, ErrorKind::kParameter,
              "linear input " + ShapeString(x.shape()) + " vs weight " +
                  ShapeString(weight.shape()));
  if (bias.defined()) {
    BSRNN_CHECK(bias.numel() == out_dim, ErrorKind::kParameter,
                "linear bias size");
  }
  const int64_t rows = x.numel() / in_dim;
  Shape shape = x.shape();
  shape.back() = out_dim;
  std::vector<double> v(rows * out_dim);
  {
    CMapR X(x.value().data(), rows, in_dim);
    CMapR W(weight.value().data(), out_dim, in_dim);
    MapR Y(v.data(), rows, out_dim);
    Y.noalias() = X * W.transpose();
    if (bias.defined()) {
      Y.rowwise() += CVecMap(bias.value().data(), out_dim).transpose();
    }
  }
  Var out = MakeOutput(std::move(shape), std::move(v), {&x, &weight, &bias},
                       "linear");
  Record(out, [x, weight, bias, out, rows, in_dim, out_dim]() mutable {
    if (!out.has_grad()) return;
    CMapR G(out.grad().data(), rows, out_dim);
    if (x.requires_grad()) {
      MapR GX(x.mutable_grad().data(), rows, in_dim);
      GX.noalias() += G * CMapR(weight.value().data(), out_dim, in_dim);
    }
    if (weight.requires_grad()) {
      MapR GW(weight.mutable_grad().data(), out_dim, in_dim);
      GW.noalias() += G.transpose() * CMapR(x.value().data(), rows, in_dim);
    }
    if (bias.defined() && bias.requires_grad()) {
      VecMap(bias.mutable_grad().data(), out_dim) += G.colwise().sum().transpose();
    }
  });
  return out;
}

Var Graph::Glu(const Var& x) {
  const int64_t two_d = x.dim(-1);
  BSRNN_CHECK(two_d % 2 == 0, ErrorKind::kParameter, "GLU needs an even last dim");
  const int64_t d = two_d / 2;
  const int64_t rows = x.numel() / two_d;
  Shape shape = x.shape();
  shape.back() = d;
  std::vector<double> v(rows * d), gate(rows * d);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < d; ++j) {
      gate[r * d + j] = SigmoidScalar(x.value()[r * two_d + d + j]);
      v[r * d + j] = x.value()[r * two_d + j] * gate[r * d + j];
    }
  }
  Var out = MakeOutput(std::move(shape), std::move(v), {&x}, "glu");
  Record(out, [x, out, gate = std::move(gate), rows, d, two_d]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < d; ++j) {
        const double s = gate[r * d + j];
        const double a = x.value()[r * two_d + j];
        gx[r * two_d + j] += g[r * d + j] * s;
        gx[r * two_d + d + j] += g[r * d + j] * a * s * (1.0 - s);
      }
    }
  });
  return out;
}

Var Graph::LayerNorm(const Var& x, const Var& gamma, const Var& beta,
                     double eps) {
  const int64_t d = x.dim(-1);
  BSRNN_CHECK(gamma.numel() == d && beta.numel() == d, ErrorKind::kParameter,
              "layer norm affine size");
  const int64_t rows = x.numel() / d;
  std::vector<double> v(x.numel()), xhat(x.numel()), inv_std(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.value().data() + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= d;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mean) * inv_std[r];
      v[r * d + j] = xhat[r * d + j] * gamma.value()[j] + beta.value()[j];
    }
  }
  Var out = MakeOutput(x.shape(), std::move(v), {&x, &gamma, &beta},
                       "layer_norm");
  Record(out, [x, gamma, beta, out, xhat = std::move(xhat),
               inv_std = std::move(inv_std), rows, d]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (gamma.requires_grad() || beta.requires_grad()) {
      auto gg = gamma.mutable_grad();
      auto gb = beta.mutable_grad();
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < d; ++j) {
          gg[j] += g[r * d + j] * xhat[r * d + j];
          gb[j] += g[r * d + j];
        }
      }
    }
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (int64_t r = 0; r < rows; ++r) {
        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          const double dxh = g[r * d + j] * gamma.value()[j];
          mean_dxh += dxh;
          mean_dxh_xh += dxh * xhat[r * d + j];
        }
        mean_dxh /= d;
        mean_dxh_xh /= d;
        for (int64_t j = 0; j < d; ++j) {
          const double dxh = g[r * d + j] * gamma.value()[j];
          gx[r * d + j] +=
              inv_std[r] * (dxh - mean_dxh - xhat[r * d + j] * mean_dxh_xh);
        }
      }
    }
  });
  return out;
}

Var Graph::BatchNorm(const Var& x, const Var& gamma, const Var& beta,
                     BatchNormBuffers& buffers, bool training) {
  const int64_t c = x.dim(-1);
  BSRNN_CHECK(gamma.numel() == c && beta.numel() == c &&
                  buffers.running_mean.numel() == c &&
                  buffers.running_var.numel() == c,
              ErrorKind::kParameter, "batch norm channel count");
  const int64_t rows = x.numel() / c;
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (training) {
    BSRNN_CHECK(rows > 1, ErrorKind::kParameter,
                "batch norm training needs more than one row");
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < c; ++j) mean[j] += x.value()[r * c + j];
    }
    for (double& m : mean) m /= rows;
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < c; ++j) {
        const double dv = x.value()[r * c + j] - mean[j];
        var[j] += dv * dv;
      }
    }
    for (double& s : var) s /= rows;
    auto rm = buffers.running_mean.mutable_value();
    auto rv = buffers.running_var.mutable_value();
    const double m = buffers.momentum;
    for (int64_t j = 0; j < c; ++j) {
      rm[j] = m * rm[j] + (1.0 - m) * mean[j];
      rv[j] = m * rv[j] + (1.0 - m) * var[j] * rows / (rows - 1);
    }
  } else {
    for (int64_t j = 0; j < c; ++j) {
      mean[j] = buffers.running_mean.value()[j];
      var[j] = buffers.running_var.value()[j];
    }
  }
  std::vector<double> inv_std(c), xhat(x.numel()), v(x.numel());
  for (int64_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + buffers.eps);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < c; ++j) {
      const int64_t i = r * c + j;
      xhat[i] = (x.value()[i] - mean[j]) * inv_std[j];
      v[i] = xhat[i] * gamma.value()[j] + beta.value()[j];
    }
  }
  Var out = MakeOutput(x.shape(), std::move(v), {&x, &gamma, &beta},
                       "batch_norm");
  Record(out, [x, gamma, beta, out, xhat = std::move(xhat),
               inv_std = std::move(inv_std), rows, c, training]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    if (gamma.requires_grad() || beta.requires_grad()) {
      auto gg = gamma.mutable_grad();
      auto gb = beta.mutable_grad();
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < c; ++j) {
          gg[j] += g[r * c + j] * xhat[r * c + j];
          gb[j] += g[r * c + j];
        }
      }
    }
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    if (!training) {
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < c; ++j) {
          gx[r * c + j] += g[r * c + j] * gamma.value()[j] * inv_std[j];
        }
      }
      return;
    }
    std::vector<double> mean_d(c, 0.0), mean_d_xh(c, 0.0);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < c; ++j) {
        const double d = g[r * c + j] * gamma.value()[j];
        mean_d[j] += d;
        mean_d_xh[j] += d * xhat[r * c + j];
      }
    }
    for (int64_t j = 0; j < c; ++j) {
      mean_d[j] /= rows;
      mean_d_xh[j] /= rows;
    }
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < c; ++j) {
        const int64_t i = r * c + j;
        const double d = g[i] * gamma.value()[j];
        gx[i] += inv_std[j] * (d - mean_d[j] - xhat[i] * mean_d_xh[j]);
      }
    }
  });
  return out;
}

LstmResult Graph::Lstm(const Var& x, const Var& h0, const Var& c0,
                       const LstmWeights& w, bool reverse, int reset_every) {
  BSRNN_CHECK(x.rank() == 3, ErrorKind::kParameter,
              "lstm input must be [S, B, in], got " + ShapeString(x.shape()));
  const int64_t steps = x.dim(0), batch = x.dim(1), in_dim = x.dim(2);
  const int64_t hidden = w.hidden();
  const int64_t gates = 4 * hidden;
  BSRNN_CHECK(w.w_ih.dim(0) == gates && w.w_ih.dim(1) == in_dim &&
                  w.w_hh.dim(0) == gates && w.w_hh.dim(1) == hidden &&
                  w.bias.numel() == gates,
              ErrorKind::kParameter,
              "lstm weights do not match input " + ShapeString(x.shape()));
  for (const Var* s : {&h0, &c0}) {
    if (s->defined()) {
      BSRNN_CHECK(s->numel() == batch * hidden, ErrorKind::kParameter,
                  "lstm initial state must be [B, H]");
    }
  }

  const int64_t bh = batch * hidden;
  // Input projections for every step at once.
  std::vector<double> act(steps * batch * gates);
  {
    MapR A(act.data(), steps * batch, gates);
    A.noalias() = CMapR(x.value().data(), steps * batch, in_dim) *
                  CMapR(w.w_ih.value().data(), gates, in_dim).transpose();
    A.rowwise() += CVecMap(w.bias.value().data(), gates).transpose();
  }
  std::vector<double> h_prev_all(steps * bh), c_prev_all(steps * bh);
  std::vector<double> c_all(steps * bh), y(steps * bh);
  std::vector<char> was_reset(steps, 0);
  std::vector<double> h(bh, 0.0), c(bh, 0.0);
  if (h0.defined()) std::copy(h0.value().begin(), h0.value().end(), h.begin());
  if (c0.defined()) std::copy(c0.value().begin(), c0.value().end(), c.begin());

  CMapR Whh(w.w_hh.value().data(), gates, hidden);
  for (int64_t p = 0; p < steps; ++p) {
    const int64_t s = reverse ? steps - 1 - p : p;
    if (reset_every > 0 && p > 0 && p % reset_every == 0) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      was_reset[s] = 1;
    }
    std::copy(h.begin(), h.end(), h_prev_all.begin() + s * bh);
    std::copy(c.begin(), c.end(), c_prev_all.begin() + s * bh);
    MapR A(act.data() + s * batch * gates, batch, gates);
    A.noalias() += CMapR(h.data(), batch, hidden) * Whh.transpose();
    for (int64_t b = 0; b < batch; ++b) {
      double* a = A.data() + b * gates;
      for (int64_t j = 0; j < hidden; ++j) {
        const double ig = SigmoidScalar(a[j]);
        const double fg = SigmoidScalar(a[hidden + j]);
        const double gg = std::tanh(a[2 * hidden + j]);
        const double og = SigmoidScalar(a[3 * hidden + j]);
        a[j] = ig;
        a[hidden + j] = fg;
        a[2 * hidden + j] = gg;
        a[3 * hidden + j] = og;
        const double cn = fg * c[b * hidden + j] + ig * gg;
        c[b * hidden + j] = cn;
        h[b * hidden + j] = og * std::tanh(cn);
      }
    }
    std::copy(c.begin(), c.end(), c_all.begin() + s * bh);
    std::copy(h.begin(), h.end(), y.begin() + s * bh);
  }

  LstmResult res;
  res.output = MakeOutput({steps, batch, hidden}, std::move(y),
                          {&x, &h0, &c0, &w.w_ih, &w.w_hh, &w.bias}, "lstm");
  res.h_final = MakeOutput({batch, hidden}, h, {&x, &h0, &c0, &w.w_ih, &w.w_hh, &w.bias},
                           "lstm");
  res.c_final = MakeOutput({batch, hidden}, c, {&x, &h0, &c0, &w.w_ih, &w.w_hh, &w.bias},
                           "lstm");

  Record(res.output, [x, h0, c0, w, res, act = std::move(act),
                      h_prev_all = std::move(h_prev_all),
                      c_prev_all = std::move(c_prev_all),
                      c_all = std::move(c_all), was_reset = std::move(was_reset),
                      steps, batch, in_dim, hidden, gates, bh,
                      reverse]() mutable {
    if (!res.output.has_grad() && !res.h_final.has_grad() &&
        !res.c_final.has_grad()) {
      return;
    }
    std::vector<double> dh(bh, 0.0), dc(bh, 0.0);
    if (res.h_final.has_grad()) {
      std::copy(res.h_final.grad().begin(), res.h_final.grad().end(), dh.begin());
    }
    if (res.c_final.has_grad()) {
      std::copy(res.c_final.grad().begin(), res.c_final.grad().end(), dc.begin());
    }
    const bool has_gy = res.output.has_grad();
    std::vector<double> dact(steps * batch * gates);
    CMapR Whh(w.w_hh.value().data(), gates, hidden);
    for (int64_t p = steps - 1; p >= 0; --p) {
      const int64_t s = reverse ? steps - 1 - p : p;
      const double* a = act.data() + s * batch * gates;
      double* da = dact.data() + s * batch * gates;
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t j = 0; j < hidden; ++j) {
          const int64_t k = b * hidden + j;
          const double ig = a[b * gates + j];
          const double fg = a[b * gates + hidden + j];
          const double gg = a[b * gates + 2 * hidden + j];
          const double og = a[b * gates + 3 * hidden + j];
          const double tc = std::tanh(c_all[s * bh + k]);
          double dhk = dh[k] + (has_gy ? res.output.grad()[s * bh + k] : 0.0);
          double dck = dc[k] + dhk * og * (1.0 - tc * tc);
          const double d_o = dhk * tc;
          const double d_i = dck * gg;
          const double d_g = dck * ig;
          const double d_f = dck * c_prev_all[s * bh + k];
          da[b * gates + j] = d_i * ig * (1.0 - ig);
          da[b * gates + hidden + j] = d_f * fg * (1.0 - fg);
          da[b * gates + 2 * hidden + j] = d_g * (1.0 - gg * gg);
          da[b * gates + 3 * hidden + j] = d_o * og * (1.0 - og);
          dc[k] = dck * fg;
        }
      }
      MapR DH(dh.data(), batch, hidden);
      DH.noalias() = CMapR(da, batch, gates) * Whh;
      if (was_reset[s]) {
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
      }
    }
    CMapR DA(dact.data(), steps * batch, gates);
    if (x.requires_grad()) {
      MapR(x.mutable_grad().data(), steps * batch, in_dim).noalias() +=
          DA * CMapR(w.w_ih.value().data(), gates, in_dim);
    }
    if (w.w_ih.requires_grad()) {
      Var wi = w.w_ih;
      MapR(wi.mutable_grad().data(), gates, in_dim).noalias() +=
          DA.transpose() * CMapR(x.value().data(), steps * batch, in_dim);
    }
    if (w.w_hh.requires_grad()) {
      Var wh = w.w_hh;
      MapR(wh.mutable_grad().data(), gates, hidden).noalias() +=
          DA.transpose() * CMapR(h_prev_all.data(), steps * batch, hidden);
    }
    if (w.bias.requires_grad()) {
      Var bb = w.bias;
      VecMap(bb.mutable_grad().data(), gates) += DA.colwise().sum().transpose();
    }
    if (h0.defined() && h0.requires_grad()) {
      auto g = h0.mutable_grad();
      for (int64_t k = 0; k < bh; ++k) g[k] += dh[k];
    }
    if (c0.defined() && c0.requires_grad()) {
      auto g = c0.mutable_grad();
      for (int64_t k = 0; k < bh; ++k) g[k] += dc[k];
    }
  });
  return res;
}

Var Graph::Conv2d(const Var& x, const Var& weight, const Var& bias,
                  int stride_h, int stride_w, int pad_h, int pad_w) {
  BSRNN_CHECK(x.rank() == 4 && weight.rank() == 4, ErrorKind::kParameter,
              "conv2d expects [B,C,H,W] input and [O,C,KH,KW] weight");
  const int64_t nb = x.dim(0), ch = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const int64_t oc = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  BSRNN_CHECK(weight.dim(1) == ch, ErrorKind::kParameter, "conv2d channel mismatch");
  BSRNN_CHECK(bias.defined() && bias.numel() == oc, ErrorKind::kParameter,
              "conv2d bias size");
  const int64_t oh = (ih + 2 * pad_h - kh) / stride_h + 1;
  const int64_t ow = (iw + 2 * pad_w - kw) / stride_w + 1;
  BSRNN_CHECK(oh >= 1 && ow >= 1, ErrorKind::kParameter,
              "conv2d input " + ShapeString(x.shape()) + " smaller than kernel");
  const int64_t kdim = ch * kh * kw;
  const int64_t odim = oh * ow;
  // im2col index table shared by every batch item; -1 marks padding.
  std::vector<int64_t> col_src(kdim * odim);
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t a = 0; a < kh; ++a) {
      for (int64_t b = 0; b < kw; ++b) {
        const int64_t row = (c * kh + a) * kw + b;
        for (int64_t y = 0; y < oh; ++y) {
          for (int64_t z = 0; z < ow; ++z) {
            const int64_t sy = y * stride_h - pad_h + a;
            const int64_t sz = z * stride_w - pad_w + b;
            col_src[row * odim + y * ow + z] =
                (sy >= 0 && sy < ih && sz >= 0 && sz < iw)
                    ? (c * ih + sy) * iw + sz
                    : -1;
          }
        }
      }
    }
  }
  const int64_t in_item = ch * ih * iw;
  std::vector<double> cols(nb * kdim * odim);
  for (int64_t n = 0; n < nb; ++n) {
    const double* src = x.value().data() + n * in_item;
    double* dst = cols.data() + n * kdim * odim;
    for (int64_t i = 0; i < kdim * odim; ++i) {
      dst[i] = col_src[i] >= 0 ? src[col_src[i]] : 0.0;
    }
  }
  std::vector<double> v(nb * oc * odim);
  CMapR W(weight.value().data(), oc, kdim);
  for (int64_t n = 0; n < nb; ++n) {
    MapR Y(v.data() + n * oc * odim, oc, odim);
    Y.noalias() = W * CMapR(cols.data() + n * kdim * odim, kdim, odim);
    Y.colwise() += CVecMap(bias.value().data(), oc);
  }
  Var out = MakeOutput({nb, oc, oh, ow}, std::move(v), {&x, &weight, &bias},
                       "conv2d");
  Record(out, [x, weight, bias, out, cols = std::move(cols),
               col_src = std::move(col_src), nb, oc, kdim, odim,
               in_item]() mutable {
    if (!out.has_grad()) return;
    CMapR W(weight.value().data(), oc, kdim);
    std::vector<double> gcol(kdim * odim);
    for (int64_t n = 0; n < nb; ++n) {
      CMapR G(out.grad().data() + n * oc * odim, oc, odim);
      if (weight.requires_grad()) {
        MapR(weight.mutable_grad().data(), oc, kdim).noalias() +=
            G * CMapR(cols.data() + n * kdim * odim, kdim, odim).transpose();
      }
      if (bias.requires_grad()) {
        VecMap(bias.mutable_grad().data(), oc) += G.rowwise().sum();
      }
      if (x.requires_grad()) {
        MapR GC(gcol.data(), kdim, odim);
        GC.noalias() = W.transpose() * G;
        double* gx = x.mutable_grad().data() + n * in_item;
        for (int64_t i = 0; i < kdim * odim; ++i) {
          if (col_src[i] >= 0) gx[col_src[i]] += gcol[i];
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Signal ops

std::pair<Var, Var> Graph::Stft(const Var& x, const dsp::StftConfig& cfg) {
  BSRNN_CHECK(x.rank() == 2, ErrorKind::kParameter, "stft expects [B, L]");
  const int64_t nb = x.dim(0), len = x.dim(1);
  const int frames = cfg.NumFrames(static_cast<std::size_t>(len));
  BSRNN_CHECK(frames >= 1, ErrorKind::kLength, "signal shorter than one window");
  const int bins = cfg.num_bins();
  const int64_t item = static_cast<int64_t>(frames) * bins;
  std::vector<double> re(nb * item), im(nb * item);
  for (int64_t b = 0; b < nb; ++b) {
    dsp::kernels::Analyze(x.value().subspan(b * len, len), cfg,
                          std::span<double>(re).subspan(b * item, item),
                          std::span<double>(im).subspan(b * item, item));
  }
  Var out_re = MakeOutput({nb, frames, bins}, std::move(re), {&x}, "stft");
  Var out_im = MakeOutput({nb, frames, bins}, std::move(im), {&x}, "stft");
  Record(out_re, [x, out_re, out_im, cfg, nb, len, item]() mutable {
    if (!out_re.has_grad() && !out_im.has_grad()) return;
    std::vector<double> zero;
    if (!out_re.has_grad() || !out_im.has_grad()) zero.assign(nb * item, 0.0);
    std::span<const double> gre = zero;
    std::span<const double> gim = zero;
    if (out_re.has_grad()) gre = out_re.grad();
    if (out_im.has_grad()) gim = out_im.grad();
    auto gx = x.mutable_grad();
    for (int64_t b = 0; b < nb; ++b) {
      dsp::kernels::AnalyzeAdjoint(gre.subspan(b * item, item),
                                   gim.subspan(b * item, item), cfg,
                                   gx.subspan(b * len, len));
    }
  });
  return {out_re, out_im};
}

Var Graph::Istft(const Var& re, const Var& im, const dsp::StftConfig& cfg,
                 std::size_t out_len) {
  CheckSameShape(re, im, "istft");
  BSRNN_CHECK(re.rank() == 3 && re.dim(2) == cfg.num_bins(),
              ErrorKind::kParameter,
              "istft expects [B, T, F] with F = " +
                  std::to_string(cfg.num_bins()));
  const int64_t nb = re.dim(0);
  const int frames = static_cast<int>(re.dim(1));
  const int64_t item = re.dim(1) * re.dim(2);
  const int64_t len = static_cast<int64_t>(out_len);
  std::vector<double> v(nb * len);
  for (int64_t b = 0; b < nb; ++b) {
    dsp::kernels::Synthesize(re.value().subspan(b * item, item),
                             im.value().subspan(b * item, item), frames, cfg,
                             std::span<double>(v).subspan(b * len, len));
  }
  Var out = MakeOutput({nb, len}, std::move(v), {&re, &im}, "istft");
  Record(out, [re, im, out, cfg, nb, frames, item, len]() mutable {
    if (!out.has_grad()) return;
    std::vector<double> gre(nb * item, 0.0), gim(nb * item, 0.0);
    for (int64_t b = 0; b < nb; ++b) {
      dsp::kernels::SynthesizeAdjoint(out.grad().subspan(b * len, len), frames,
                                      cfg,
                                      std::span<double>(gre).subspan(b * item, item),
                                      std::span<double>(gim).subspan(b * item, item));
    }
    if (re.requires_grad()) {
      auto g = re.mutable_grad();
      for (int64_t i = 0; i < nb * item; ++i) g[i] += gre[i];
    }
    if (im.requires_grad()) {
      auto g = im.mutable_grad();
      for (int64_t i = 0; i < nb * item; ++i) g[i] += gim[i];
    }
  });
  return out;
}

}  // namespace bsrnn::nn
