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

#include "bsrnn/nn/tensor.h"

#include <sstream>

#include "bsrnn/error.h"

namespace bsrnn::nn {

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Var Var::Constant(Shape shape, std::vector<double> values) {
  BSRNN_CHECK(NumElements(shape) == static_cast<int64_t>(values.size()),
              ErrorKind::kParameter,
              "value count does not match shape " + ShapeString(shape));
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->value = std::move(values);
  return Var(std::move(d));
}

Var Var::Zeros(Shape shape) {
  const int64_t n = NumElements(shape);
  return Constant(std::move(shape), std::vector<double>(n, 0.0));
}

Var Var::Parameter(Shape shape, std::vector<double> values) {
  Var v = Constant(std::move(shape), std::move(values));
  v.set_requires_grad(true);
  return v;
}

int64_t Var::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  BSRNN_CHECK(axis >= 0 && axis < r, ErrorKind::kParameter,
              "axis out of range for shape " + ShapeString(shape()));
  return data_->shape[axis];
}

void Var::ZeroGrad() const {
  if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

double Var::item() const {
  BSRNN_CHECK(numel() == 1, ErrorKind::kParameter,
              "item() on tensor of shape " + ShapeString(shape()));
  return data_->value[0];
}

}  // namespace bsrnn::nn
