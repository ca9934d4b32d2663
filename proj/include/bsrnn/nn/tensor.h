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

#ifndef BSRNN_NN_TENSOR_H_
#define BSRNN_NN_TENSOR_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bsrnn::nn {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;

  std::vector<double>& EnsureGrad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

// Shared handle to a dense row-major float64 tensor with an optional
// gradient buffer. Copies alias the same storage, so constness is shallow.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<TensorData> data) : data_(std::move(data)) {}

  static Var Constant(Shape shape, std::vector<double> values);
  static Var Zeros(Shape shape);
  static Var Scalar(double v) { return Constant({}, {v}); }
  // A leaf that accumulates gradients.
  static Var Parameter(Shape shape, std::vector<double> values);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(data_->value.size()); }

  std::span<const double> value() const { return data_->value; }
  std::span<double> mutable_value() const { return data_->value; }
  std::span<const double> grad() const { return data_->grad; }
  std::span<double> mutable_grad() const { return data_->EnsureGrad(); }
  bool has_grad() const { return !data_->grad.empty(); }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool r) const { data_->requires_grad = r; }
  void ZeroGrad() const;

  double item() const;
  TensorData* get() const { return data_.get(); }

 private:
  std::shared_ptr<TensorData> data_;
};

}  // namespace bsrnn::nn

#endif  // BSRNN_NN_TENSOR_H_
