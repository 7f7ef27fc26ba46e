// Copyright 2026 The lnx Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LNX_NN_TENSOR_HPP_
#define LNX_NN_TENSOR_HPP_

#include <string>

#include "lnx/types.hpp"

namespace lnx {

struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  Index per_sample() const { return c * h * w; }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
  }
};

/// Dense NCHW activation tensor.
template <typename Scalar>
struct Tensor4 {
  Shape4 shape;
  VectorX<Scalar> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 s) : shape(s), data(VectorX<Scalar>::Zero(s.size())) {}
  Tensor4(Shape4 s, VectorX<Scalar> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
    }
  }

  Scalar& operator()(Index n, Index c, Index y, Index x) {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }
  Scalar operator()(Index n, Index c, Index y, Index x) const {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }

  /// Sample `n` viewed as a (channels x height*width) matrix.
  Eigen::Map<MatrixX<Scalar>> sample(Index n) {
    return {data.data() + n * shape.per_sample(), shape.c, shape.plane()};
  }
  Eigen::Map<const MatrixX<Scalar>> sample(Index n) const {
    return {data.data() + n * shape.per_sample(), shape.c, shape.plane()};
  }

  /// Whole batch viewed as (n x c*h*w).
  Eigen::Map<MatrixX<Scalar>> rows() { return {data.data(), shape.n, shape.per_sample()}; }
  Eigen::Map<const MatrixX<Scalar>> rows() const {
    return {data.data(), shape.n, shape.per_sample()};
  }

  bool all_finite() const { return data.allFinite(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    return Tensor4<Other>(shape, data.template cast<Other>());
  }
};

/// Copy of samples [first, first + count).
template <typename Scalar>
Tensor4<Scalar> slice_batch(const Tensor4<Scalar>& t, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > t.shape.n) {
    throw ShapeError("slice_batch: samples [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + t.shape.str());
  }
  const Index per = t.shape.per_sample();
  return Tensor4<Scalar>(Shape4{count, t.shape.c, t.shape.h, t.shape.w},
                         t.data.segment(first * per, count * per));
}

}  // namespace lnx

#endif  // LNX_NN_TENSOR_HPP_
