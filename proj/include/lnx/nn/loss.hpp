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

#ifndef LNX_NN_LOSS_HPP_
#define LNX_NN_LOSS_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "lnx/types.hpp"

namespace lnx {

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  MatrixX<Scalar> grad;  // d(loss)/d(logits)
};

/// Mean softmax cross-entropy over the batch, with its gradient
/// (softmax - onehot) / batch.
template <typename Scalar>
LossResult<Scalar> xent_loss(const MatrixX<Scalar>& logits, std::span<const std::int32_t> labels) {
  const Index n = logits.rows(), classes = logits.cols();
  if (static_cast<Index>(labels.size()) != n) {
    throw ShapeError("xent_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows of logits");
  }
  LossResult<Scalar> r;
  r.grad.resize(n, classes);
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const std::int32_t label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes) {
      throw Error("xent_loss: label " + std::to_string(label) + " outside [0, " +
                  std::to_string(classes) + ")");
    }
    const Scalar peak = logits.row(i).maxCoeff();
    auto shifted = (logits.row(i).array() - peak).eval();
    const Scalar log_norm = std::log(shifted.exp().sum());
    total += static_cast<double>(log_norm - shifted(label));
    r.grad.row(i) = (shifted - log_norm).exp().matrix();
    r.grad(i, label) -= Scalar(1);
  }
  r.grad /= static_cast<Scalar>(n);
  r.loss = static_cast<Scalar>(total / static_cast<double>(n));
  return r;
}

template <typename Scalar>
Index argmax_row(const MatrixX<Scalar>& logits, Index row) {
  Index best = 0;
  logits.row(row).maxCoeff(&best);
  return best;
}

}  // namespace lnx

#endif  // LNX_NN_LOSS_HPP_
