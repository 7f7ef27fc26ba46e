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

#ifndef LNX_NN_OPTIM_HPP_
#define LNX_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numbers>
#include <string>

#include "lnx/types.hpp"

namespace lnx {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter tensor.
template <typename Scalar>
struct AdamState {
  VectorX<Scalar> first_moment;
  VectorX<Scalar> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update applied in place. `name` identifies the
/// parameter in error messages.
template <typename Scalar, typename Derived, typename GradDerived>
void adam_step(AdamState<Scalar>& state, const AdamHyper& hyper, Eigen::DenseBase<Derived>& params,
               const Eigen::DenseBase<GradDerived>& grads, const std::string& name) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step(" + name + "): parameter has " + std::to_string(params.size()) +
                     " elements, gradient has " + std::to_string(grads.size()));
  }
  // Expressions are evaluated once; plain matrices are used in place.
  const auto& evaluated = grads.derived().eval();
  if (!evaluated.allFinite()) {
    throw NumericError("adam_step: non-finite gradient for parameter '" + name + "'");
  }
  const Index size = params.size();
  if (state.first_moment.size() != size) {
    state.first_moment = VectorX<Scalar>::Zero(size);
    state.second_moment = VectorX<Scalar>::Zero(size);
    state.step = 0;
  }
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(hyper.beta1), b2 = static_cast<Scalar>(hyper.beta2);
  const double t = static_cast<double>(state.step);
  const Scalar correction1 = static_cast<Scalar>(1.0 - std::pow(hyper.beta1, t));
  const Scalar correction2 = static_cast<Scalar>(1.0 - std::pow(hyper.beta2, t));
  const Scalar lr = static_cast<Scalar>(hyper.learning_rate);
  const Scalar eps = static_cast<Scalar>(hyper.epsilon);
  // Parameters may be row-major matrices; walk them in storage order.
  Scalar* p = params.derived().data();
  const Scalar* g = evaluated.data();
  for (Index i = 0; i < size; ++i) {
    Scalar& m = state.first_moment[i];
    Scalar& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * g[i];
    v = b2 * v + (Scalar(1) - b2) * g[i] * g[i];
    const Scalar m_hat = m / correction1;
    const Scalar v_hat = v / correction2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

/// A named collection of Adam states sharing one set of hyperparameters.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  AdamHyper& hyper() { return hyper_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_learning_rate(double lr) { hyper_.learning_rate = lr; }

  template <typename Derived, typename GradDerived>
  void step(const std::string& name, Eigen::DenseBase<Derived>& params,
            const Eigen::DenseBase<GradDerived>& grads) {
    adam_step(states_[name], hyper_, params, grads, name);
  }
  template <typename Derived, typename GradDerived>
  void step(const std::string& name, Eigen::DenseBase<Derived>&& params,
            const Eigen::DenseBase<GradDerived>& grads) {
    adam_step(states_[name], hyper_, params, grads, name);
  }

  const std::map<std::string, AdamState<Scalar>>& states() const { return states_; }
  std::map<std::string, AdamState<Scalar>>& states() { return states_; }
  bool tracks(const std::string& name) const { return states_.count(name) != 0; }

 private:
  AdamHyper hyper_;
  std::map<std::string, AdamState<Scalar>> states_;
};

/// Cosine decay from lr0 at step 0 to 0 at total_steps. Steps past the end
/// clamp to 0 with a warning on stderr.
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (total_steps <= 0) return lr0;
  if (step > total_steps) {
    std::cerr << "cosine_lr: step " << step << " beyond schedule end " << total_steps
              << ", clamping\n";
    return 0.0;
  }
  if (step < 0) step = 0;
  if (step == total_steps) return 0.0;
  return lr0 * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

}  // namespace lnx

#endif  // LNX_NN_OPTIM_HPP_
