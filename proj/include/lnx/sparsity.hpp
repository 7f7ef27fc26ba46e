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

#ifndef LNX_SPARSITY_HPP_
#define LNX_SPARSITY_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lnx/types.hpp"

namespace lnx {

enum class UnstructuredNorm : std::uint8_t { l2, l1 };
enum class GroupNorm : std::uint8_t { l2, linf };
/// Group-size weight rho_j: the slice length, or 1 for every row.
enum class RhoRule : std::uint8_t { slice_length, unit };

/// Penalties on latent surrogates: lambda_u * ||W||_2^2 (or ||W||_1) plus
/// lambda_s * sum_j sqrt(rho_j) * ||W_j|| over latent rows j.
struct SparsityConfig {
  double lambda_unstructured = 0;
  double lambda_structured = 0;
  UnstructuredNorm unstructured_norm = UnstructuredNorm::l2;
  GroupNorm group_norm = GroupNorm::l2;
  RhoRule rho = RhoRule::slice_length;

  void validate() const {
    if (!(std::isfinite(lambda_unstructured) && lambda_unstructured >= 0 &&
          std::isfinite(lambda_structured) && lambda_structured >= 0)) {
      throw Error("sparsity lambdas must be finite and nonnegative");
    }
  }
  double rho_for(Index slice_length) const {
    return rho == RhoRule::slice_length ? static_cast<double>(slice_length) : 1.0;
  }
};

template <typename Scalar>
struct PenaltyResult {
  double value = 0;
  MatrixX<Scalar> grad;
};

template <typename Scalar>
PenaltyResult<Scalar> unstructured_penalty(const MatrixX<Scalar>& w, const SparsityConfig& cfg) {
  PenaltyResult<Scalar> r;
  const double lambda = cfg.lambda_unstructured;
  if (cfg.unstructured_norm == UnstructuredNorm::l2) {
    r.value = lambda * w.template cast<double>().squaredNorm();
    r.grad = static_cast<Scalar>(2 * lambda) * w;
  } else {
    r.value = lambda * w.template cast<double>().template lpNorm<1>();
    // sign() is 0 at 0, which is the subgradient used for exact zeros.
    r.grad = static_cast<Scalar>(lambda) * w.array().sign().matrix();
  }
  return r;
}

/// Group penalty over rows of `w`, with per-row weights rho (one entry, or
/// one per row). Exactly-zero rows get a zero subgradient, so pruned slices
/// only come back through the other loss terms.
template <typename Scalar>
PenaltyResult<Scalar> group_penalty(const MatrixX<Scalar>& w, std::span<const double> rho,
                                    const SparsityConfig& cfg) {
  if (rho.size() != 1 && static_cast<Index>(rho.size()) != w.rows()) {
    throw ShapeError("group_penalty: need one rho or one per row");
  }
  PenaltyResult<Scalar> r;
  r.grad = MatrixX<Scalar>::Zero(w.rows(), w.cols());
  const double lambda = cfg.lambda_structured;
  double total = 0;
  for (Index j = 0; j < w.rows(); ++j) {
    const double weight = lambda * std::sqrt(rho.size() == 1 ? rho[0] : rho[static_cast<std::size_t>(j)]);
    const auto row = w.row(j).template cast<double>();
    if (cfg.group_norm == GroupNorm::l2) {
      const double norm = row.norm();
      total += weight * norm;
      if (norm > 0) r.grad.row(j) = (row * (weight / norm)).template cast<Scalar>();
    } else {
      const double peak = row.cwiseAbs().maxCoeff();
      total += weight * peak;
      if (peak > 0) {
        const auto ties = (row.array().abs() == peak).count();
        const double share = weight / static_cast<double>(ties);
        for (Index k = 0; k < w.cols(); ++k) {
          if (std::abs(row(k)) == peak) r.grad(j, k) = static_cast<Scalar>(row(k) > 0 ? share : -share);
        }
      }
    }
  }
  r.value = total;
  return r;
}

template <typename Scalar>
struct ComputeLossResult {
  double value = 0;
  double unstructured = 0;
  double structured = 0;
  std::vector<MatrixX<Scalar>> grads;  // one per input tensor
};

/// Both penalties summed over every compressible tensor. rho follows the
/// config's rule using each tensor's slice length.
template <typename Scalar>
ComputeLossResult<Scalar> compute_loss(std::span<const MatrixX<Scalar>* const> tensors,
                                       const SparsityConfig& cfg) {
  cfg.validate();
  ComputeLossResult<Scalar> r;
  for (const MatrixX<Scalar>* w : tensors) {
    const double rho = cfg.rho_for(w->cols());
    auto u = unstructured_penalty(*w, cfg);
    auto g = group_penalty(*w, std::span<const double>(&rho, 1), cfg);
    r.unstructured += u.value;
    r.structured += g.value;
    r.grads.push_back(u.grad + g.grad);
  }
  r.value = r.unstructured + r.structured;
  return r;
}

}  // namespace lnx

#endif  // LNX_SPARSITY_HPP_
