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

// Latent reparameterization of layer weights.
//
// A layer with C_out x C_in slices of length l (K*K for convolutions, 1 for
// dense layers) stores a real surrogate matrix of shape (C_out*C_in, l). Its
// elementwise rounding is the integer latent matrix that gets entropy coded;
// the weights used in the forward pass are `rounded * psi`, reshaped to the
// layer's (C_out, C_in*K*K) weight matrix. psi is an l x l matrix shared by
// every layer of one parameter group and has no shift term, so a zero latent
// row always decodes to an exactly-zero weight slice.

#ifndef LNX_REPARAM_HPP_
#define LNX_REPARAM_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lnx/nn/architecture.hpp"
#include "lnx/types.hpp"

namespace lnx {

/// Nearest integer with halves rounded away from zero (0.5 -> 1, -1.5 -> -2).
inline std::int32_t round_half_away(double x) { return static_cast<std::int32_t>(std::round(x)); }

template <typename Derived>
IntMatrix quantize(const Eigen::MatrixBase<Derived>& surrogate) {
  if (!surrogate.allFinite()) throw NumericError("quantize: non-finite surrogate value");
  IntMatrix out(surrogate.rows(), surrogate.cols());
  for (Index r = 0; r < surrogate.rows(); ++r) {
    for (Index c = 0; c < surrogate.cols(); ++c) {
      out(r, c) = round_half_away(static_cast<double>(surrogate(r, c)));
    }
  }
  return out;
}

template <typename Scalar>
struct LatentTensor {
  MatrixX<Scalar> surrogate;  // (C_out*C_in, l)
  Index weight_rows = 0;      // C_out
  Index weight_cols = 0;      // C_in*K*K (conv) or C_in (dense)

  Index rows() const { return surrogate.rows(); }
  Index slice_length() const { return surrogate.cols(); }
  /// Always recomputed from the surrogate.
  IntMatrix rounded() const { return quantize(surrogate); }
};

template <typename Scalar>
LatentTensor<Scalar> make_latent(const LayerSpec& spec) {
  if (!spec.has_weight()) throw Error("layer kind has no weight to reparameterize");
  const Index l = spec.slice_length();
  LatentTensor<Scalar> t;
  t.weight_rows = spec.out_channels;
  t.weight_cols = spec.in_channels * l;
  t.surrogate = MatrixX<Scalar>::Zero(spec.out_channels * spec.in_channels, l);
  return t;
}

/// Decoded weight matrix: reshape(latent * psi) to (weight_rows, weight_cols).
template <typename Scalar>
MatrixX<Scalar> decode(const IntMatrix& latent, const MatrixX<Scalar>& psi, Index weight_rows,
                       Index weight_cols) {
  if (psi.rows() != psi.cols() || latent.cols() != psi.rows()) {
    throw ShapeError("decode: latent has " + std::to_string(latent.cols()) +
                     " columns but decoder is " + std::to_string(psi.rows()) + "x" +
                     std::to_string(psi.cols()));
  }
  if (latent.size() != weight_rows * weight_cols) {
    throw ShapeError("decode: latent size " + std::to_string(latent.size()) +
                     " does not fill a " + std::to_string(weight_rows) + "x" +
                     std::to_string(weight_cols) + " weight");
  }
  MatrixX<Scalar> slices = latent.cast<Scalar>() * psi;
  return Eigen::Map<const MatrixX<Scalar>>(slices.data(), weight_rows, weight_cols);
}

template <typename Scalar>
MatrixX<Scalar> decode(const LatentTensor<Scalar>& latent, const MatrixX<Scalar>& psi) {
  return decode(latent.rounded(), psi, latent.weight_rows, latent.weight_cols);
}

template <typename Scalar>
struct SteGradients {
  MatrixX<Scalar> surrogate;  // (rows, l)
  MatrixX<Scalar> psi;        // (l, l)
};

/// Straight-through backward of decode(): rounding acts as the identity, so
/// d/dsurrogate = G * psi^T and d/dpsi = rounded^T * G, with G the weight
/// gradient viewed as (rows, l).
template <typename Scalar>
SteGradients<Scalar> ste_backward(const MatrixX<Scalar>& grad_weight, const MatrixX<Scalar>& psi,
                                  const LatentTensor<Scalar>& latent) {
  if (grad_weight.rows() != latent.weight_rows || grad_weight.cols() != latent.weight_cols) {
    throw ShapeError("ste_backward: weight gradient shape does not match the decoded weight");
  }
  if (psi.rows() != latent.slice_length() || psi.cols() != latent.slice_length()) {
    throw ShapeError("ste_backward: decoder does not match latent slice length");
  }
  Eigen::Map<const MatrixX<Scalar>> g(grad_weight.data(), latent.rows(), latent.slice_length());
  SteGradients<Scalar> out;
  out.surrogate.noalias() = g * psi.transpose();
  out.psi.noalias() = latent.rounded().template cast<Scalar>().transpose() * g;
  return out;
}

struct ParameterGroup {
  std::string name;
  LayerKind kind = LayerKind::conv2d;
  Index kernel = 1;
  Index slice_length = 1;
  std::vector<int> members;  // layer indices, ascending
};

/// Groups the weight layers by (kind, kernel size) in order of first
/// appearance. Biases and batchnorm parameters belong to no group.
/// `compressible` restricts the layers considered (empty = every weight layer).
std::vector<ParameterGroup> partition_model(const Architecture& arch,
                                            const std::vector<int>& compressible = {});

/// He fan used for the initialization target 2/f: C_in*K*K for conv, C_in
/// for dense.
Index layer_fan_in(const LayerSpec& spec);

/// Var(round(U)) for U uniform on [-b, b].
double rounded_uniform_variance(double b);

enum class InitRule : std::uint8_t {
  /// Closed form that treats round(U[-b,b]) as having variance
  /// ((2b+1)^2 - 1)/12.
  closed_form,
  /// Same He target, but uses the exact variance of round(U[-b,b]) and solves
  /// for b numerically.
  exact_rounding
};

/// Decoder entry variance v = 24 / (l * f_max * ((2*b_min+1)^2 - 1)).
double closed_form_decoder_variance(Index slice_length, double fan_max, double b_min);
/// b = (sqrt((f_max/f) * ((2*b_min+1)^2 - 1) + 1) - 1) / 2.
double closed_form_bound(double fan, double fan_max, double b_min);

struct GroupInit {
  double decoder_variance = 0;
  std::vector<double> bounds;  // per member layer
};

/// Variance of the shared decoder and the uniform half-width per member so
/// that decoded weights have variance 2/f, with the largest-fan layer at
/// exactly b_min. Throws when b_min <= 0.5.
GroupInit plan_group_init(Index slice_length, const std::vector<double>& fans, double b_min,
                          InitRule rule = InitRule::exact_rounding);

/// Draws psi ~ N(0, v) and each member's surrogate ~ U[-b, b].
template <typename Scalar, typename Rng>
void init_latents(const ParameterGroup& group, const std::vector<double>& fans, double b_min,
                  InitRule rule, Rng& rng, std::vector<LatentTensor<Scalar>*> latents,
                  MatrixX<Scalar>& psi) {
  if (latents.size() != group.members.size() || fans.size() != group.members.size()) {
    throw Error("init_latents: need one latent tensor and one fan per group member");
  }
  const GroupInit plan = plan_group_init(group.slice_length, fans, b_min, rule);
  std::normal_distribution<double> normal(0.0, std::sqrt(plan.decoder_variance));
  psi.resize(group.slice_length, group.slice_length);
  for (Index r = 0; r < psi.rows(); ++r) {
    for (Index c = 0; c < psi.cols(); ++c) psi(r, c) = static_cast<Scalar>(normal(rng));
  }
  for (std::size_t m = 0; m < latents.size(); ++m) {
    const double b = plan.bounds[m];
    std::uniform_real_distribution<double> uniform(-b, b);
    auto& s = latents[m]->surrogate;
    for (Index i = 0; i < s.size(); ++i) s.data()[i] = static_cast<Scalar>(uniform(rng));
  }
}

}  // namespace lnx

#endif  // LNX_REPARAM_HPP_
