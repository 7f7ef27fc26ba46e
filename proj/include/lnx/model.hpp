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

// A network in latent form: integer-rounded surrogates plus one decoder per
// parameter group for every compressed weight layer, and plain tensors for
// everything else (biases, batchnorm, uncompressed weights).

#ifndef LNX_MODEL_HPP_
#define LNX_MODEL_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "lnx/nn/network.hpp"
#include "lnx/reparam.hpp"

namespace lnx {

template <typename Scalar>
struct LatentModel {
  Architecture arch;
  std::vector<ParameterGroup> groups;
  std::vector<int> group_of;                  // per layer; -1 when not compressed
  std::vector<MatrixX<Scalar>> psi;           // per group
  std::vector<LatentTensor<Scalar>> latents;  // per layer; empty when not compressed
  /// Forward-pass parameters. Weights of compressed layers are only valid
  /// after decode_weights().
  NetworkParams<Scalar> params;

  bool compressed(std::size_t layer) const { return group_of[layer] >= 0; }

  /// Rewrites every compressed weight as decode(round(surrogate), psi).
  void decode_weights() {
    for (std::size_t i = 0; i < latents.size(); ++i) {
      if (!compressed(i)) continue;
      params.layers[i].weight = decode(latents[i], psi[static_cast<std::size_t>(group_of[i])]);
    }
    params.touch();
  }

  /// Surrogates of every compressed layer, in layer order.
  std::vector<const MatrixX<Scalar>*> surrogates() const {
    std::vector<const MatrixX<Scalar>*> out;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      if (compressed(i)) out.push_back(&latents[i].surrogate);
    }
    return out;
  }

  template <typename Other>
  LatentModel<Other> cast() const {
    LatentModel<Other> m;
    m.arch = arch;
    m.groups = groups;
    m.group_of = group_of;
    for (const auto& p : psi) m.psi.push_back(p.template cast<Other>());
    for (const auto& l : latents) {
      m.latents.push_back({l.surrogate.template cast<Other>(), l.weight_rows, l.weight_cols});
    }
    m.params = params.template cast<Other>();
    return m;
  }
};

struct ModelInit {
  double b_min = 2.0;
  InitRule rule = InitRule::exact_rounding;
  /// false: keep every weight as a plain float tensor.
  bool reparameterize = true;
  /// Layers to reparameterize; empty = every weight layer.
  std::vector<int> compressible;
};

/// Builds and initializes a latent model. Uncompressed weights get He-normal
/// initialization; biases start at zero and batchnorm at identity.
template <typename Scalar, typename Rng>
LatentModel<Scalar> make_latent_model(const Architecture& arch, const ModelInit& init, Rng& rng) {
  arch.validate();
  LatentModel<Scalar> m;
  m.arch = arch;
  m.params = make_params<Scalar>(arch);
  if (init.reparameterize) m.groups = partition_model(arch, init.compressible);
  m.group_of.assign(arch.layers.size(), -1);
  m.latents.resize(arch.layers.size());
  m.psi.resize(m.groups.size());
  for (std::size_t g = 0; g < m.groups.size(); ++g) {
    std::vector<double> fans;
    std::vector<LatentTensor<Scalar>*> members;
    for (int idx : m.groups[g].members) {
      const auto i = static_cast<std::size_t>(idx);
      m.group_of[i] = static_cast<int>(g);
      m.latents[i] = make_latent<Scalar>(arch.layers[i]);
      fans.push_back(static_cast<double>(layer_fan_in(arch.layers[i])));
      members.push_back(&m.latents[i]);
    }
    init_latents(m.groups[g], fans, init.b_min, init.rule, rng, members, m.psi[g]);
  }
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (!arch.layers[i].has_weight() || m.compressed(i)) continue;
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(layer_fan_in(arch.layers[i]))));
    auto& w = m.params.layers[i].weight;
    for (Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<Scalar>(he(rng));
  }
  m.decode_weights();
  return m;
}

/// Total parameter count of the dense network: weights, biases and all four
/// batchnorm vectors.
inline std::int64_t dense_parameter_count(const Architecture& arch) {
  std::int64_t n = 0;
  for (const LayerSpec& s : arch.layers) {
    if (s.kind == LayerKind::conv2d) n += s.out_channels * s.in_channels * s.kernel * s.kernel;
    if (s.kind == LayerKind::dense) n += s.out_channels * s.in_channels;
    if (s.has_weight() && s.bias) n += s.out_channels;
    if (s.kind == LayerKind::batchnorm) n += 4 * s.in_channels;
  }
  return n;
}

}  // namespace lnx

#endif  // LNX_MODEL_HPP_
