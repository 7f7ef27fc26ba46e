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

// Slice sparsity: analysis, operation counts, block-sparse convolution and
// structured pruning.
//
// Operation counts are multiply-accumulates (MACs) of conv and dense layers;
// one MAC is two FLOPs. Three counts are reported per layer:
//   dense       C_out * C_in * K*K * H_out * W_out (C_out * C_in for dense)
//   slice       the same restricted to nonzero K*K slices
//   structured  the dense count of the structurally pruned network
// Structured pruning removes output filters and input channels that cannot
// affect the logits. Channels are tracked per "channel space": tensors tied
// together by batchnorm, ReLU, pooling and residual adds share one set of
// kept channels, so residual joins keep the union of their branches. Spaces
// that touch the network input, the logits or an option-A shortcut are never
// pruned. A filter whose output is all zero still propagates through a
// batchnorm+ReLU only when the constant it becomes is zero after the ReLU.

#ifndef LNX_SPARSE_INFER_HPP_
#define LNX_SPARSE_INFER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "lnx/model.hpp"
#include "lnx/nn/conv.hpp"
#include "lnx/nn/network.hpp"
#include "lnx/nn/tensor.hpp"
#include "lnx/reparam.hpp"

namespace lnx {

/// Per latent row (one (c_out, c_in) slice): true when the row is all zero.
struct SliceMask {
  std::vector<std::uint8_t> zero;
  Index slice_length = 0;

  Index size() const { return static_cast<Index>(zero.size()); }
  Index zero_count() const;
  double sparsity() const;
};

SliceMask slice_mask(const IntMatrix& latent);

template <typename Scalar>
SliceMask slice_mask(const LatentTensor<Scalar>& latent) {
  return slice_mask(latent.rounded());
}

/// Mask of a weight matrix (C_out, C_in * l) viewed as (C_out * C_in) slices.
template <typename Scalar>
SliceMask weight_mask(const MatrixX<Scalar>& weight, Index slice_length) {
  SliceMask m;
  m.slice_length = slice_length;
  const Index slices = weight.size() / slice_length;
  m.zero.resize(static_cast<std::size_t>(slices));
  Eigen::Map<const MatrixX<Scalar>> view(weight.data(), slices, slice_length);
  for (Index j = 0; j < slices; ++j) m.zero[static_cast<std::size_t>(j)] = (view.row(j).array() == 0).all();
  return m;
}

/// One mask per layer (empty for layers without weights). Compressed layers
/// use their latents, the rest their weights.
std::vector<SliceMask> model_masks(const LatentModel<float>& model);
std::vector<SliceMask> weight_masks(const Architecture& arch, const NetworkParams<float>& params);

struct MacCounts {
  std::int64_t dense = 0, slice = 0, structured = 0;
  MacCounts& operator+=(const MacCounts& o) {
    dense += o.dense;
    slice += o.slice;
    structured += o.structured;
    return *this;
  }
};

/// Channels kept by structured pruning, per layer output (sorted).
struct ChannelPlan {
  std::vector<std::vector<Index>> kept;
  std::vector<Index> input_kept;  // network input: always every channel
  const std::vector<Index>& of(int tensor) const {
    return tensor == kNetworkInput ? input_kept : kept[static_cast<std::size_t>(tensor)];
  }
};

/// Structured pruning plan. Needs the batchnorm parameters (eval mode) to
/// know what an all-zero filter turns into.
ChannelPlan plan_pruning(const Architecture& arch, const NetworkParams<float>& params,
                         const std::vector<SliceMask>& masks);

struct FlopCounts {
  std::vector<MacCounts> layers;  // per layer; zero for layers without weights
  MacCounts total;
  ChannelPlan plan;
};

FlopCounts count_flops(const Architecture& arch, const NetworkParams<float>& params,
                       const std::vector<SliceMask>& masks);

struct PrunedNetwork {
  Architecture arch;
  NetworkParams<float> params;
};

/// Smaller network computing the same logits (up to float summation order).
PrunedNetwork prune_network(const Architecture& arch, const NetworkParams<float>& params,
                            const ChannelPlan& plan);

/// Convolution with decode(latent, psi) that skips masked K*K blocks of the
/// im2col product. Throws when `mask` does not describe `latent`. The MACs
/// actually performed are added to `macs` when given.
template <typename Scalar>
Tensor4<Scalar> block_sparse_conv(const Tensor4<Scalar>& input, const LatentTensor<Scalar>& latent,
                                  const MatrixX<Scalar>& psi, const SliceMask& mask,
                                  const ConvGeometry& g, std::int64_t* macs = nullptr) {
  const IntMatrix rounded = latent.rounded();
  const Index l = latent.slice_length();
  if (mask.size() != rounded.rows() || mask.slice_length != l) {
    throw ShapeError("block_sparse_conv: mask shape does not match the latent tensor");
  }
  for (Index j = 0; j < rounded.rows(); ++j) {
    const bool zero = (rounded.row(j).array() == 0).all();
    if (zero != static_cast<bool>(mask.zero[static_cast<std::size_t>(j)])) {
      throw Error("block_sparse_conv: stale mask (row " + std::to_string(j) + " changed)");
    }
  }
  if (l != g.kernel * g.kernel || latent.weight_cols != g.patch_size() ||
      input.shape.c != g.in_channels || input.shape.h != g.height || input.shape.w != g.width) {
    throw ShapeError("block_sparse_conv: geometry does not match input or weights");
  }
  const Index c_out = latent.weight_rows, c_in = g.in_channels;
  const MatrixX<Scalar> w = decode(rounded, psi, c_out, latent.weight_cols);
  const Index oh = g.out_height(), ow = g.out_width(), n = input.shape.n;
  Tensor4<Scalar> out(Shape4{n, c_out, oh, ow});
  const Index live = mask.size() - mask.zero_count();
  if (macs) *macs += n * live * l * oh * ow;

  std::vector<std::vector<Index>> blocks(static_cast<std::size_t>(c_out));
  for (Index o = 0; o < c_out; ++o) {
    for (Index c = 0; c < c_in; ++c) {
      if (!mask.zero[static_cast<std::size_t>(o * c_in + c)]) blocks[static_cast<std::size_t>(o)].push_back(c);
    }
  }
  MatrixX<Scalar> cols;
  for (Index b = 0; b < n; ++b) {
    auto y = out.sample(b);
    if (live == 0) {
      y.setZero();
      continue;
    }
    im2col<Scalar>(input.sample(b), g, cols);
    if (live == mask.size()) {
      y.noalias() = w * cols;  // nothing to skip: the dense product
      continue;
    }
    y.setZero();
    for (Index o = 0; o < c_out; ++o) {
      for (Index c : blocks[static_cast<std::size_t>(o)]) {
        y.row(o).noalias() += w.block(o, c * l, 1, l) * cols.middleRows(c * l, l);
      }
    }
  }
  return out;
}

struct LayerSparsity {
  int layer = 0;
  LayerKind kind = LayerKind::conv2d;
  Index slices = 0, zero_slices = 0;
  Index latent_elements = 0, zero_elements = 0;
  Index in_channels = 0, out_channels = 0, kept_in = 0, kept_out = 0;
  MacCounts macs;

  double slice_sparsity() const;
  double unstructured_sparsity() const;
};

struct SparsityReport {
  std::vector<LayerSparsity> layers;
  Index slices = 0, zero_slices = 0, latent_elements = 0, zero_elements = 0;
  MacCounts macs;
  /// Wall-clock forward time over the test set; negative when not measured.
  double dense_ms = -1, pruned_ms = -1;
  int threads = 1;

  double slice_sparsity() const;
  double unstructured_sparsity() const;
  double slice_flop_fraction() const;
  double structured_flop_fraction() const;
  std::string to_json() const;
};

/// Sparsity and operation counts of a latent model (no timing).
SparsityReport analyze(const LatentModel<float>& model);

struct SpeedupResult {
  double dense_ms = 0, pruned_ms = 0;
  double ratio = 0;  // dense / pruned
  int threads = 1;
};

/// Median-of-5 eval-mode forward time over `images` in batches, after 3
/// warmup passes, for two networks.
SpeedupResult bench_speedup(const Architecture& dense_arch, const NetworkParams<float>& dense,
                            const Architecture& pruned_arch, const NetworkParams<float>& pruned,
                            const Tensor4<float>& images, Index batch = 128, int warmup = 3,
                            int repeats = 5);

}  // namespace lnx

#endif  // LNX_SPARSE_INFER_HPP_
