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

#ifndef LNX_NN_ARCHITECTURE_HPP_
#define LNX_NN_ARCHITECTURE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lnx/types.hpp"

namespace lnx {

enum class LayerKind : std::uint8_t {
  conv2d = 0,
  dense = 1,
  batchnorm = 2,
  relu = 3,
  avgpool = 4,  // global average pool
  add = 5,      // elementwise sum of two producers
  shortcut = 6  // option-A residual shortcut: strided subsample + zero channel padding
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// Marks the network input in LayerSpec::inputs.
inline constexpr int kNetworkInput = -1;

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  /// Producer layer indices, all smaller than this layer's own index.
  std::vector<int> inputs;
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
  bool bias = false;

  static LayerSpec conv2d(int input, Index c_in, Index c_out, Index k, Index stride, Index pad,
                          bool bias = false);
  static LayerSpec dense(int input, Index c_in, Index c_out, bool bias = true);
  static LayerSpec batchnorm(int input, Index channels);
  static LayerSpec relu(int input, Index channels);
  static LayerSpec avgpool(int input, Index channels);
  static LayerSpec add(int a, int b, Index channels);
  static LayerSpec shortcut(int input, Index c_in, Index c_out, Index stride);

  bool has_weight() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
  /// Slice length of the layer's latent matrix: K*K for conv, 1 for dense.
  Index slice_length() const { return kind == LayerKind::conv2d ? kernel * kernel : 1; }
  bool operator==(const LayerSpec&) const = default;
};

/// Per-sample activation shape (channels, height, width).
struct Shape3 {
  Index c = 0, h = 0, w = 0;
  Index size() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
};

struct Architecture {
  std::string name;
  Shape3 input;
  Index num_classes = 0;
  std::vector<LayerSpec> layers;

  /// Output shape of every layer; throws ShapeError naming the offending layer.
  std::vector<Shape3> infer_shapes() const;
  void validate() const { (void)infer_shapes(); }

  std::string to_json() const;
  static Architecture from_json(std::string_view text);
  bool operator==(const Architecture&) const = default;
};

/// Two dense layers with a ReLU between them.
Architecture make_mlp(Shape3 input, Index hidden, Index num_classes);

/// Four conv3x3+BN+ReLU blocks, global average pool, one dense head.
Architecture make_miniconv(Shape3 input, const std::vector<Index>& widths,
                           const std::vector<Index>& strides, Index num_classes);

/// ResNet-20 layout (3 stages x 3 basic blocks) with option-A shortcuts and a
/// configurable base width (16 is the standard network).
Architecture make_resnet20(Shape3 input, Index base_width, Index num_classes);

/// Builds a named architecture: "mlp", "miniconv", "resnet20".
Architecture make_architecture(std::string_view name, Shape3 input, Index num_classes,
                               const std::vector<Index>& widths = {});

}  // namespace lnx

#endif  // LNX_NN_ARCHITECTURE_HPP_
