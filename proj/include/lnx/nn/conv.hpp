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

#ifndef LNX_NN_CONV_HPP_
#define LNX_NN_CONV_HPP_

#include "lnx/types.hpp"

namespace lnx {

struct ConvGeometry {
  Index in_channels = 0, height = 0, width = 0;
  Index kernel = 1, stride = 1, padding = 0;

  Index out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  Index out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
  Index patch_size() const { return in_channels * kernel * kernel; }
};

// Column row r = (c*K + ky)*K + kx, matching a (C_out, C_in, K, K) weight
// flattened row-major into (C_out, C_in*K*K). Rows c*K*K .. c*K*K+K*K-1 are
// the block multiplied by the (c_out, c) slice.
template <typename Scalar, typename Plane>
void im2col(const Eigen::MatrixBase<Plane>& image, const ConvGeometry& g, MatrixX<Scalar>& cols) {
  const Index oh = g.out_height(), ow = g.out_width();
  cols.resize(g.patch_size(), oh * ow);
  for (Index c = 0; c < g.in_channels; ++c) {
    for (Index ky = 0; ky < g.kernel; ++ky) {
      for (Index kx = 0; kx < g.kernel; ++kx) {
        const Index r = (c * g.kernel + ky) * g.kernel + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            const bool inside = iy >= 0 && iy < g.height && ix >= 0 && ix < g.width;
            cols(r, oy * ow + ox) = inside ? image(c, iy * g.width + ix) : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters column gradients back onto the image plane.
template <typename Scalar, typename Plane>
void col2im(const MatrixX<Scalar>& cols, const ConvGeometry& g, Eigen::MatrixBase<Plane>& image) {
  const Index oh = g.out_height(), ow = g.out_width();
  for (Index c = 0; c < g.in_channels; ++c) {
    for (Index ky = 0; ky < g.kernel; ++ky) {
      for (Index kx = 0; kx < g.kernel; ++kx) {
        const Index r = (c * g.kernel + ky) * g.kernel + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.width) continue;
            image(c, iy * g.width + ix) += cols(r, oy * ow + ox);
          }
        }
      }
    }
  }
}

}  // namespace lnx

#endif  // LNX_NN_CONV_HPP_
