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

// The .lnx model container.
//
// Layout (fixed-width integers little-endian, v = LEB128 varint, s = zigzag
// varint, floats as IEEE-754 binary32 bits):
//
//   "LNX1" | u16 version | u16 reserved | u64 file length
//   v json length | v n | architecture JSON, raw deflate (n bytes)
//   v groups;  per group:  u8 kind | v kernel | v l | v n | name
//                          f32 psi[l*l] (row-major)
//                          v channels; per channel: s min | v n | v freq[n]
//   v tensors; per tensor: v layer | v group | v rows | v cols
//                          v n | coded stream (payload | crc32)
//   v raws;    per raw:    v layer | u8 field | v n | f32 values[n]
//   u32 crc32 of every preceding byte

#ifndef LNX_CODEC_CONTAINER_HPP_
#define LNX_CODEC_CONTAINER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lnx/entropy_model.hpp"
#include "lnx/model.hpp"
#include "lnx/nn/architecture.hpp"

namespace lnx {

inline constexpr char kLnxMagic[4] = {'L', 'N', 'X', '1'};
inline constexpr std::uint16_t kLnxVersion = 2;

struct CompressedGroup {
  std::string name;
  LayerKind kind = LayerKind::conv2d;
  Index kernel = 1;
  Index slice_length = 1;
  MatrixXf psi;
  PmfTable table;
};

struct CompressedTensor {
  std::uint32_t layer = 0;
  std::uint32_t group = 0;
  Index rows = 0, cols = 0;          // latent shape (C_out*C_in, l)
  std::vector<std::uint8_t> stream;  // encode_tensor() output
};

enum class RawField : std::uint8_t { weight, bias, gamma, beta, running_mean, running_var };

struct RawTensor {
  std::uint32_t layer = 0;
  RawField field = RawField::bias;
  std::vector<float> values;
};

struct CompressedModel {
  Architecture arch;
  std::vector<CompressedGroup> groups;
  std::vector<CompressedTensor> tensors;
  std::vector<RawTensor> raw;
};

std::vector<std::uint8_t> serialize_model(const CompressedModel& model);
/// Throws FormatError on bad magic/version, length or checksum mismatch, or
/// contents inconsistent with the architecture.
CompressedModel deserialize_model(std::span<const std::uint8_t> bytes);

/// File bytes by role. The five parts always add up to `total`.
struct SizeBreakdown {
  std::int64_t coded = 0;     // entropy-coded latent payloads
  std::int64_t tables = 0;    // PMF tables
  std::int64_t decoders = 0;  // psi matrices
  std::int64_t raw = 0;       // uncompressed float parameters
  std::int64_t header = 0;    // everything else: framing, descriptor, checksums
  std::int64_t total = 0;
  std::int64_t dense_parameters = 0;

  /// 32-bit float size of the dense network.
  std::int64_t dense_bytes() const { return 4 * dense_parameters; }
  double compression_ratio() const {
    return total > 0 ? static_cast<double>(dense_bytes()) / static_cast<double>(total) : 0.0;
  }
  std::string to_json() const;
};

SizeBreakdown report_size(std::span<const std::uint8_t> file);

/// Coding tables frozen from each group's density over the observed latent
/// range (widened by one on each side).
std::vector<PmfTable> freeze_tables(const LatentModel<float>& model,
                                    const std::vector<FactorizedDensity>& densities);

CompressedModel compress_model(const LatentModel<float>& model, const std::vector<PmfTable>& tables);

/// Rebuilds the latent model with integer surrogates and decoded weights.
LatentModel<float> decompress_model(const CompressedModel& model);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace lnx

#endif  // LNX_CODEC_CONTAINER_HPP_
