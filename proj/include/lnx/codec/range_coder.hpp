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

// Integer range coder with 16-bit frequency totals.
//
// The encoder keeps a 64-bit `low` (bit 32 is the pending carry) and a
// 32-bit `range`, renormalizing a byte at a time whenever range < 2^24;
// carries are resolved with the usual cached-byte/0xFF-run scheme. The very
// first output byte is always zero and is not stored. At the end the encoder
// picks the value in the final interval with the most trailing zero bytes and
// drops those bytes; the decoder reads zeros past the end of its input.
// Everything is integer arithmetic, so streams are identical on every
// platform.

#ifndef LNX_CODEC_RANGE_CODER_HPP_
#define LNX_CODEC_RANGE_CODER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "lnx/entropy_model.hpp"
#include "lnx/types.hpp"

namespace lnx {

class RangeEncoder {
 public:
  static constexpr std::uint32_t kTotalBits = 16;

  /// Codes the sub-interval [start, start + size) of [0, 2^16).
  void encode(std::uint32_t start, std::uint32_t size);
  /// 16 raw bits, each value equally likely.
  void encode_raw16(std::uint32_t value) { encode(value & 0xFFFFu, 1); }
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  /// Position of the next symbol within [0, 2^16); throws FormatError when
  /// the stream cannot have come from the encoder.
  std::uint32_t peek();
  /// Removes the interval chosen after peek().
  void consume(std::uint32_t start, std::uint32_t size);
  std::uint32_t decode_raw16();

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t step_ = 0;
};

/// Cumulative frequencies of every channel of a table, for coding.
class CodingTable {
 public:
  explicit CodingTable(const PmfTable& table);

  std::size_t channels() const { return cumulative_.size(); }
  const PmfChannel& channel(std::size_t i) const { return table_.channels[i]; }
  std::uint32_t start(std::size_t channel, std::size_t index) const {
    return cumulative_[channel][index];
  }
  std::uint32_t size(std::size_t channel, std::size_t index) const {
    return cumulative_[channel][index + 1] - cumulative_[channel][index];
  }
  /// Index whose interval contains `position`.
  std::size_t find(std::size_t channel, std::uint32_t position) const;

 private:
  PmfTable table_;
  std::vector<std::vector<std::uint32_t>> cumulative_;
};

/// Bytes of the CRC32 trailer appended to every coded tensor.
inline constexpr std::size_t kTensorTrailerBytes = 4;

/// Codes a latent matrix row by row (column i uses table channel i).
/// Symbols outside a channel's support are sent as the tail symbol followed
/// by the 32-bit two's-complement value. Output: payload | crc32(payload).
std::vector<std::uint8_t> encode_tensor(const IntMatrix& latent, const PmfTable& table);

/// Inverse of encode_tensor. Throws FormatError on a checksum mismatch,
/// truncation or an impossible stream; never returns partial output.
IntMatrix decode_tensor(std::span<const std::uint8_t> bytes, const PmfTable& table, Index rows,
                        Index cols);

/// Length of the coded payload inside an encode_tensor() result.
inline std::size_t coded_payload_bytes(std::span<const std::uint8_t> bytes) {
  return bytes.size() < kTensorTrailerBytes ? 0 : bytes.size() - kTensorTrailerBytes;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace lnx

#endif  // LNX_CODEC_RANGE_CODER_HPP_
