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

#include "lnx/codec/range_coder.hpp"

#include <algorithm>

#include <zlib.h>

namespace lnx {
namespace {

constexpr std::uint32_t kTop = 1u << 24;

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes 32-bit lengths.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(std::uint32_t start, std::uint32_t size) {
  if (finished_) throw Error("RangeEncoder: encode after finish");
  if (size == 0 || start + size > (1u << kTotalBits)) throw Error("RangeEncoder: bad interval");
  const std::uint32_t step = range_ >> kTotalBits;
  low_ += static_cast<std::uint64_t>(start) * step;
  range_ = step * size;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw Error("RangeEncoder: finish called twice");
  finished_ = true;
  // Value in [low, low + range) with the most trailing zero bits.
  const std::uint64_t end = low_ + range_;
  for (int zeros = 32; zeros >= 0; zeros -= 8) {
    const std::uint64_t unit = std::uint64_t{1} << zeros;
    const std::uint64_t candidate = (low_ + unit - 1) & ~(unit - 1);
    if (candidate < end) {
      low_ = candidate;
      break;
    }
  }
  for (int i = 0; i < 5; ++i) shift_low();
  // The first byte stands for the part above the initial interval: always 0.
  std::vector<std::uint8_t> out(out_.begin() + 1, out_.end());
  while (!out.empty() && out.back() == 0) out.pop_back();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() { return pos_ < bytes_.size() ? bytes_[pos_++] : 0; }

std::uint32_t RangeDecoder::peek() {
  step_ = range_ >> RangeEncoder::kTotalBits;
  const std::uint32_t value = code_ / step_;
  if (value >= (1u << RangeEncoder::kTotalBits)) throw FormatError("range decoder: corrupt stream");
  return value;
}

void RangeDecoder::consume(std::uint32_t start, std::uint32_t size) {
  code_ -= start * step_;
  range_ = step_ * size;
  if (code_ >= range_) throw FormatError("range decoder: corrupt stream");
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::decode_raw16() {
  const std::uint32_t v = peek();
  consume(v, 1);
  return v;
}

CodingTable::CodingTable(const PmfTable& table) : table_(table) {
  validate_pmf_table(table_);
  for (const PmfChannel& ch : table_.channels) {
    std::vector<std::uint32_t> cum(ch.frequencies.size() + 1, 0);
    for (std::size_t k = 0; k < ch.frequencies.size(); ++k) cum[k + 1] = cum[k] + ch.frequencies[k];
    cumulative_.push_back(std::move(cum));
  }
}

std::size_t CodingTable::find(std::size_t channel, std::uint32_t position) const {
  const auto& cum = cumulative_[channel];
  const auto it = std::upper_bound(cum.begin(), cum.end(), position);
  return static_cast<std::size_t>(it - cum.begin()) - 1;
}

std::vector<std::uint8_t> encode_tensor(const IntMatrix& latent, const PmfTable& table) {
  if (latent.cols() != static_cast<Index>(table.channels.size()) && latent.size() != 0) {
    throw ShapeError("encode_tensor: tensor has " + std::to_string(latent.cols()) +
                     " columns, table has " + std::to_string(table.channels.size()) + " channels");
  }
  std::vector<std::uint8_t> out;
  if (latent.size() != 0) {
    const CodingTable coding(table);
    RangeEncoder enc;
    for (Index j = 0; j < latent.rows(); ++j) {
      for (Index i = 0; i < latent.cols(); ++i) {
        const auto c = static_cast<std::size_t>(i);
        const PmfChannel& ch = coding.channel(c);
        const std::int32_t s = latent(j, i);
        if (s >= ch.min_symbol && s <= ch.max_symbol()) {
          const auto k = static_cast<std::size_t>(static_cast<std::int64_t>(s) - ch.min_symbol);
          enc.encode(coding.start(c, k), coding.size(c, k));
        } else {
          const std::size_t tail = ch.tail_index();
          enc.encode(coding.start(c, tail), coding.size(c, tail));
          const auto raw = static_cast<std::uint32_t>(s);
          enc.encode_raw16(raw >> 16);
          enc.encode_raw16(raw & 0xFFFFu);
        }
      }
    }
    out = enc.finish();
  }
  const std::uint32_t crc = crc32(out);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(crc >> (8 * b)));
  return out;
}

IntMatrix decode_tensor(std::span<const std::uint8_t> bytes, const PmfTable& table, Index rows,
                        Index cols) {
  if (bytes.size() < kTensorTrailerBytes) throw FormatError("decode_tensor: truncated stream");
  const auto payload = bytes.first(bytes.size() - kTensorTrailerBytes);
  std::uint32_t stored = 0;
  for (int b = 0; b < 4; ++b) stored |= std::uint32_t{bytes[payload.size() + b]} << (8 * b);
  if (crc32(payload) != stored) throw FormatError("decode_tensor: checksum mismatch");
  IntMatrix out(rows, cols);
  if (out.size() == 0) return out;
  if (cols != static_cast<Index>(table.channels.size())) {
    throw ShapeError("decode_tensor: shape does not match the table");
  }
  const CodingTable coding(table);
  RangeDecoder dec(payload);
  for (Index j = 0; j < rows; ++j) {
    for (Index i = 0; i < cols; ++i) {
      const auto c = static_cast<std::size_t>(i);
      const PmfChannel& ch = coding.channel(c);
      const std::size_t k = coding.find(c, dec.peek());
      dec.consume(coding.start(c, k), coding.size(c, k));
      if (k == ch.tail_index()) {
        const std::uint32_t hi = dec.decode_raw16();
        const std::uint32_t lo = dec.decode_raw16();
        out(j, i) = static_cast<std::int32_t>((hi << 16) | lo);
      } else {
        out(j, i) = static_cast<std::int32_t>(ch.min_symbol + static_cast<std::int64_t>(k));
      }
    }
  }
  return out;
}

}  // namespace lnx
