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

// Little-endian byte streams for the checkpoint format.

#ifndef LNX_IO_BINARY_HPP_
#define LNX_IO_BINARY_HPP_

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lnx/types.hpp"

namespace lnx {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  template <typename Derived>
  void floats(const Eigen::DenseBase<Derived>& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    const auto& d = m.derived();
    for (Index i = 0; i < d.size(); ++i) {
      if constexpr (std::is_same_v<typename Derived::Scalar, double>) f64(d.data()[i]);
      else f32(static_cast<float>(d.data()[i]));
    }
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  /// Reads a matrix or vector written by ByteWriter::floats.
  template <typename M>
  void floats(M& m) {
    const auto rows = static_cast<Index>(u64()), cols = static_cast<Index>(u64());
    const std::size_t width = std::is_same_v<typename M::Scalar, double> ? 8 : 4;
    if (rows < 0 || cols < 0 || (cols > 0 && static_cast<std::uint64_t>(rows) > remaining() / width / static_cast<std::uint64_t>(cols))) {
      throw FormatError("truncated tensor at byte offset " + std::to_string(pos_));
    }
    m.resize(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      if constexpr (std::is_same_v<typename M::Scalar, double>) m.data()[i] = f64();
      else m.data()[i] = f32();
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw FormatError("truncated data at byte offset " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace lnx

#endif  // LNX_IO_BINARY_HPP_
