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

#include "lnx/data.hpp"

#include <cstdlib>
#include <filesystem>

#include <zlib.h>

#include "lnx/codec/container.hpp"

#ifndef LNX_SOURCE_DATA_DIR
#define LNX_SOURCE_DATA_DIR "data"
#endif

namespace lnx {
namespace {

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at, const char* what) {
  if (at + 4 > b.size()) {
    throw FormatError(std::string(what) + ": truncated header at byte offset " + std::to_string(at));
  }
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

constexpr std::size_t kCifarRecord = 3073;

}  // namespace

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  std::vector<std::uint8_t> raw = read_file(path);
  if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;
  z_stream z{};
  if (inflateInit2(&z, 16 + MAX_WBITS) != Z_OK) throw Error("zlib: inflateInit failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  z.next_in = raw.data();
  z.avail_in = static_cast<uInt>(raw.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    z.next_out = chunk.data();
    z.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&z, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&z);
      throw FormatError("'" + path + "': corrupt gzip stream at byte offset " + std::to_string(z.total_in));
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - z.avail_out));
    if (rc == Z_OK && z.avail_in == 0 && z.avail_out != 0) {
      inflateEnd(&z);
      throw FormatError("'" + path + "': truncated gzip stream at byte offset " + std::to_string(z.total_in));
    }
  }
  inflateEnd(&z);
  return out;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  Index num_classes) {
  if (be32(images, 0, "idx images") != 0x00000803u) {
    throw FormatError("idx images: bad magic at byte offset 0 (expected 0x00000803)");
  }
  if (be32(labels, 0, "idx labels") != 0x00000801u) {
    throw FormatError("idx labels: bad magic at byte offset 0 (expected 0x00000801)");
  }
  const std::size_t n = be32(images, 4, "idx images");
  const std::size_t rows = be32(images, 8, "idx images");
  const std::size_t cols = be32(images, 12, "idx images");
  const std::size_t n_labels = be32(labels, 4, "idx labels");
  if (n != n_labels) {
    throw FormatError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  }
  const std::size_t plane = rows * cols;
  if (images.size() < 16 + n * plane) {
    throw FormatError("idx images: truncated at byte offset " + std::to_string(images.size()) + ", expected " +
                      std::to_string(16 + n * plane) + " bytes");
  }
  if (labels.size() < 8 + n) {
    throw FormatError("idx labels: truncated at byte offset " + std::to_string(labels.size()) + ", expected " +
                      std::to_string(8 + n) + " bytes");
  }
  Dataset d;
  d.num_classes = num_classes;
  d.images = Tensor4<float>(Shape4{static_cast<Index>(n), 1, static_cast<Index>(rows), static_cast<Index>(cols)});
  for (std::size_t i = 0; i < n * plane; ++i) d.images.data[static_cast<Index>(i)] = images[16 + i] / 255.0f;
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = labels[8 + i];
    if (y >= num_classes) {
      throw FormatError("idx labels: label " + std::to_string(y) + " out of range at byte offset " +
                        std::to_string(8 + i));
    }
    d.labels[i] = y;
  }
  return d;
}

Dataset parse_cifar10(std::span<const std::uint8_t> records) {
  if (records.size() % kCifarRecord != 0) {
    throw FormatError("cifar10: file size " + std::to_string(records.size()) +
                      " is not a multiple of 3073; partial record at byte offset " +
                      std::to_string(records.size() - records.size() % kCifarRecord));
  }
  const std::size_t n = records.size() / kCifarRecord;
  Dataset d;
  d.images = Tensor4<float>(Shape4{static_cast<Index>(n), 3, 32, 32});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* r = records.data() + i * kCifarRecord;
    if (r[0] > 9) {
      throw FormatError("cifar10: label " + std::to_string(r[0]) + " out of range at byte offset " +
                        std::to_string(i * kCifarRecord));
    }
    d.labels[i] = r[0];
    for (std::size_t k = 0; k < 3072; ++k) d.images.data[static_cast<Index>(i * 3072 + k)] = r[1 + k] / 255.0f;
  }
  return d;
}

void normalize(Dataset& d, std::span<const float> mean, std::span<const float> stddev) {
  const Index c = d.images.shape.c;
  if (static_cast<Index>(mean.size()) != c || static_cast<Index>(stddev.size()) != c) {
    throw ShapeError("normalize: need one mean and stddev per channel");
  }
  for (Index n = 0; n < d.images.shape.n; ++n) {
    auto s = d.images.sample(n);
    for (Index k = 0; k < c; ++k) {
      s.row(k) = (s.row(k).array() - mean[static_cast<std::size_t>(k)]) / stddev[static_cast<std::size_t>(k)];
    }
  }
}

Dataset stratified_subset(const Dataset& d, double fraction) {
  if (!(fraction > 0 && fraction <= 1)) throw Error("stratified_subset: fraction must be in (0, 1]");
  std::vector<Index> per_class(static_cast<std::size_t>(d.num_classes), 0), quota(per_class.size(), 0);
  for (std::int32_t y : d.labels) ++quota[static_cast<std::size_t>(y)];
  for (Index& q : quota) q = static_cast<Index>(std::llround(static_cast<double>(q) * fraction));
  std::vector<Index> keep;
  for (Index i = 0; i < d.size(); ++i) {
    const auto y = static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)]);
    if (per_class[y] < quota[y]) {
      ++per_class[y];
      keep.push_back(i);
    }
  }
  Dataset out;
  out.num_classes = d.num_classes;
  gather_batch(d, keep, out.images, out.labels);
  return out;
}

void gather_batch(const Dataset& d, std::span<const Index> indices, Tensor4<float>& images,
                  std::vector<std::int32_t>& labels) {
  const Shape4 s = d.images.shape;
  const Index per = s.per_sample();
  images = Tensor4<float>(Shape4{static_cast<Index>(indices.size()), s.c, s.h, s.w});
  labels.resize(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index i = indices[k];
    images.data.segment(static_cast<Index>(k) * per, per) = d.images.data.segment(i * per, per);
    labels[k] = d.labels[static_cast<std::size_t>(i)];
  }
}

std::string default_data_dir() {
  if (const char* env = std::getenv("LILNETX_DATA_DIR"); env && *env) return env;
  return LNX_SOURCE_DATA_DIR;
}

DatasetSplit load_dataset(const std::string& name, const std::string& root, double subset_fraction) {
  namespace fs = std::filesystem;
  DatasetSplit split;
  split.name = name;
  if (name == "mnist") {
    auto find = [&](const std::string& stem) {
      const fs::path base = fs::path(root) / "mnist" / stem;
      for (const char* ext : {"", ".gz"}) {
        if (fs::exists(base.string() + ext)) return base.string() + ext;
      }
      throw Error("mnist: missing " + base.string() + "[.gz] (set LILNETX_DATA_DIR)");
    };
    split.train = parse_idx(read_maybe_gzip(find("train-images-idx3-ubyte")),
                            read_maybe_gzip(find("train-labels-idx1-ubyte")));
    split.test = parse_idx(read_maybe_gzip(find("t10k-images-idx3-ubyte")),
                           read_maybe_gzip(find("t10k-labels-idx1-ubyte")));
    const float mean[] = {0.1307f}, stddev[] = {0.3081f};
    normalize(split.train, mean, stddev);
    normalize(split.test, mean, stddev);
  } else if (name == "cifar10-subset" || name == "cifar10") {
    const fs::path dir = fs::path(root) / "cifar-10-batches-bin";
    std::vector<std::uint8_t> train;
    for (int b = 1; b <= 5; ++b) {
      const auto bytes = read_file((dir / ("data_batch_" + std::to_string(b) + ".bin")).string());
      train.insert(train.end(), bytes.begin(), bytes.end());
    }
    split.train = parse_cifar10(train);
    if (name == "cifar10-subset") split.train = stratified_subset(split.train, subset_fraction);
    split.test = parse_cifar10(read_file((dir / "test_batch.bin").string()));
    const float mean[] = {0.4914f, 0.4822f, 0.4465f}, stddev[] = {0.2470f, 0.2435f, 0.2616f};
    normalize(split.train, mean, stddev);
    normalize(split.test, mean, stddev);
  } else {
    throw Error("unknown dataset '" + name + "' (expected mnist or cifar10-subset)");
  }
  return split;
}

void augment_crop_flip(Tensor4<float>& batch, std::mt19937_64& rng, Index pad) {
  const Index h = batch.shape.h, w = batch.shape.w;
  std::uniform_int_distribution<Index> shift(-pad, pad);
  std::bernoulli_distribution flip(0.5);
  MatrixXf src;
  for (Index n = 0; n < batch.shape.n; ++n) {
    auto s = batch.sample(n);
    src = s;
    const Index dy = shift(rng), dx = shift(rng);
    const bool mirror = flip(rng);
    for (Index c = 0; c < batch.shape.c; ++c) {
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          const Index sy = y + dy, sx0 = x + dx;
          const Index sx = mirror ? w - 1 - sx0 : sx0;
          const bool inside = sy >= 0 && sy < h && sx0 >= 0 && sx0 < w;
          s(c, y * w + x) = inside ? src(c, sy * w + sx) : 0.0f;
        }
      }
    }
  }
}

}  // namespace lnx
