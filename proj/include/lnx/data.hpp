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

// Dataset readers: MNIST in IDX format (optionally gzipped) and CIFAR-10 in
// its binary record format, plus stratified subsetting and augmentation.

#ifndef LNX_DATA_HPP_
#define LNX_DATA_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lnx/nn/tensor.hpp"

namespace lnx {

struct Dataset {
  Tensor4<float> images;  // normalized, NCHW
  std::vector<std::int32_t> labels;
  Index num_classes = 10;

  Index size() const { return static_cast<Index>(labels.size()); }
};

struct DatasetSplit {
  std::string name;
  Dataset train, test;
};

/// Bytes of a file, gunzipped when it starts with the gzip magic.
std::vector<std::uint8_t> read_maybe_gzip(const std::string& path);

/// Parses IDX image (magic 0x00000803) and label (0x00000801) buffers.
/// Pixels are scaled to [0, 1]; errors name the byte offset.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  Index num_classes = 10);

/// Parses concatenated 3073-byte CIFAR-10 records (label, 3x32x32 pixels).
Dataset parse_cifar10(std::span<const std::uint8_t> records);

/// Per-channel (x - mean) / stddev.
void normalize(Dataset& d, std::span<const float> mean, std::span<const float> stddev);

/// `fraction` of every class, first occurrences in file order.
Dataset stratified_subset(const Dataset& d, double fraction);

/// Loads "mnist" or "cifar10-subset" from `root` (see default_data_dir()).
/// For MNIST: root/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz].
/// For CIFAR-10: root/cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin;
/// the training split is reduced to `subset_fraction` per class.
DatasetSplit load_dataset(const std::string& name, const std::string& root,
                          double subset_fraction = 0.1);

/// $LILNETX_DATA_DIR if set, else the data/ directory of the source tree.
std::string default_data_dir();

/// Random crop with zero padding `pad` and horizontal flip, per sample.
void augment_crop_flip(Tensor4<float>& batch, std::mt19937_64& rng, Index pad = 4);

/// Copies the samples at `indices` into a batch.
void gather_batch(const Dataset& d, std::span<const Index> indices, Tensor4<float>& images,
                  std::vector<std::int32_t>& labels);

}  // namespace lnx

#endif  // LNX_DATA_HPP_
