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

// Run configuration: flat "key = value" text, '#' starts a comment. Unknown
// keys and malformed values are errors that name the line.

#ifndef LNX_CONFIG_HPP_
#define LNX_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lnx/reparam.hpp"
#include "lnx/sparsity.hpp"

namespace lnx {

enum class Augment : std::uint8_t { automatic, on, off };
/// Divisor of the model-level terms (rate and penalties) in the per-step
/// objective, relative to the mean batch cross-entropy: 1 (`unit`); the batch
/// size (`batch`), equivalent to summing the batch cross-entropy; or the
/// training-set size (`dataset`), which makes each step an unbiased estimate
/// of the whole-dataset objective / N.
enum class ObjectiveScale : std::uint8_t { unit, batch, dataset };

struct RunConfig {
  std::string dataset = "mnist";  // mnist | cifar10-subset
  std::string architecture = "miniconv";
  std::vector<Index> widths;      // empty: the architecture's default
  int epochs = 10;
  Index batch_size = 128;
  std::uint64_t seed = 0;
  double lr_main = 1e-2;
  double lr_entropy = 1e-4;
  double lambda_i = 1e-4;
  ObjectiveScale objective_scale = ObjectiveScale::unit;
  SparsityConfig sparsity;
  double b_min = 2.0;
  InitRule init_rule = InitRule::exact_rounding;
  /// false: plain float weights, no latents, no rate or sparsity terms.
  bool reparameterize = true;
  /// Re-estimate batchnorm statistics over the training split after every
  /// epoch instead of keeping the momentum averages.
  bool bn_recalibration = true;
  /// L2 coefficient on decoders, biases, batchnorm and uncompressed weights.
  double weight_decay = 0;
  double density_init_scale = 4;
  double subset_fraction = 0.1;   // cifar10-subset training split
  Augment augment = Augment::automatic;
  Index max_train_samples = 0;    // 0: the whole training split
  std::string data_dir;           // empty: default_data_dir()
  std::string output_dir = "runs/default";
  int workers = 1;                // sweep cells run concurrently

  void validate() const;
  bool augmentation_enabled() const;
  /// Canonical text: every key, fixed order, round-trips through parse_config.
  std::string to_text() const;
  /// Hash of everything that affects results (not paths or worker count).
  std::uint64_t result_hash() const;
};

RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path);
/// Sets one key as if it appeared in a config file.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

}  // namespace lnx

#endif  // LNX_CONFIG_HPP_
