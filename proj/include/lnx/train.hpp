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

// Training, evaluation, checkpoints and lambda sweeps.
//
// Each step minimizes
//
//     mean batch xent + (lambda_i * bits + lambda_u * U(W) + lambda_s * S(W)) / D
//
// with D = 1 by default (objective_scale = unit), D = the batch size
// (objective_scale = batch) or D = N, the training-set size
// (objective_scale = dataset). Bits are the self-information of the
// noisy surrogates under each group's density. Two Adam optimizers run side
// by side: the main one (cosine schedule) on surrogates, decoders, biases
// and batchnorm; the entropy one (constant rate) on density parameters,
// which are fitted to the noisy surrogates by minimizing their bits.

#ifndef LNX_TRAIN_HPP_
#define LNX_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lnx/codec/container.hpp"
#include "lnx/config.hpp"
#include "lnx/data.hpp"
#include "lnx/entropy_model.hpp"
#include "lnx/model.hpp"
#include "lnx/sparse_infer.hpp"

namespace lnx {

struct MetricsRow {
  int epoch = 0;
  double xent = 0;          // mean over the epoch's batches
  double rate_bits = 0;     // mean noisy bits of the whole model
  double unstructured = 0;  // lambda_u * U, mean over batches
  double group = 0;         // lambda_s * S, mean over batches
  double accuracy = 0;      // top-1 on the test split
  std::int64_t size_bytes = 0;  // .lnx file size
  double slice_sparsity = 0;
  double unstructured_sparsity = 0;
  double sflops_fraction = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

/// Everything needed to evaluate, compress or resume inspection of a run.
struct TrainState {
  RunConfig cfg;
  LatentModel<float> model;
  std::vector<FactorizedDensity> densities;  // one per parameter group
  int epoch = 0;
};

/// Fresh, initialized state for `cfg` on data shaped like `train`.
TrainState init_state(const RunConfig& cfg, const Dataset& train);

struct TrainOptions {
  bool write_outputs = true;  // config.txt, metrics.csv, checkpoint, model.lnx
  bool verbose = false;
  std::function<void(const MetricsRow&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> metrics;
};

/// Throws NumericError when the loss becomes non-finite; the checkpoint of
/// the last completed epoch stays on disk.
TrainResult train(const RunConfig& cfg, const DatasetSplit& data, const TrainOptions& options = {});

/// Replaces batchnorm running statistics with the average of per-batch
/// statistics over `data` in file order (no augmentation). Training-mode
/// forward passes only; no other parameter changes.
void recalibrate_batchnorm(const Architecture& arch, NetworkParams<float>& params, const Dataset& data,
                           Index batch);

/// Top-1 accuracy in eval mode.
double accuracy(const Architecture& arch, const NetworkParams<float>& params, const Dataset& data,
                Index batch = 256);

/// Eval-mode logits of a batch.
MatrixXf logits(const LatentModel<float>& model, const Tensor4<float>& images);

/// Serialized .lnx bytes: tables frozen from the densities.
std::vector<std::uint8_t> compress_state(const TrainState& state);

struct Evaluation {
  double accuracy = 0;
  SparsityReport sparsity;
  SizeBreakdown size;
  std::string to_json() const;
};

Evaluation evaluate(const TrainState& state, const Dataset& test);
/// Evaluation of a decoded .lnx file.
Evaluation evaluate_file(std::span<const std::uint8_t> file, const Dataset& test);

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

struct SweepCell {
  double lambda_u = 0, lambda_s = 0;
  std::uint64_t seed = 0;
  std::string status = "pending";  // ok | failed
  std::string error;
  double accuracy = 0;
  std::int64_t coded_bytes = 0;  // entropy-coded latents only
  std::int64_t total_bytes = 0;  // whole .lnx file
  double slice_sparsity = 0;
  double sflops_fraction = 0;
  std::string run_dir;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by (lambda_u, lambda_s, seed)
};

/// One training run per (lambda_u, lambda_s, seed) under base.output_dir,
/// up to base.workers at a time. Cells whose run directory already holds a
/// result for the same configuration hash are loaded instead of retrained.
/// Writes pareto.csv and pareto.json to base.output_dir.
SweepResult sweep(const RunConfig& base, const std::vector<double>& lambda_u,
                  const std::vector<double>& lambda_s, const std::vector<std::uint64_t>& seeds,
                  const DatasetSplit& data, bool verbose = false);

}  // namespace lnx

#endif  // LNX_TRAIN_HPP_
