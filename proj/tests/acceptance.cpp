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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// fails. With arguments, runs only the listed criteria (e.g. `acceptance 1 5`).
// Training criteria use the MNIST subset under default_data_dir() and write
// their runs below ./acceptance_runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lnx/codec/range_coder.hpp"
#include "lnx/sparse_infer.hpp"
#include "lnx/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lnx;
using namespace lnx::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  std::string out(static_cast<std::size_t>(std::snprintf(nullptr, 0, fmt, args...)), '\0');
  std::snprintf(out.data(), out.size() + 1, fmt, args...);
  return out;
}

const fs::path kRuns = "acceptance_runs";

// Shared settings of the MNIST runs. Rate and penalties are divided by the
// batch size (summed-batch cross-entropy). The entropy models see ~10^3
// steps here, so they learn at 1e-2 rather than the long-run default.
RunConfig mnist_config(const std::string& dir) {
  RunConfig c;
  c.dataset = "mnist";
  c.architecture = "miniconv";
  c.lambda_i = 1e-4;
  c.objective_scale = ObjectiveScale::batch;
  c.lr_entropy = 1e-2;
  c.seed = 0;
  c.output_dir = (kRuns / dir).string();
  return c;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  constexpr int kInstances = 20;
  constexpr double kTolerance = 1e-3;
  double worst[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < kInstances; ++seed) {
    worst[0] = std::max(worst[0], xent_gradient_error(seed));
    worst[1] = std::max(worst[1], decode_gradient_error(seed));
    worst[2] = std::max(worst[2], rate_gradient_error(seed));
    worst[3] = std::max(worst[3], sparsity_gradient_error(seed));
  }
  const double max = *std::max_element(std::begin(worst), std::end(worst));
  return {max <= kTolerance, format("max rel. error over %d instances: xent %.2e, decode %.2e, rate %.2e, "
                                    "sparsity %.2e",
                                    kInstances, worst[0], worst[1], worst[2], worst[3])};
}

Outcome codec() {
  constexpr int kCases = 1000;
  std::mt19937_64 rng(2026);
  int lossless = 0, within = 0;
  double worst_excess = -1e300;
  for (int trial = 0; trial < kCases; ++trial) {
    const Index cols = std::uniform_int_distribution<Index>(1, 16)(rng);
    const Index rows = std::uniform_int_distribution<Index>(0, 400)(rng);
    const PmfTable t = random_table(cols, rng);
    IntMatrix x(rows, cols);
    std::bernoulli_distribution escape(trial % 4 == 0 ? 0.01 : 0.0);
    std::uniform_int_distribution<std::int32_t> wild(-100000, 100000);
    for (Index c = 0; c < cols; ++c) {
      const PmfChannel& ch = t.channels[static_cast<std::size_t>(c)];
      std::discrete_distribution<int> pick(ch.frequencies.begin(), ch.frequencies.end() - 1);
      for (Index r = 0; r < rows; ++r) x(r, c) = escape(rng) ? wild(rng) : ch.min_symbol + pick(rng);
    }
    const auto bytes = encode_tensor(x, t);
    lossless += decode_tensor(bytes, t, rows, cols) == x;
    const double excess = 8.0 * static_cast<double>(coded_payload_bytes(bytes)) - table_bits(t, x);
    within += excess <= 64;
    worst_excess = std::max(worst_excess, excess);
  }
  return {lossless == kCases && within == kCases,
          format("%d/%d exact round trips, %d/%d within ideal + 64 bits (worst excess %.1f bits)", lossless, kCases,
                 within, kCases, worst_excess)};
}

Outcome entropy_fit() {
  const EntropyFit fit = fit_rounded_gaussian(5000, 1);
  const double gap = fit.model_bits - fit.empirical_bits;
  return {std::abs(gap) <= 0.1, format("model %.4f vs histogram %.4f bits/element (gap %.4f, limit 0.1)",
                                       fit.model_bits, fit.empirical_bits, gap)};
}

Outcome init_variance() {
  constexpr int kTrials = 2000;
  const Architecture a = three_conv_stack();
  const std::size_t convs[] = {0, 2, 4};
  double sum[3] = {}, sq[3] = {}, count[3] = {};
  for (std::uint64_t trial = 0; trial < kTrials; ++trial) {
    std::mt19937_64 rng(trial);
    const auto m = make_latent_model<double>(a, ModelInit{}, rng);
    for (int k = 0; k < 3; ++k) {
      const auto& w = m.params.layers[convs[k]].weight;
      sum[k] += w.sum();
      sq[k] += w.squaredNorm();
      count[k] += static_cast<double>(w.size());
    }
  }
  bool pass = true;
  std::string detail;
  for (int k = 0; k < 3; ++k) {
    const double var = sq[k] / count[k] - std::pow(sum[k] / count[k], 2);
    const double target = 2.0 / static_cast<double>(layer_fan_in(a.layers[convs[k]]));
    pass = pass && std::abs(var / target - 1) <= 0.1;
    detail += format("%sfan %lld: Var/(2/f) = %.3f", k ? ", " : "", static_cast<long long>(layer_fan_in(a.layers[convs[k]])),
                     var / target);
  }
  return {pass, detail + " (limit +-10%)"};
}

Outcome block_sparse() {
  std::mt19937_64 rng(5);
  double worst = 0;
  int cases = 0, macs_ok = 0;
  for (int trial = 0; trial < 24; ++trial) {
    std::uniform_int_distribution<Index> ch(1, 24), side(3, 20);
    const ConvGeometry g{ch(rng), side(rng), side(rng), 3, std::uniform_int_distribution<Index>(1, 2)(rng),
                         std::uniform_int_distribution<Index>(0, 1)(rng)};
    const Index c_out = ch(rng);
    const LayerSpec spec = LayerSpec::conv2d(kNetworkInput, g.in_channels, c_out, 3, g.stride, g.padding);
    LatentTensor<double> latent = make_latent<double>(spec);
    std::uniform_int_distribution<int> v(-4, 4);
    std::bernoulli_distribution drop(0.8);
    for (Index r = 0; r < latent.rows(); ++r) {
      for (Index k = 0; k < 9; ++k) latent.surrogate(r, k) = v(rng);
      if (drop(rng)) latent.surrogate.row(r).setZero();
    }
    MatrixXd psi(9, 9);
    fill_normal(psi.data(), psi.size(), rng, 0.2);
    Tensor4<double> x(Shape4{2, g.in_channels, g.height, g.width});
    fill_normal(x.data.data(), x.data.size(), rng);
    const SliceMask mask = slice_mask(latent);
    std::int64_t macs = 0;
    const Tensor4<double> y = block_sparse_conv(x, latent, psi, mask, g, &macs);
    const Tensor4<double> ref = naive_conv(x, decode(latent, psi), g);
    worst = std::max(worst, (y.data - ref.data).cwiseAbs().maxCoeff());
    macs_ok += macs == 2 * counted_multiplies(spec, mask, g.out_height(), g.out_width());
    ++cases;
  }
  // Whole-network slice counts on sparse MiniConvs.
  int nets = 0, nets_ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 r(seed);
    auto m = make_latent_model<float>(make_architecture("miniconv", {1, 12, 12}, 10, {}), ModelInit{}, r);
    std::bernoulli_distribution drop(0.8);
    for (std::size_t i = 0; i < m.latents.size(); ++i) {
      if (!m.compressed(i)) continue;
      for (Index row = 0; row < m.latents[i].rows(); ++row) {
        if (drop(r)) m.latents[i].surrogate.row(row).setZero();
      }
    }
    m.decode_weights();
    const auto masks = model_masks(m);
    const FlopCounts f = count_flops(m.arch, m.params, masks);
    const auto shapes = m.arch.infer_shapes();
    bool ok = true;
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
      const LayerSpec& s = m.arch.layers[i];
      if (s.kind != LayerKind::conv2d) continue;
      ok = ok && f.layers[i].slice == counted_multiplies(s, masks[i], shapes[i].h, shapes[i].w);
    }
    nets_ok += ok;
    ++nets;
  }
  return {worst <= 1e-5 && macs_ok == cases && nets_ok == nets,
          format("%d convs at 80%% slice sparsity: max |sparse - dense| %.2e (limit 1e-5), MACs exact %d/%d; "
                 "network slice MACs exact %d/%d",
                 cases, worst, macs_ok, cases, nets_ok, nets)};
}

// Tuned coefficients for the MNIST compression target.
constexpr double kTargetLambdaU = 0;
constexpr double kTargetLambdaS = 1.5e-2;
constexpr int kTargetEpochs = 30;

Outcome mnist_target() {
  const DatasetSplit data = load_dataset("mnist", default_data_dir());
  RunConfig dense = mnist_config("dense-baseline");
  dense.reparameterize = false;
  dense.lambda_i = 0;
  dense.epochs = kTargetEpochs;
  RunConfig compressed = mnist_config("compressed");
  compressed.sparsity.lambda_unstructured = kTargetLambdaU;
  compressed.sparsity.lambda_structured = kTargetLambdaS;
  compressed.epochs = kTargetEpochs;

  const TrainResult base = train(dense, data);
  const Evaluation b = evaluate(base.state, data.test);
  const TrainResult run = train(compressed, data);
  const auto bytes = compress_state(run.state);
  const Evaluation e = evaluate_file(bytes, data.test);
  const double ratio = static_cast<double>(b.size.dense_bytes()) / static_cast<double>(bytes.size());
  const double drop = b.accuracy - e.accuracy;
  const double sparsity = e.sparsity.slice_sparsity();
  return {ratio >= 20 && drop <= 0.01 && sparsity >= 0.5,
          format("lambda_u %g lambda_s %g: %zu B vs %lld B dense (%.1fx, need 20x); top-1 %.4f vs %.4f "
                 "(drop %.2f pp, limit 1); slice sparsity %.3f (need 0.5)",
                 kTargetLambdaU, kTargetLambdaS, bytes.size(), static_cast<long long>(b.size.dense_bytes()), ratio,
                 e.accuracy, b.accuracy, 100 * drop, sparsity)};
}

constexpr double kGridLambdaU[] = {0, 1e-3, 1e-2};
constexpr double kGridLambdaS[] = {3e-3, 1e-2, 3e-2};
constexpr int kGridEpochs = 10;

Outcome monotone_trends() {
  const DatasetSplit data = load_dataset("mnist", default_data_dir());
  RunConfig base = mnist_config("grid");
  base.epochs = kGridEpochs;
  const std::vector<double> us(std::begin(kGridLambdaU), std::end(kGridLambdaU));
  const std::vector<double> ss(std::begin(kGridLambdaS), std::end(kGridLambdaS));
  const SweepResult r = sweep(base, us, ss, {base.seed}, data);
  // Cells are sorted by (lambda_u, lambda_s).
  auto cell = [&](std::size_t u, std::size_t s) { return r.cells[u * ss.size() + s]; };
  bool ok = true;
  std::string table;
  for (std::size_t u = 0; u < us.size(); ++u) {
    for (std::size_t s = 0; s < ss.size(); ++s) {
      const SweepCell c = cell(u, s);
      ok = ok && c.status == "ok";
      if (s > 0) ok = ok && c.slice_sparsity >= cell(u, s - 1).slice_sparsity;
      if (u > 0) ok = ok && c.coded_bytes <= cell(u - 1, s).coded_bytes;
      table += format(" [u=%g s=%g: sparsity %.3f, coded %lld B]", c.lambda_u, c.lambda_s, c.slice_sparsity,
                      static_cast<long long>(c.coded_bytes));
    }
  }
  return {ok, "slice sparsity nondecreasing in lambda_s, coded size nonincreasing in lambda_u:" + table};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const DatasetSplit data = load_dataset("mnist", default_data_dir());
  RunConfig a = mnist_config("repeat-a");
  a.epochs = 1;
  a.max_train_samples = 2000;
  a.sparsity.lambda_structured = 1e-2;
  RunConfig b = a;
  b.output_dir = (kRuns / "repeat-b").string();
  const TrainResult ra = train(a, data);
  train(b, data);
  const std::string fa = slurp(fs::path(a.output_dir) / "model.lnx");
  const std::string fb = slurp(fs::path(b.output_dir) / "model.lnx");
  const std::vector<std::uint8_t> bytes(fa.begin(), fa.end());
  const MatrixXf before = logits(ra.state.model, data.test.images);
  const MatrixXf after = logits(decompress_model(deserialize_model(bytes)), data.test.images);
  const bool same_file = !fa.empty() && fa == fb;
  const bool same_logits = before == after;
  return {same_file && same_logits, format("%zu B files %s; logits on %lld test images %s after reload", fa.size(),
                                           same_file ? "identical" : "DIFFER",
                                           static_cast<long long>(data.test.size()),
                                           same_logits ? "identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient correctness", 60, gradients},
      {2, "codec round trip and length", 60, codec},
      {3, "entropy model fit", 120, entropy_fit},
      {4, "initialization variance", 30, init_variance},
      {5, "block-sparse convolution and MAC counts", 60, block_sparse},
      {6, "MNIST compression target", 30 * 60, mnist_target},
      {7, "monotone sparsity and size trends", 2 * 3600, monotone_trends},
      {8, "reproducible files and reload", 600, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  // ctest hides the output of passing tests, so keep a copy of the results.
  fs::create_directories(kRuns);
  std::ofstream summary(kRuns / "summary.txt");
  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    const std::string line = format("%s  %d %s: %s; %.1f s (limit %.0f s)%s", pass ? "PASS" : "FAIL", c.id, c.name,
                                    o.detail.c_str(), seconds, c.limit_seconds, in_time ? "" : " OVER TIME");
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary << line << '\n' << std::flush;
  }
  return failed ? 1 : 0;
}
