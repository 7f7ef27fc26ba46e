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

// Command-line entry points: train, eval, compress, decompress, sweep, bench
// and report.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lnx/codec/container.hpp"
#include "lnx/config.hpp"
#include "lnx/data.hpp"
#include "lnx/sparse_infer.hpp"
#include "lnx/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lnx;

struct Common {
  std::string config_path;
  std::vector<std::string> settings;  // key=value
  std::string data_dir;
  std::string output;
  double lambda_u = -1, lambda_s = -1, lambda_i = -1;
  long long seed = -1;
  int epochs = -1;
};

void add_common(CLI::App* app, Common& c, bool training) {
  app->add_option("-c,--config", c.config_path, "key = value config file");
  app->add_option("--set", c.settings, "Override a config key (key=value), repeatable");
  app->add_option("--data-dir", c.data_dir, "Dataset root (default: $LILNETX_DATA_DIR or ./data)");
  if (training) {
    app->add_option("--lambda-u", c.lambda_u, "Unstructured sparsity coefficient");
    app->add_option("--lambda-s", c.lambda_s, "Structured (slice) sparsity coefficient");
    app->add_option("--lambda-i", c.lambda_i, "Rate coefficient");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--epochs", c.epochs, "Training epochs");
    app->add_option("-o,--output", c.output, "Run directory");
  }
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  for (const std::string& s : c.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string v) {
      v.erase(0, v.find_first_not_of(' '));
      v.erase(v.find_last_not_of(' ') + 1);
      return v;
    };
    apply_setting(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (c.lambda_u >= 0) cfg.sparsity.lambda_unstructured = c.lambda_u;
  if (c.lambda_s >= 0) cfg.sparsity.lambda_structured = c.lambda_s;
  if (c.lambda_i >= 0) cfg.lambda_i = c.lambda_i;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.epochs >= 0) cfg.epochs = c.epochs;
  if (!c.output.empty()) cfg.output_dir = c.output;
  if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
  cfg.validate();
  return cfg;
}

DatasetSplit data_for(const RunConfig& cfg) {
  return load_dataset(cfg.dataset, cfg.data_dir.empty() ? default_data_dir() : cfg.data_dir, cfg.subset_fraction);
}

// A .lnx file or a training checkpoint, as a latent model.
LatentModel<float> load_model(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 4 && std::equal(kLnxMagic, kLnxMagic + 4, bytes.begin())) {
    return decompress_model(deserialize_model(bytes));
  }
  return load_checkpoint(path).model;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v{};
    if (!(is >> v)) throw Error("cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lnx: compressed, slice-sparse networks"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a run; writes metrics.csv, checkpoint and model.lnx");
  add_common(train_cmd, train_opts, true);
  bool quiet = false;
  train_cmd->add_flag("-q,--quiet", quiet, "No per-epoch log");

  Common eval_opts;
  std::string eval_model;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy, sparsity and size of a .lnx file or checkpoint");
  add_common(eval_cmd, eval_opts, false);
  eval_cmd->add_option("model", eval_model, "Model file")->required();

  std::string compress_in, compress_out;
  auto* compress_cmd = app.add_subcommand("compress", "Checkpoint -> .lnx");
  compress_cmd->add_option("checkpoint", compress_in)->required();
  compress_cmd->add_option("output", compress_out)->required();

  std::string decompress_in, decompress_out;
  auto* decompress_cmd = app.add_subcommand("decompress", ".lnx -> checkpoint with decoded weights");
  decompress_cmd->add_option("model", decompress_in)->required();
  decompress_cmd->add_option("output", decompress_out)->required();

  Common sweep_opts;
  std::string grid_u = "0", grid_s = "0", grid_seeds = "0";
  int workers = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train a lambda_u x lambda_s x seed grid; writes pareto.csv/json");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--lambda-u-grid", grid_u, "Comma-separated lambda_u values");
  sweep_cmd->add_option("--lambda-s-grid", grid_s, "Comma-separated lambda_s values");
  sweep_cmd->add_option("--seeds", grid_seeds, "Comma-separated seeds");
  sweep_cmd->add_option("--workers", workers, "Concurrent cells");

  Common bench_opts;
  std::string bench_model;
  Index bench_batch = 128;
  auto* bench_cmd = app.add_subcommand("bench", "Dense vs structurally pruned forward time on the test split");
  add_common(bench_cmd, bench_opts, false);
  bench_cmd->add_option("model", bench_model)->required();
  bench_cmd->add_option("--batch", bench_batch, "Batch size");

  std::string report_model;
  auto* report_cmd = app.add_subcommand("report", "Size breakdown and sparsity of a .lnx file");
  report_cmd->add_option("model", report_model)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const RunConfig cfg = resolve(train_opts);
      TrainOptions options;
      options.verbose = !quiet;
      const TrainResult r = train(cfg, data_for(cfg), options);
      std::cout << read_file((fs::path(cfg.output_dir) / "report.json").string()).size() << " bytes of report in "
                << cfg.output_dir << "/report.json\n";
      if (!r.metrics.empty()) {
        std::cout << metrics_csv_header() << "\n" << metrics_csv_row(r.metrics.back()) << "\n";
      }
    } else if (*eval_cmd) {
      const RunConfig cfg = resolve(eval_opts);
      const DatasetSplit data = data_for(cfg);
      const auto bytes = read_file(eval_model);
      if (bytes.size() >= 4 && std::equal(kLnxMagic, kLnxMagic + 4, bytes.begin())) {
        std::cout << evaluate_file(bytes, data.test).to_json() << "\n";
      } else {
        std::cout << evaluate(load_checkpoint(eval_model), data.test).to_json() << "\n";
      }
    } else if (*compress_cmd) {
      const auto bytes = compress_state(load_checkpoint(compress_in));
      write_file(compress_out, bytes);
      std::cout << report_size(bytes).to_json() << "\n";
    } else if (*decompress_cmd) {
      TrainState s;
      s.model = decompress_model(deserialize_model(read_file(decompress_in)));
      s.cfg.architecture = s.model.arch.name;
      save_checkpoint(decompress_out, s);
      std::cout << "wrote " << decompress_out << "\n";
    } else if (*sweep_cmd) {
      RunConfig cfg = resolve(sweep_opts);
      if (workers > 0) cfg.workers = workers;
      const SweepResult r = sweep(cfg, parse_list<double>(grid_u), parse_list<double>(grid_s),
                                  parse_list<std::uint64_t>(grid_seeds), data_for(cfg), true);
      std::cout << read_file((fs::path(cfg.output_dir) / "pareto.csv").string()).data();
      std::size_t failed = 0;
      for (const auto& c : r.cells) failed += c.status != "ok";
      if (failed) std::cerr << failed << " cell(s) failed; see result.json in their run directories\n";
    } else if (*bench_cmd) {
      const RunConfig cfg = resolve(bench_opts);
      const DatasetSplit data = data_for(cfg);
      const LatentModel<float> m = load_model(bench_model);
      const FlopCounts flops = count_flops(m.arch, m.params, model_masks(m));
      const PrunedNetwork pruned = prune_network(m.arch, m.params, flops.plan);
      const SpeedupResult s = bench_speedup(m.arch, m.params, pruned.arch, pruned.params, data.test.images, bench_batch);
      SparsityReport rep = analyze(m);
      rep.dense_ms = s.dense_ms;
      rep.pruned_ms = s.pruned_ms;
      rep.threads = s.threads;
      std::cout << rep.to_json() << "\n";
    } else if (*report_cmd) {
      const auto bytes = read_file(report_model);
      const LatentModel<float> m = decompress_model(deserialize_model(bytes));
      std::cout << "{\n\"size\": " << report_size(bytes).to_json() << ",\n\"sparsity\": " << analyze(m).to_json()
                << "\n}\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
