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

#include "lnx/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lnx/codec/range_coder.hpp"
#include "lnx/io/binary.hpp"
#include "lnx/nn/loss.hpp"
#include "lnx/sparsity.hpp"

namespace lnx {
namespace {

namespace fs = std::filesystem;

// Independent RNG streams from one seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
    f << text;
    if (!f) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_bytes_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp.string(), bytes);
  fs::rename(tmp, path);
}

Dataset limit(const Dataset& d, Index max_samples) {
  if (max_samples <= 0 || max_samples >= d.size()) return d;
  std::vector<Index> idx(static_cast<std::size_t>(max_samples));
  std::iota(idx.begin(), idx.end(), Index{0});
  Dataset out;
  out.num_classes = d.num_classes;
  gather_batch(d, idx, out.images, out.labels);
  return out;
}

constexpr char kCheckpointMagic[4] = {'L', 'N', 'X', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

std::string metrics_csv_header() {
  return "epoch,xent,rate_bits,unstructured,group,accuracy,size_bytes,slice_sparsity,"
         "unstructured_sparsity,sflops_fraction";
}

std::string metrics_csv_row(const MetricsRow& r) {
  return std::to_string(r.epoch) + "," + fmt(r.xent) + "," + fmt(r.rate_bits) + "," + fmt(r.unstructured) + "," +
         fmt(r.group) + "," + fmt(r.accuracy) + "," + std::to_string(r.size_bytes) + "," + fmt(r.slice_sparsity) +
         "," + fmt(r.unstructured_sparsity) + "," + fmt(r.sflops_fraction);
}

TrainState init_state(const RunConfig& cfg, const Dataset& train) {
  cfg.validate();
  TrainState s;
  s.cfg = cfg;
  const Shape3 input{train.images.shape.c, train.images.shape.h, train.images.shape.w};
  const Architecture arch = make_architecture(cfg.architecture, input, train.num_classes, cfg.widths);
  std::mt19937_64 rng(derive_seed(cfg.seed, 1));
  ModelInit init;
  init.b_min = cfg.b_min;
  init.rule = cfg.init_rule;
  init.reparameterize = cfg.reparameterize;
  s.model = make_latent_model<float>(arch, init, rng);
  DensityConfig dc;
  dc.init_scale = cfg.density_init_scale;
  for (std::size_t g = 0; g < s.model.groups.size(); ++g) {
    s.densities.emplace_back(s.model.groups[g].slice_length, dc, derive_seed(cfg.seed, 100 + g));
  }
  return s;
}

double accuracy(const Architecture& arch, const NetworkParams<float>& params, const Dataset& data, Index batch) {
  const Network<float> net(arch);
  Index correct = 0;
  for (Index start = 0; start < data.size(); start += batch) {
    const Index count = std::min(batch, data.size() - start);
    const MatrixXf out = net.forward(params, slice_batch(data.images, start, count), Mode::eval, nullptr);
    for (Index i = 0; i < count; ++i) {
      correct += argmax_row(out, i) == data.labels[static_cast<std::size_t>(start + i)];
    }
  }
  return data.size() > 0 ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

MatrixXf logits(const LatentModel<float>& model, const Tensor4<float>& images) {
  return Network<float>(model.arch).forward(model.params, images, Mode::eval, nullptr);
}

std::vector<std::uint8_t> compress_state(const TrainState& state) {
  if (state.densities.size() != state.model.groups.size()) {
    throw Error("compress: the model has no entropy model (was it decompressed from a .lnx file?)");
  }
  LatentModel<float> m = state.model;
  m.decode_weights();
  return serialize_model(compress_model(m, freeze_tables(m, state.densities)));
}

std::string Evaluation::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["size"] = nlohmann::ordered_json::parse(size.to_json());
  j["sparsity"] = nlohmann::ordered_json::parse(sparsity.to_json());
  return j.dump(2);
}

Evaluation evaluate(const TrainState& state, const Dataset& test) {
  LatentModel<float> m = state.model;
  m.decode_weights();
  Evaluation e;
  e.accuracy = accuracy(m.arch, m.params, test);
  e.sparsity = analyze(m);
  if (state.densities.size() == m.groups.size()) e.size = report_size(compress_state(state));
  return e;
}

Evaluation evaluate_file(std::span<const std::uint8_t> file, const Dataset& test) {
  const LatentModel<float> m = decompress_model(deserialize_model(file));
  Evaluation e;
  e.accuracy = accuracy(m.arch, m.params, test);
  e.sparsity = analyze(m);
  e.size = report_size(file);
  return e;
}

TrainResult train(const RunConfig& cfg, const DatasetSplit& data, const TrainOptions& options) {
  cfg.validate();
  const Dataset train_set = limit(data.train, cfg.max_train_samples);
  if (train_set.size() < 2) throw Error("train: need at least two training samples");
  TrainResult result;
  result.state = init_state(cfg, train_set);
  TrainState& state = result.state;
  LatentModel<float>& m = state.model;
  const Network<float> net(m.arch);
  const std::size_t layer_count = m.arch.layers.size();
  const double divisor = cfg.objective_scale == ObjectiveScale::dataset ? static_cast<double>(train_set.size())
                         : cfg.objective_scale == ObjectiveScale::batch ? static_cast<double>(cfg.batch_size)
                                                                        : 1.0;
  const bool augment = cfg.augmentation_enabled();

  Adam<float> main_opt(AdamHyper{cfg.lr_main});
  Adam<double> entropy_opt(AdamHyper{cfg.lr_entropy});
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 2)), noise_rng(derive_seed(cfg.seed, 3)),
      augment_rng(derive_seed(cfg.seed, 4));

  const fs::path out_dir = cfg.output_dir;
  std::string csv = metrics_csv_header() + "\n";
  if (options.write_outputs) {
    fs::create_directories(out_dir);
    write_text(out_dir / "config.txt", cfg.to_text());
    write_text(out_dir / "metrics.csv", csv);
  }

  std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch = cfg.batch_size;
  const Index batches = (train_set.size() + batch - 1) / batch;
  const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * batches;
  std::int64_t step = 0;

  Tensor4<float> images;
  std::vector<std::int32_t> labels;
  std::vector<MatrixXf> latent_grads(layer_count);
  std::vector<MatrixXf> psi_grads(m.groups.size());
  const bool penalties = cfg.sparsity.lambda_unstructured > 0 || cfg.sparsity.lambda_structured > 0;
  const float wd = static_cast<float>(cfg.weight_decay);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_xent = 0, sum_bits = 0, sum_u = 0, sum_s = 0;
    Index counted = 0;
    for (Index b = 0; b < batches; ++b) {
      const Index first = b * batch, count = std::min(batch, train_set.size() - first);
      if (count < 2) continue;  // batchnorm needs two samples
      gather_batch(train_set, std::span<const Index>(order).subspan(static_cast<std::size_t>(first), static_cast<std::size_t>(count)), images, labels);
      if (augment) augment_crop_flip(images, augment_rng);
      main_opt.set_learning_rate(cosine_lr(step, total_steps, cfg.lr_main));

      m.decode_weights();
      ForwardCache<float> cache;
      const MatrixXf out = net.forward(m.params, images, Mode::train, &cache);
      const LossResult<float> loss = xent_loss<float>(out, labels);
      const NetworkParams<float> grads = net.backward(m.params, loss.grad, cache);
      net.update_running_stats(m.params, cache);

      for (std::size_t g = 0; g < m.groups.size(); ++g) psi_grads[g] = MatrixXf::Zero(m.psi[g].rows(), m.psi[g].cols());
      for (std::size_t i = 0; i < layer_count; ++i) {
        if (!m.compressed(i)) continue;
        const auto g = static_cast<std::size_t>(m.group_of[i]);
        SteGradients<float> ste = ste_backward(grads.layers[i].weight, m.psi[g], m.latents[i]);
        latent_grads[i] = std::move(ste.surrogate);
        psi_grads[g] += ste.psi;
      }

      double bits = 0;
      if (cfg.lambda_i > 0 || cfg.lr_entropy > 0) {
        const auto rate_scale = static_cast<float>(cfg.lambda_i / divisor);
        for (std::size_t g = 0; g < m.groups.size(); ++g) {
          const ParameterGroup& grp = m.groups[g];
          Index rows = 0;
          for (int idx : grp.members) rows += m.latents[static_cast<std::size_t>(idx)].rows();
          MatrixXd values(rows, grp.slice_length);
          Index at = 0;
          for (int idx : grp.members) {
            const auto& s = m.latents[static_cast<std::size_t>(idx)].surrogate;
            values.middleRows(at, s.rows()) = s.cast<double>();
            at += s.rows();
          }
          const MatrixXd noise = sample_uniform_noise(rows, grp.slice_length, noise_rng);
          const RateResult rate = noisy_rate_loss(state.densities[g], values, noise, grp.name);
          bits += rate.bits;
          if (rate_scale > 0) {
            at = 0;
            for (int idx : grp.members) {
              auto& lg = latent_grads[static_cast<std::size_t>(idx)];
              lg += rate_scale * rate.grad_values.middleRows(at, lg.rows()).cast<float>();
              at += lg.rows();
            }
          }
          apply_density_gradient(state.densities[g], entropy_opt, rate.grad_params, "density/" + grp.name);
        }
      }

      double unstructured = 0, structured = 0;
      if (penalties) {
        const auto surrogates = m.surrogates();
        const ComputeLossResult<float> pen = compute_loss<float>(surrogates, cfg.sparsity);
        unstructured = pen.unstructured;
        structured = pen.structured;
        const auto scale = static_cast<float>(1.0 / divisor);
        std::size_t k = 0;
        for (std::size_t i = 0; i < layer_count; ++i) {
          if (m.compressed(i)) latent_grads[i] += scale * pen.grads[k++];
        }
      }

      const double objective = loss.loss + (cfg.lambda_i * bits + unstructured + structured) / divisor;
      if (!std::isfinite(objective)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + " (objective " + fmt(objective) + ")");
      }

      for (std::size_t i = 0; i < layer_count; ++i) {
        LayerParams<float>& p = m.params.layers[i];
        const LayerParams<float>& gp = grads.layers[i];
        const std::string id = std::to_string(i);
        if (m.compressed(i)) main_opt.step("latent/" + id, m.latents[i].surrogate, latent_grads[i]);
        else if (m.arch.layers[i].has_weight()) main_opt.step("weight/" + id, p.weight, gp.weight + wd * p.weight);
        if (p.bias.size()) main_opt.step("bias/" + id, p.bias, gp.bias + wd * p.bias);
        if (p.gamma.size()) {
          main_opt.step("gamma/" + id, p.gamma, gp.gamma + wd * p.gamma);
          main_opt.step("beta/" + id, p.beta, gp.beta + wd * p.beta);
        }
      }
      for (std::size_t g = 0; g < m.groups.size(); ++g) {
        main_opt.step("psi/" + m.groups[g].name, m.psi[g], psi_grads[g] + wd * m.psi[g]);
      }
      m.params.touch();

      sum_xent += loss.loss;
      sum_bits += bits;
      sum_u += unstructured;
      sum_s += structured;
      ++counted;
      ++step;
    }

    m.decode_weights();
    if (cfg.bn_recalibration) recalibrate_batchnorm(m.arch, m.params, train_set, batch);
    state.epoch = epoch;
    const Evaluation eval = evaluate(state, data.test);
    MetricsRow row;
    row.epoch = epoch;
    const double denom = counted > 0 ? static_cast<double>(counted) : 1.0;
    row.xent = sum_xent / denom;
    row.rate_bits = sum_bits / denom;
    row.unstructured = sum_u / denom;
    row.group = sum_s / denom;
    row.accuracy = eval.accuracy;
    row.size_bytes = eval.size.total;
    row.slice_sparsity = eval.sparsity.slice_sparsity();
    row.unstructured_sparsity = eval.sparsity.unstructured_sparsity();
    row.sflops_fraction = eval.sparsity.slice_flop_fraction();
    result.metrics.push_back(row);
    csv += metrics_csv_row(row) + "\n";
    if (options.write_outputs) {
      write_text(out_dir / "metrics.csv", csv);
      save_checkpoint((out_dir / "checkpoint.lnxc").string(), state);
    }
    if (options.verbose) {
      std::cerr << "epoch " << epoch << "  xent " << row.xent << "  bits " << row.rate_bits << "  acc "
                << row.accuracy << "  size " << row.size_bytes << " B  slice sparsity " << row.slice_sparsity
                << "\n";
    }
    if (options.on_epoch) options.on_epoch(row);
  }

  if (options.write_outputs) {
    const auto bytes = compress_state(state);
    write_bytes_atomic(out_dir / "model.lnx", bytes);
    write_text(out_dir / "report.json", evaluate_file(bytes, data.test).to_json() + "\n");
  }
  return result;
}

void recalibrate_batchnorm(const Architecture& arch, NetworkParams<float>& params, const Dataset& data,
                           Index batch) {
  if (std::none_of(arch.layers.begin(), arch.layers.end(),
                   [](const LayerSpec& l) { return l.kind == LayerKind::batchnorm; })) {
    return;
  }
  const Network<float> net(arch);
  std::vector<Index> indices;
  Tensor4<float> images;
  std::vector<std::int32_t> labels;
  int seen = 0;
  for (Index first = 0; first + 2 <= data.size(); first += batch) {
    const Index count = std::min(batch, data.size() - first);
    indices.resize(static_cast<std::size_t>(count));
    std::iota(indices.begin(), indices.end(), first);
    gather_batch(data, indices, images, labels);
    ForwardCache<float> cache;
    net.forward(params, images, Mode::train, &cache);
    ++seen;
    net.update_running_stats(params, cache, 1.0f / static_cast<float>(seen));
  }
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  ByteWriter w;
  for (char c : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.str(state.cfg.to_text());
  w.u32(static_cast<std::uint32_t>(state.epoch));
  const LatentModel<float>& m = state.model;
  w.str(m.arch.to_json());
  for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
    const LayerParams<float>& p = m.params.layers[i];
    w.floats(p.weight);
    w.floats(p.bias);
    w.floats(p.gamma);
    w.floats(p.beta);
    w.floats(p.running_mean);
    w.floats(p.running_var);
    w.u8(m.compressed(i) ? 1 : 0);
    if (m.compressed(i)) w.floats(m.latents[i].surrogate);
  }
  w.u32(static_cast<std::uint32_t>(m.psi.size()));
  for (const auto& p : m.psi) w.floats(p);
  w.u32(static_cast<std::uint32_t>(state.densities.size()));
  for (const FactorizedDensity& d : state.densities) {
    w.u64(static_cast<std::uint64_t>(d.channels()));
    w.u32(static_cast<std::uint32_t>(d.config().hidden.size()));
    for (int h : d.config().hidden) w.u32(static_cast<std::uint32_t>(h));
    w.f64(d.config().init_scale);
    w.f64(d.config().likelihood_floor);
    w.floats(d.parameters());
  }
  w.u32(crc32(w.bytes()));
  write_bytes_atomic(path, w.bytes());
}

TrainState load_checkpoint(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < 12 || !std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin())) {
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int b = 0; b < 4; ++b) stored |= std::uint32_t{bytes[body + static_cast<std::size_t>(b)]} << (8 * b);
  if (crc32(std::span<const std::uint8_t>(bytes).first(body)) != stored) throw FormatError("'" + path + "': checksum mismatch");
  ByteReader r(std::span<const std::uint8_t>(bytes).subspan(4, body - 4));
  if (r.u32() != kCheckpointVersion) throw FormatError("'" + path + "': unsupported checkpoint version");
  TrainState s;
  s.cfg = parse_config(r.str());
  s.epoch = static_cast<int>(r.u32());
  LatentModel<float>& m = s.model;
  m.arch = Architecture::from_json(r.str());
  const std::size_t layers = m.arch.layers.size();
  m.params = make_params<float>(m.arch);
  m.latents.resize(layers);
  m.group_of.assign(layers, -1);
  std::vector<int> compressed;
  for (std::size_t i = 0; i < layers; ++i) {
    LayerParams<float>& p = m.params.layers[i];
    r.floats(p.weight);
    r.floats(p.bias);
    r.floats(p.gamma);
    r.floats(p.beta);
    r.floats(p.running_mean);
    r.floats(p.running_var);
    if (r.u8()) {
      m.latents[i] = make_latent<float>(m.arch.layers[i]);
      MatrixXf surrogate;
      r.floats(surrogate);
      if (surrogate.rows() != m.latents[i].rows() || surrogate.cols() != m.latents[i].slice_length()) {
        throw FormatError("'" + path + "': latent shape mismatch at layer " + std::to_string(i));
      }
      m.latents[i].surrogate = std::move(surrogate);
      compressed.push_back(static_cast<int>(i));
    }
  }
  if (!compressed.empty()) m.groups = partition_model(m.arch, compressed);
  for (std::size_t g = 0; g < m.groups.size(); ++g) {
    for (int idx : m.groups[g].members) m.group_of[static_cast<std::size_t>(idx)] = static_cast<int>(g);
  }
  if (r.u32() != m.groups.size()) throw FormatError("'" + path + "': decoder count mismatch");
  m.psi.resize(m.groups.size());
  for (auto& p : m.psi) r.floats(p);
  // A decompressed model carries no entropy model: zero densities is valid.
  const std::uint32_t densities = r.u32();
  if (densities != 0 && densities != m.groups.size()) throw FormatError("'" + path + "': density count mismatch");
  for (std::uint32_t g = 0; g < densities; ++g) {
    const auto channels = static_cast<Index>(r.u64());
    DensityConfig dc;
    dc.hidden.resize(r.u32());
    for (int& h : dc.hidden) h = static_cast<int>(r.u32());
    dc.init_scale = r.f64();
    dc.likelihood_floor = r.f64();
    FactorizedDensity d(channels, dc, 0);
    VectorXd theta;
    r.floats(theta);
    if (theta.size() != d.parameters().size()) throw FormatError("'" + path + "': density size mismatch");
    d.parameters() = theta;
    s.densities.push_back(std::move(d));
  }
  m.decode_weights();
  return s;
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string cell_json(const SweepCell& c, std::uint64_t hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hex(hash);
  j["lambda_u"] = c.lambda_u;
  j["lambda_s"] = c.lambda_s;
  j["seed"] = c.seed;
  j["status"] = c.status;
  j["error"] = c.error;
  j["accuracy"] = c.accuracy;
  j["coded_bytes"] = c.coded_bytes;
  j["total_bytes"] = c.total_bytes;
  j["slice_sparsity"] = c.slice_sparsity;
  j["sflops_fraction"] = c.sflops_fraction;
  j["run_dir"] = c.run_dir;
  return j.dump(2);
}

bool load_cell(const fs::path& file, std::uint64_t hash, SweepCell& c) {
  std::ifstream f(file);
  if (!f) return false;
  try {
    const auto j = nlohmann::json::parse(f);
    if (j.at("config_hash").get<std::string>() != hex(hash) || j.at("status").get<std::string>() != "ok") {
      return false;
    }
    c.status = "ok";
    c.accuracy = j.at("accuracy").get<double>();
    c.coded_bytes = j.at("coded_bytes").get<std::int64_t>();
    c.total_bytes = j.at("total_bytes").get<std::int64_t>();
    c.slice_sparsity = j.at("slice_sparsity").get<double>();
    c.sflops_fraction = j.at("sflops_fraction").get<double>();
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

SweepResult sweep(const RunConfig& base, const std::vector<double>& lambda_u,
                  const std::vector<double>& lambda_s, const std::vector<std::uint64_t>& seeds,
                  const DatasetSplit& data, bool verbose) {
  if (lambda_u.empty() || lambda_s.empty() || seeds.empty()) throw Error("sweep: grids must be nonempty");
  base.validate();
  SweepResult result;
  std::vector<RunConfig> configs;
  for (double u : lambda_u) {
    for (double s : lambda_s) {
      for (std::uint64_t seed : seeds) {
        RunConfig c = base;
        c.sparsity.lambda_unstructured = u;
        c.sparsity.lambda_structured = s;
        c.seed = seed;
        c.workers = 1;
        c.output_dir = (fs::path(base.output_dir) / ("cell-" + hex(c.result_hash()))).string();
        SweepCell cell;
        cell.lambda_u = u;
        cell.lambda_s = s;
        cell.seed = seed;
        cell.run_dir = c.output_dir;
        configs.push_back(c);
        result.cells.push_back(cell);
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      const RunConfig& c = configs[k];
      SweepCell& cell = result.cells[k];
      const fs::path result_file = fs::path(c.output_dir) / "result.json";
      const std::uint64_t hash = c.result_hash();
      if (load_cell(result_file, hash, cell)) continue;
      try {
        const TrainResult run = train(c, data);
        const auto bytes = compress_state(run.state);
        const Evaluation e = evaluate_file(bytes, data.test);
        cell.status = "ok";
        cell.accuracy = e.accuracy;
        cell.coded_bytes = e.size.coded;
        cell.total_bytes = e.size.total;
        cell.slice_sparsity = e.sparsity.slice_sparsity();
        cell.sflops_fraction = e.sparsity.slice_flop_fraction();
      } catch (const std::exception& ex) {
        cell.status = "failed";
        cell.error = ex.what();
      }
      fs::create_directories(c.output_dir);
      write_text(result_file, cell_json(cell, hash) + "\n");
      if (verbose) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "cell lambda_u=" << cell.lambda_u << " lambda_s=" << cell.lambda_s << " seed=" << cell.seed
                  << ": " << cell.status << " acc " << cell.accuracy << " coded " << cell.coded_bytes
                  << " B slice sparsity " << cell.slice_sparsity << "\n";
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, base.workers));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, configs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::stable_sort(result.cells.begin(), result.cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return std::tie(a.lambda_u, a.lambda_s, a.seed) < std::tie(b.lambda_u, b.lambda_s, b.seed);
  });

  fs::create_directories(base.output_dir);
  std::string csv =
      "lambda_u,lambda_s,seed,status,accuracy,coded_bytes,total_bytes,slice_sparsity,sflops_fraction\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SweepCell& c : result.cells) {
    csv += fmt(c.lambda_u) + "," + fmt(c.lambda_s) + "," + std::to_string(c.seed) + "," + c.status + "," +
           fmt(c.accuracy) + "," + std::to_string(c.coded_bytes) + "," + std::to_string(c.total_bytes) + "," +
           fmt(c.slice_sparsity) + "," + fmt(c.sflops_fraction) + "\n";
    rows.push_back(nlohmann::ordered_json::parse(cell_json(c, configs.front().result_hash())));
    rows.back().erase("config_hash");
  }
  write_text(fs::path(base.output_dir) / "pareto.csv", csv);
  nlohmann::ordered_json j;
  j["op_unit"] = "MAC (1 MAC = 2 FLOPs)";
  j["size_unit"] = "bytes";
  j["cells"] = std::move(rows);
  write_text(fs::path(base.output_dir) / "pareto.json", j.dump(2) + "\n");
  return result;
}

}  // namespace lnx
