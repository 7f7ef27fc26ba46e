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

#include "lnx/sparse_infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace lnx {
namespace {

// What a channel of an activation tensor is known to hold in eval mode.
enum class State : std::uint8_t { zero, constant, live };

struct Channel {
  State state = State::live;
  double value = 0;    // for State::constant
  bool exact = true;   // value computed without rounding
};

// Tolerance for deciding that an inexactly computed constant is negative.
constexpr double kConstantTolerance = 1e-6;

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

Channel after_relu(Channel x) {
  if (x.state != State::constant) return x;
  if (x.value > 0) return x;
  if (x.exact || x.value < -kConstantTolerance) return {State::zero, 0, true};
  return {State::constant, 0, false};
}

Channel add_channels(const Channel& a, const Channel& b) {
  if (a.state == State::zero) return b;
  if (b.state == State::zero) return a;
  if (a.state == State::live || b.state == State::live) return {};
  return {State::constant, a.value + b.value, false};
}

Channel after_batchnorm(const Channel& x, float gamma, float beta, float mean, float var) {
  if (x.state == State::live) return x;
  const double v = x.state == State::zero ? 0.0 : x.value;
  if (x.exact && static_cast<float>(v) == mean) {
    // Normalized value is exactly zero, so the output is exactly beta.
    if (beta == 0) return {State::zero, 0, true};
    return {State::constant, beta, true};
  }
  const double y = gamma * (v - mean) / std::sqrt(static_cast<double>(var) + kBatchNormEpsilon) + beta;
  return {State::constant, y, false};
}

struct Analysis {
  std::vector<Shape3> shapes;
  std::vector<std::vector<Channel>> states;  // index layers.size() is the input
  DisjointSets spaces{0};
  std::vector<std::uint8_t> whole;           // per root
  std::size_t input_id = 0;

  std::size_t id(int tensor) const {
    return tensor == kNetworkInput ? input_id : static_cast<std::size_t>(tensor);
  }
};

SliceMask mask_or_weights(const std::vector<SliceMask>& masks, const NetworkParams<float>& params,
                          const LayerSpec& spec, std::size_t i) {
  const Index slices = spec.out_channels * spec.in_channels;
  if (i < masks.size() && masks[i].size() > 0) {
    if (masks[i].size() != slices) {
      throw ShapeError("layer " + std::to_string(i) + ": mask has " + std::to_string(masks[i].size()) +
                       " slices, expected " + std::to_string(slices));
    }
    return masks[i];
  }
  return weight_mask(params.layers[i].weight, spec.slice_length());
}

// Spatial positions per channel of a dense layer's input (1 for conv).
Index features_per_channel(const Analysis& a, const LayerSpec& spec) {
  if (spec.kind != LayerKind::dense) return 1;
  const auto& in = a.states[a.id(spec.inputs[0])];
  return spec.in_channels / static_cast<Index>(in.size());
}

// Does kept output `o` of a weight layer read input channel `c`?
bool reads(const LayerSpec& spec, const SliceMask& mask, Index per_channel, Index o, Index c) {
  if (spec.kind == LayerKind::conv2d) return !mask.zero[static_cast<std::size_t>(o * spec.in_channels + c)];
  for (Index p = 0; p < per_channel; ++p) {
    if (!mask.zero[static_cast<std::size_t>(o * spec.in_channels + c * per_channel + p)]) return true;
  }
  return false;
}

}  // namespace

Index SliceMask::zero_count() const {
  return static_cast<Index>(std::count(zero.begin(), zero.end(), std::uint8_t{1}));
}

double SliceMask::sparsity() const {
  return zero.empty() ? 0.0 : static_cast<double>(zero_count()) / static_cast<double>(zero.size());
}

SliceMask slice_mask(const IntMatrix& latent) {
  SliceMask m;
  m.slice_length = latent.cols();
  m.zero.resize(static_cast<std::size_t>(latent.rows()));
  for (Index j = 0; j < latent.rows(); ++j) m.zero[static_cast<std::size_t>(j)] = (latent.row(j).array() == 0).all();
  return m;
}

std::vector<SliceMask> weight_masks(const Architecture& arch, const NetworkParams<float>& params) {
  std::vector<SliceMask> masks(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].has_weight()) masks[i] = weight_mask(params.layers[i].weight, arch.layers[i].slice_length());
  }
  return masks;
}

std::vector<SliceMask> model_masks(const LatentModel<float>& model) {
  std::vector<SliceMask> masks = weight_masks(model.arch, model.params);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (model.compressed(i)) masks[i] = slice_mask(model.latents[i]);
  }
  return masks;
}

ChannelPlan plan_pruning(const Architecture& arch, const NetworkParams<float>& params,
                         const std::vector<SliceMask>& masks) {
  const std::size_t count = arch.layers.size();
  Analysis a;
  a.shapes = arch.infer_shapes();
  a.input_id = count;
  a.states.resize(count + 1);
  a.states[count].assign(static_cast<std::size_t>(arch.input.c), Channel{});
  a.spaces = DisjointSets(count + 1);
  std::vector<SliceMask> layer_masks(count);

  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& s = arch.layers[i];
    const LayerParams<float>& p = params.layers[i];
    const auto& x = a.states[a.id(s.inputs[0])];
    auto& y = a.states[i];
    y.assign(static_cast<std::size_t>(a.shapes[i].c), Channel{});
    switch (s.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense: {
        layer_masks[i] = mask_or_weights(masks, params, s, i);
        const Index per = features_per_channel(a, s);
        for (Index o = 0; o < s.out_channels; ++o) {
          bool live = false;
          for (Index c = 0; c < static_cast<Index>(x.size()) && !live; ++c) {
            live = x[static_cast<std::size_t>(c)].state != State::zero && reads(s, layer_masks[i], per, o, c);
          }
          const float bias = s.bias ? p.bias[o] : 0.0f;
          auto& out = y[static_cast<std::size_t>(o)];
          if (live) out = {};
          else if (bias == 0) out = {State::zero, 0, true};
          else out = {State::constant, bias, true};
        }
        break;
      }
      case LayerKind::batchnorm:
        for (std::size_t c = 0; c < y.size(); ++c) {
          const auto k = static_cast<Index>(c);
          y[c] = after_batchnorm(x[c], p.gamma[k], p.beta[k], p.running_mean[k], p.running_var[k]);
        }
        a.spaces.unite(a.id(s.inputs[0]), i);
        break;
      case LayerKind::relu:
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = after_relu(x[c]);
        a.spaces.unite(a.id(s.inputs[0]), i);
        break;
      case LayerKind::avgpool:
        y = x;
        a.spaces.unite(a.id(s.inputs[0]), i);
        break;
      case LayerKind::add: {
        const auto& x2 = a.states[a.id(s.inputs[1])];
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = add_channels(x[c], x2[c]);
        a.spaces.unite(a.id(s.inputs[0]), i);
        a.spaces.unite(a.id(s.inputs[1]), i);
        break;
      }
      case LayerKind::shortcut: {
        const auto pad = static_cast<std::size_t>((s.out_channels - s.in_channels) / 2);
        for (std::size_t c = 0; c < y.size(); ++c) {
          y[c] = c >= pad && c < pad + x.size() ? x[c - pad] : Channel{State::zero, 0, true};
        }
        break;
      }
    }
  }

  a.whole.assign(count + 1, 0);
  a.whole[a.spaces.find(count)] = 1;
  a.whole[a.spaces.find(count - 1)] = 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (arch.layers[i].kind == LayerKind::shortcut) {
      a.whole[a.spaces.find(i)] = 1;
      a.whole[a.spaces.find(a.id(arch.layers[i].inputs[0]))] = 1;
    }
  }

  std::vector<std::vector<std::uint8_t>> nonzero(count + 1), needed(count + 1);
  for (std::size_t t = 0; t <= count; ++t) {
    const std::size_t r = a.spaces.find(t);
    auto& nz = nonzero[r];
    nz.resize(a.states[t].size(), 0);
    needed[r].resize(a.states[t].size(), 0);
    for (std::size_t c = 0; c < nz.size(); ++c) nz[c] |= a.states[t][c].state != State::zero;
  }
  auto kept = [&](std::size_t root, std::size_t c) {
    return a.whole[root] || (needed[root][c] && nonzero[root][c]);
  };

  // Least fixpoint: a channel is needed when a kept output reads it.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = count; i-- > 0;) {
      const LayerSpec& s = arch.layers[i];
      if (!s.has_weight()) continue;
      const std::size_t out_root = a.spaces.find(i);
      const std::size_t in_id = a.id(s.inputs[0]);
      const std::size_t in_root = a.spaces.find(in_id);
      if (a.whole[in_root]) continue;
      const Index per = features_per_channel(a, s);
      const auto& x = a.states[in_id];
      for (Index o = 0; o < s.out_channels; ++o) {
        if (!kept(out_root, static_cast<std::size_t>(o))) continue;
        for (std::size_t c = 0; c < x.size(); ++c) {
          if (needed[in_root][c] || x[c].state == State::zero) continue;
          if (reads(s, layer_masks[i], per, o, static_cast<Index>(c))) {
            needed[in_root][c] = 1;
            changed = true;
          }
        }
      }
    }
  }

  ChannelPlan plan;
  plan.input_kept.resize(static_cast<std::size_t>(arch.input.c));
  std::iota(plan.input_kept.begin(), plan.input_kept.end(), Index{0});
  plan.kept.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = a.spaces.find(i);
    for (std::size_t c = 0; c < a.states[i].size(); ++c) {
      if (kept(r, c)) plan.kept[i].push_back(static_cast<Index>(c));
    }
    // A fully dead space keeps one channel so every layer stays well formed.
    if (plan.kept[i].empty() && !a.states[i].empty()) plan.kept[i].push_back(0);
  }
  return plan;
}

FlopCounts count_flops(const Architecture& arch, const NetworkParams<float>& params,
                       const std::vector<SliceMask>& masks) {
  FlopCounts f;
  f.plan = plan_pruning(arch, params, masks);
  const auto shapes = arch.infer_shapes();
  f.layers.resize(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& s = arch.layers[i];
    if (!s.has_weight()) continue;
    const SliceMask mask = mask_or_weights(masks, params, s, i);
    const Index l = s.slice_length();
    const Index positions = s.kind == LayerKind::conv2d ? shapes[i].h * shapes[i].w : 1;
    const Index live = mask.size() - mask.zero_count();
    const auto& kept_in = f.plan.of(s.inputs[0]);
    const Shape3 in_shape = s.inputs[0] == kNetworkInput ? arch.input : shapes[static_cast<std::size_t>(s.inputs[0])];
    const Index per = s.kind == LayerKind::dense ? s.in_channels / in_shape.c : 1;
    MacCounts& m = f.layers[i];
    m.dense = s.out_channels * s.in_channels * l * positions;
    m.slice = live * l * positions;
    m.structured = static_cast<Index>(f.plan.kept[i].size()) * static_cast<Index>(kept_in.size()) * per * l * positions;
    f.total += m;
  }
  return f;
}

PrunedNetwork prune_network(const Architecture& arch, const NetworkParams<float>& params,
                            const ChannelPlan& plan) {
  PrunedNetwork out;
  out.arch = arch;
  out.params = make_params<float>(arch);
  const auto shapes = arch.infer_shapes();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& s = arch.layers[i];
    LayerSpec& t = out.arch.layers[i];
    const LayerParams<float>& p = params.layers[i];
    LayerParams<float>& q = out.params.layers[i];
    const auto& ko = plan.kept[i];
    const auto& ki = plan.of(s.inputs[0]);
    const auto n_out = static_cast<Index>(ko.size()), n_in = static_cast<Index>(ki.size());
    switch (s.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense: {
        const Shape3 in_shape = s.inputs[0] == kNetworkInput ? arch.input : shapes[static_cast<std::size_t>(s.inputs[0])];
        const Index block = s.kind == LayerKind::conv2d ? s.slice_length() : s.in_channels / in_shape.c;
        t.out_channels = n_out;
        t.in_channels = s.kind == LayerKind::conv2d ? n_in : n_in * block;
        q.weight.resize(n_out, n_in * block);
        for (Index o = 0; o < n_out; ++o) {
          for (Index c = 0; c < n_in; ++c) {
            q.weight.block(o, c * block, 1, block) = p.weight.block(ko[static_cast<std::size_t>(o)], ki[static_cast<std::size_t>(c)] * block, 1, block);
          }
        }
        if (s.bias) q.bias = p.bias(ko);
        break;
      }
      case LayerKind::batchnorm:
        t.in_channels = t.out_channels = n_out;
        q.gamma = p.gamma(ko);
        q.beta = p.beta(ko);
        q.running_mean = p.running_mean(ko);
        q.running_var = p.running_var(ko);
        break;
      case LayerKind::relu:
      case LayerKind::avgpool:
      case LayerKind::add:
        t.in_channels = t.out_channels = n_out;
        break;
      case LayerKind::shortcut:
        if (n_in != s.in_channels || n_out != s.out_channels) {
          throw Error("prune_network: shortcut layer " + std::to_string(i) + " cannot be pruned");
        }
        break;
    }
  }
  out.arch.name = arch.name + "-pruned";
  out.arch.validate();
  return out;
}

double LayerSparsity::slice_sparsity() const {
  return slices > 0 ? static_cast<double>(zero_slices) / static_cast<double>(slices) : 0.0;
}

double LayerSparsity::unstructured_sparsity() const {
  return latent_elements > 0 ? static_cast<double>(zero_elements) / static_cast<double>(latent_elements) : 0.0;
}

double SparsityReport::slice_sparsity() const {
  return slices > 0 ? static_cast<double>(zero_slices) / static_cast<double>(slices) : 0.0;
}

double SparsityReport::unstructured_sparsity() const {
  return latent_elements > 0 ? static_cast<double>(zero_elements) / static_cast<double>(latent_elements) : 0.0;
}

double SparsityReport::slice_flop_fraction() const {
  return macs.dense > 0 ? static_cast<double>(macs.slice) / static_cast<double>(macs.dense) : 0.0;
}

double SparsityReport::structured_flop_fraction() const {
  return macs.dense > 0 ? static_cast<double>(macs.structured) / static_cast<double>(macs.dense) : 0.0;
}

std::string SparsityReport::to_json() const {
  using nlohmann::ordered_json;
  auto macs_json = [](const MacCounts& m) {
    ordered_json j;
    j["dense"] = m.dense;
    j["slice"] = m.slice;
    j["structured"] = m.structured;
    return j;
  };
  ordered_json j;
  j["op_unit"] = "MAC (1 MAC = 2 FLOPs)";
  j["slice_sparsity"] = slice_sparsity();
  j["unstructured_sparsity"] = unstructured_sparsity();
  j["slices"] = slices;
  j["zero_slices"] = zero_slices;
  j["macs"] = macs_json(macs);
  j["slice_flop_fraction"] = slice_flop_fraction();
  j["structured_flop_fraction"] = structured_flop_fraction();
  if (dense_ms >= 0) {
    j["dense_forward_ms"] = dense_ms;
    j["pruned_forward_ms"] = pruned_ms;
    j["speedup"] = pruned_ms > 0 ? dense_ms / pruned_ms : 0.0;
    j["threads"] = threads;
  }
  ordered_json layers_json = ordered_json::array();
  for (const LayerSparsity& l : layers) {
    ordered_json e;
    e["layer"] = l.layer;
    e["kind"] = std::string(to_string(l.kind));
    e["in_channels"] = l.in_channels;
    e["out_channels"] = l.out_channels;
    e["kept_in"] = l.kept_in;
    e["kept_out"] = l.kept_out;
    e["slices"] = l.slices;
    e["zero_slices"] = l.zero_slices;
    e["slice_sparsity"] = l.slice_sparsity();
    e["unstructured_sparsity"] = l.unstructured_sparsity();
    e["macs"] = macs_json(l.macs);
    layers_json.push_back(std::move(e));
  }
  j["layers"] = std::move(layers_json);
  return j.dump(2);
}

SparsityReport analyze(const LatentModel<float>& model) {
  const auto masks = model_masks(model);
  const FlopCounts flops = count_flops(model.arch, model.params, masks);
  SparsityReport r;
  for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
    const LayerSpec& s = model.arch.layers[i];
    if (!s.has_weight()) continue;
    LayerSparsity l;
    l.layer = static_cast<int>(i);
    l.kind = s.kind;
    l.slices = masks[i].size();
    l.zero_slices = masks[i].zero_count();
    if (model.compressed(i)) {
      const IntMatrix w = model.latents[i].rounded();
      l.latent_elements = w.size();
      l.zero_elements = (w.array() == 0).count();
    } else {
      const auto& w = model.params.layers[i].weight;
      l.latent_elements = w.size();
      l.zero_elements = (w.array() == 0.0f).count();
    }
    l.in_channels = s.in_channels;
    l.out_channels = s.out_channels;
    l.kept_out = static_cast<Index>(flops.plan.kept[i].size());
    l.kept_in = static_cast<Index>(flops.plan.of(s.inputs[0]).size());
    l.macs = flops.layers[i];
    r.slices += l.slices;
    r.zero_slices += l.zero_slices;
    r.latent_elements += l.latent_elements;
    r.zero_elements += l.zero_elements;
    r.layers.push_back(l);
  }
  r.macs = flops.total;
  return r;
}

SpeedupResult bench_speedup(const Architecture& dense_arch, const NetworkParams<float>& dense,
                            const Architecture& pruned_arch, const NetworkParams<float>& pruned,
                            const Tensor4<float>& images, Index batch, int warmup, int repeats) {
  if (batch < 1 || repeats < 1) throw Error("bench_speedup: batch and repeats must be positive");
  const Network<float> dnet(dense_arch), pnet(pruned_arch);
  std::vector<Tensor4<float>> batches;
  for (Index start = 0; start < images.shape.n; start += batch) {
    batches.push_back(slice_batch(images, start, std::min(batch, images.shape.n - start)));
  }
  auto pass = [&](const Network<float>& net, const NetworkParams<float>& params) {
    float sink = 0;
    for (const auto& b : batches) sink += net.forward(params, b, Mode::eval, nullptr)(0, 0);
    return sink;
  };
  auto median_ms = [&](const Network<float>& net, const NetworkParams<float>& params) {
    volatile float keep = 0;
    for (int i = 0; i < warmup; ++i) keep = keep + pass(net, params);
    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      keep = keep + pass(net, params);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
  };
  SpeedupResult r;
  r.dense_ms = median_ms(dnet, dense);
  r.pruned_ms = median_ms(pnet, pruned);
  r.ratio = r.pruned_ms > 0 ? r.dense_ms / r.pruned_ms : 0.0;
  r.threads = Eigen::nbThreads();
  return r;
}

}  // namespace lnx
