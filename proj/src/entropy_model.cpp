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

#include "lnx/entropy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace lnx {
namespace {

constexpr double kLn2 = 0.69314718055994530942;

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

struct FactorizedDensity::Trace {
  static constexpr int kMaxLayers = 8;
  // Layer input and pre-gate value per layer.
  std::array<std::array<double, kMaxWidth>, kMaxLayers> input;
  std::array<std::array<double, kMaxWidth>, kMaxLayers> pre;
};

FactorizedDensity::FactorizedDensity(Index channels, DensityConfig config, std::uint64_t seed)
    : channels_(channels), config_(std::move(config)) {
  if (channels_ < 1) throw Error("density needs at least one channel");
  std::vector<int> widths = {1};
  for (int w : config_.hidden) {
    if (w < 1 || w > kMaxWidth) throw Error("density hidden width must be in [1, 16]");
    widths.push_back(w);
  }
  widths.push_back(1);
  if (widths.size() - 1 > static_cast<std::size_t>(Trace::kMaxLayers)) {
    throw Error("density has too many layers");
  }
  Index offset = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    Layer layer;
    layer.in = widths[k];
    layer.out = widths[k + 1];
    layer.h_offset = offset;
    offset += layer.in * layer.out;
    layer.b_offset = offset;
    offset += layer.out;
    if (k + 2 < widths.size()) {
      layer.a_offset = offset;
      offset += layer.out;
    }
    layers_.push_back(layer);
  }
  per_channel_ = offset;
  theta_ = VectorXd::Zero(channels_ * per_channel_);

  // Spread the initial density over roughly init_scale: every layer scales by
  // init_scale^(1/L) and divides by its fan-out.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bias_init(-0.5, 0.5);
  const double scale = std::pow(config_.init_scale, 1.0 / static_cast<double>(layers_.size()));
  for (Index c = 0; c < channels_; ++c) {
    double* p = theta_.data() + c * per_channel_;
    for (const Layer& layer : layers_) {
      const double h = std::log(std::expm1(1.0 / scale / layer.out));
      std::fill(p + layer.h_offset, p + layer.h_offset + layer.in * layer.out, h);
      for (int o = 0; o < layer.out; ++o) p[layer.b_offset + o] = bias_init(rng);
    }
  }
}

FactorizedDensity::Transformed FactorizedDensity::transformed() const {
  Transformed t{VectorXd(theta_.size()), VectorXd::Ones(theta_.size())};
  for (Index c = 0; c < channels_; ++c) {
    const Index base = c * per_channel_;
    for (const Layer& layer : layers_) {
      for (Index k = 0; k < layer.in * layer.out; ++k) {
        const double raw = theta_[base + layer.h_offset + k];
        t.value[base + layer.h_offset + k] = softplus(raw);
        t.slope[base + layer.h_offset + k] = sigmoid(raw);
      }
      for (int o = 0; o < layer.out; ++o) t.value[base + layer.b_offset + o] = theta_[base + layer.b_offset + o];
      if (layer.a_offset >= 0) {
        for (int o = 0; o < layer.out; ++o) {
          const double g = std::tanh(theta_[base + layer.a_offset + o]);
          t.value[base + layer.a_offset + o] = g;
          t.slope[base + layer.a_offset + o] = 1 - g * g;
        }
      }
    }
  }
  return t;
}

double FactorizedDensity::logit_forward(const Transformed& t, Index channel, double x,
                                        Trace* trace) const {
  const double* p = t.value.data() + channel * per_channel_;
  std::array<double, kMaxWidth> h{};
  std::array<double, kMaxWidth> next{};
  h[0] = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& layer = layers_[k];
    if (trace) std::copy(h.begin(), h.begin() + layer.in, trace->input[k].begin());
    for (int o = 0; o < layer.out; ++o) {
      double acc = p[layer.b_offset + o];
      for (int i = 0; i < layer.in; ++i) acc += p[layer.h_offset + o * layer.in + i] * h[i];
      if (trace) trace->pre[k][o] = acc;
      if (layer.a_offset >= 0) acc += p[layer.a_offset + o] * std::tanh(acc);
      next[o] = acc;
    }
    std::copy(next.begin(), next.begin() + layer.out, h.begin());
  }
  return h[0];
}

void FactorizedDensity::logit_backward(const Transformed& t, Index channel, const Trace& trace,
                                       double upstream, double* grad_x,
                                       double* grad_params) const {
  const double* p = t.value.data() + channel * per_channel_;
  const double* dp = t.slope.data() + channel * per_channel_;
  double* gp = grad_params ? grad_params + channel * per_channel_ : nullptr;
  std::array<double, kMaxWidth> delta{};
  std::array<double, kMaxWidth> prev{};
  delta[0] = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& layer = layers_[k];
    if (layer.a_offset >= 0) {
      for (int o = 0; o < layer.out; ++o) {
        const double gate = p[layer.a_offset + o];
        const double th = std::tanh(trace.pre[k][o]);
        if (gp) gp[layer.a_offset + o] += delta[o] * th * dp[layer.a_offset + o];
        delta[o] *= 1 + gate * (1 - th * th);
      }
    }
    std::fill(prev.begin(), prev.begin() + layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      if (gp) gp[layer.b_offset + o] += delta[o];
      for (int i = 0; i < layer.in; ++i) {
        const Index at = layer.h_offset + o * layer.in + i;
        if (gp) gp[at] += delta[o] * trace.input[k][i] * dp[at];
        prev[i] += p[at] * delta[o];
      }
    }
    std::copy(prev.begin(), prev.begin() + layer.in, delta.begin());
  }
  if (grad_x) *grad_x = delta[0];
}

double FactorizedDensity::cdf_logit(Index channel, double x) const {
  return logit_forward(transformed(), channel, x, nullptr);
}

double FactorizedDensity::cdf(Index channel, double x) const {
  return sigmoid(cdf_logit(channel, x));
}

double FactorizedDensity::raw_bin_probability(Index channel, double w) const {
  const Transformed t = transformed();
  const double upper = logit_forward(t, channel, w + 0.5, nullptr);
  const double lower = logit_forward(t, channel, w - 0.5, nullptr);
  // Evaluate on the side of the sigmoid where it is not saturated.
  const double s = (upper + lower > 0) ? -1.0 : 1.0;
  return std::abs(sigmoid(s * upper) - sigmoid(s * lower));
}

double FactorizedDensity::bin_probability(Index channel, double w) const {
  return std::max(raw_bin_probability(channel, w), config_.likelihood_floor);
}

double FactorizedDensity::self_information(Index channel, double w, double* grad_w,
                                           double* grad_params) const {
  return self_information(transformed(), channel, w, grad_w, grad_params);
}

double FactorizedDensity::self_information(const Transformed& t, Index channel, double w,
                                           double* grad_w, double* grad_params) const {
  Trace upper_trace, lower_trace;
  const bool want_grad = grad_w || grad_params;
  const double upper = logit_forward(t, channel, w + 0.5, want_grad ? &upper_trace : nullptr);
  const double lower = logit_forward(t, channel, w - 0.5, want_grad ? &lower_trace : nullptr);
  const double s = (upper + lower > 0) ? -1.0 : 1.0;
  const double su = sigmoid(s * upper), sl = sigmoid(s * lower);
  const double q = std::max(std::abs(su - sl), config_.likelihood_floor);
  const double bits = -std::log2(q);
  if (!want_grad) return bits;
  // dq/dupper = sigmoid'(upper), dq/dlower = -sigmoid'(lower); sigmoid' is even.
  const double dbits_dq = -1.0 / (kLn2 * q);
  double gx_upper = 0, gx_lower = 0;
  logit_backward(t, channel, upper_trace, dbits_dq * su * (1 - su), &gx_upper, grad_params);
  logit_backward(t, channel, lower_trace, -dbits_dq * sl * (1 - sl), &gx_lower, grad_params);
  if (grad_w) *grad_w = gx_upper + gx_lower;
  return bits;
}

RateResult rate_loss(const FactorizedDensity& density, const Eigen::Ref<const MatrixXd>& values,
                     const std::string& group) {
  if (values.cols() != density.channels()) {
    throw ShapeError("rate_loss(" + group + "): values have " + std::to_string(values.cols()) +
                     " columns, density has " + std::to_string(density.channels()));
  }
  RateResult r;
  r.grad_values.resize(values.rows(), values.cols());
  r.grad_params = VectorXd::Zero(density.parameters().size());
  const auto t = density.transformed();
  double total = 0;
  for (Index j = 0; j < values.rows(); ++j) {
    for (Index i = 0; i < values.cols(); ++i) {
      double gw = 0;
      total += density.self_information(t, i, values(j, i), &gw, r.grad_params.data());
      r.grad_values(j, i) = gw;
    }
  }
  if (!std::isfinite(total) || !r.grad_values.allFinite() || !r.grad_params.allFinite()) {
    throw NumericError("rate_loss: non-finite rate in group '" + group + "'");
  }
  r.bits = total;
  return r;
}

RateResult noisy_rate_loss(const FactorizedDensity& density,
                           const Eigen::Ref<const MatrixXd>& surrogate, const MatrixXd& noise,
                           const std::string& group) {
  if (noise.rows() != surrogate.rows() || noise.cols() != surrogate.cols()) {
    throw ShapeError("noisy_rate_loss(" + group + "): noise shape mismatch");
  }
  return rate_loss(density, surrogate + noise, group);
}

double rate_bits(const FactorizedDensity& density, const IntMatrix& latent) {
  if (latent.cols() != density.channels()) throw ShapeError("rate_bits: channel mismatch");
  const auto t = density.transformed();
  double total = 0;
  for (Index j = 0; j < latent.rows(); ++j) {
    for (Index i = 0; i < latent.cols(); ++i) {
      total += density.self_information(t, i, latent(j, i), nullptr, nullptr);
    }
  }
  return total;
}

void apply_density_gradient(FactorizedDensity& density, Adam<double>& optimizer,
                            const VectorXd& grad_params, const std::string& name) {
  optimizer.step(name, density.parameters(), grad_params);
}

double fit_step(FactorizedDensity& density, const Eigen::Ref<const MatrixXd>& values,
                Adam<double>& optimizer) {
  const RateResult r = rate_loss(density, values);
  apply_density_gradient(density, optimizer, r.grad_params);
  return r.bits;
}

std::vector<std::uint32_t> quantize_frequencies(std::span<const double> probabilities,
                                                std::uint32_t total) {
  const std::size_t n = probabilities.size();
  if (n == 0) throw Error("quantize_frequencies: empty support");
  if (n > total / 2) throw Error("quantize_frequencies: support too large for the total");
  std::vector<std::uint32_t> freq(n);
  std::int64_t sum = 0;
  std::size_t best = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = probabilities[k];
    if (!(p >= 0) || !std::isfinite(p)) throw NumericError("quantize_frequencies: bad probability");
    const double scaled = std::round(p * static_cast<double>(total));
    freq[k] = static_cast<std::uint32_t>(std::max(1.0, std::min(scaled, static_cast<double>(total))));
    sum += freq[k];
    if (p > probabilities[best]) best = k;
  }
  std::int64_t residual = static_cast<std::int64_t>(total) - sum;
  if (residual >= 0 || static_cast<std::int64_t>(freq[best]) + residual >= 1) {
    freq[best] = static_cast<std::uint32_t>(static_cast<std::int64_t>(freq[best]) + residual);
    return freq;
  }
  // The most probable entry cannot absorb the deficit alone; take from the
  // largest entries in turn.
  while (residual < 0) {
    const auto it = std::max_element(freq.begin(), freq.end());
    if (*it <= 1) throw Error("quantize_frequencies: cannot normalize");
    --*it;
    ++residual;
  }
  return freq;
}

std::vector<SymbolRange> observed_symbol_range(std::span<const IntMatrix* const> latents,
                                               Index channels) {
  std::vector<SymbolRange> ranges(static_cast<std::size_t>(channels));
  std::vector<bool> seen(static_cast<std::size_t>(channels), false);
  for (const IntMatrix* m : latents) {
    if (m->cols() != channels) throw ShapeError("observed_symbol_range: channel mismatch");
    for (Index j = 0; j < m->rows(); ++j) {
      for (Index i = 0; i < channels; ++i) {
        auto& r = ranges[static_cast<std::size_t>(i)];
        const std::int32_t v = (*m)(j, i);
        if (!seen[static_cast<std::size_t>(i)]) {
          r = {v, v};
          seen[static_cast<std::size_t>(i)] = true;
        } else {
          r.min = std::min(r.min, v);
          r.max = std::max(r.max, v);
        }
      }
    }
  }
  for (auto& r : ranges) {
    r.min -= 1;
    r.max += 1;
  }
  return ranges;
}

PmfTable build_pmf_table(const FactorizedDensity& density, std::span<const SymbolRange> support) {
  if (static_cast<Index>(support.size()) != density.channels()) {
    throw ShapeError("build_pmf_table: need one support range per density channel");
  }
  PmfTable table;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const SymbolRange r = support[i];
    if (r.max < r.min) throw Error("build_pmf_table: empty support for channel " + std::to_string(i));
    std::vector<double> probs;
    double mass = 0;
    for (std::int64_t s = r.min; s <= r.max; ++s) {
      const double q = density.bin_probability(static_cast<Index>(i), static_cast<double>(s));
      probs.push_back(q);
      mass += q;
    }
    probs.push_back(std::max(0.0, 1.0 - mass));
    const auto freq = quantize_frequencies(probs);
    PmfChannel ch;
    ch.min_symbol = r.min;
    ch.frequencies.assign(freq.begin(), freq.end());
    table.channels.push_back(std::move(ch));
  }
  return table;
}

void validate_pmf_table(const PmfTable& table) {
  for (std::size_t i = 0; i < table.channels.size(); ++i) {
    const auto& f = table.channels[i].frequencies;
    if (f.size() < 2) throw FormatError("pmf table channel " + std::to_string(i) + " has no symbols");
    std::uint64_t sum = 0;
    for (auto v : f) {
      if (v == 0) throw FormatError("pmf table channel " + std::to_string(i) + " has a zero frequency");
      sum += v;
    }
    if (sum != PmfTable::kTotal) {
      throw FormatError("pmf table channel " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

double table_bits(const PmfTable& table, const IntMatrix& latent) {
  if (latent.cols() != static_cast<Index>(table.channels.size())) {
    throw ShapeError("table_bits: channel mismatch");
  }
  double bits = 0;
  for (Index j = 0; j < latent.rows(); ++j) {
    for (Index i = 0; i < latent.cols(); ++i) {
      const PmfChannel& ch = table.channels[static_cast<std::size_t>(i)];
      const std::int64_t s = latent(j, i);
      std::size_t index = ch.tail_index();
      double extra = 32;
      if (s >= ch.min_symbol && s <= ch.max_symbol()) {
        index = static_cast<std::size_t>(s - ch.min_symbol);
        extra = 0;
      }
      bits += -std::log2(static_cast<double>(ch.frequencies[index]) / PmfTable::kTotal) + extra;
    }
  }
  return bits;
}

}  // namespace lnx
