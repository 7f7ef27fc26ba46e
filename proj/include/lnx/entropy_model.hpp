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

// Fully factorized learned density over latent values.
//
// Each of the l latent dimensions of a parameter group owns a univariate
// cumulative distribution c(x) = sigmoid(g(x)), where g is a chain of small
// elementwise-monotone layers
//
//     u_k = softplus(H_k) h_{k-1} + b_k
//     h_k = u_k + tanh(a_k) * tanh(u_k)      (all but the last layer)
//
// softplus keeps the mixing weights positive and tanh(a) > -1 keeps every
// gate increasing, so c is nondecreasing with limits 0 and 1 by construction.
// The probability of integer bin w is c(w + 1/2) - c(w - 1/2), floored at a
// small likelihood so its self-information stays finite.

#ifndef LNX_ENTROPY_MODEL_HPP_
#define LNX_ENTROPY_MODEL_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lnx/nn/optim.hpp"
#include "lnx/types.hpp"

namespace lnx {

struct DensityConfig {
  /// Hidden widths of the per-dimension CDF network; three hidden layers give
  /// four monotone layers.
  std::vector<int> hidden = {3, 3, 3};
  /// Rough spread of the values the density starts out covering.
  double init_scale = 4.0;
  /// Lower bound on bin probabilities (2^-20).
  double likelihood_floor = 1.0 / 1048576.0;
};

class FactorizedDensity {
 public:
  static constexpr int kMaxWidth = 16;

  FactorizedDensity() = default;
  FactorizedDensity(Index channels, DensityConfig config, std::uint64_t seed);

  Index channels() const { return channels_; }
  const DensityConfig& config() const { return config_; }
  Index params_per_channel() const { return per_channel_; }

  VectorXd& parameters() { return theta_; }
  const VectorXd& parameters() const { return theta_; }

  double cdf_logit(Index channel, double x) const;
  double cdf(Index channel, double x) const;
  /// Floored bin probability q(w) = c(w + 1/2) - c(w - 1/2).
  double bin_probability(Index channel, double w) const;
  /// Unfloored bin probability; may be 0 in the far tails.
  double raw_bin_probability(Index channel, double w) const;

  /// Parameters after their constraining transforms, laid out like the raw
  /// vector: softplus(H), b, tanh(a) in `value`; sigmoid(H), 1, 1 - tanh(a)^2
  /// in `slope`. Valid until the parameters change.
  struct Transformed {
    VectorXd value, slope;
  };
  Transformed transformed() const;

  /// -log2 q(w) and its derivatives with respect to w and (accumulated into
  /// `grad_params`, may be null) this density's parameters. The floor acts as
  /// a straight-through bound: derivatives are those of the unfloored q,
  /// scaled by 1/max(q, floor).
  double self_information(Index channel, double w, double* grad_w, double* grad_params) const;
  double self_information(const Transformed& t, Index channel, double w, double* grad_w,
                          double* grad_params) const;

 private:
  struct Layer {
    int in = 1, out = 1;
    Index h_offset = 0, b_offset = 0, a_offset = -1;  // a_offset < 0: no gate
  };
  struct Trace;

  double logit_forward(const Transformed& t, Index channel, double x, Trace* trace) const;
  void logit_backward(const Transformed& t, Index channel, const Trace& trace, double upstream,
                      double* grad_x, double* grad_params) const;

  Index channels_ = 0;
  DensityConfig config_;
  std::vector<Layer> layers_;
  Index per_channel_ = 0;
  VectorXd theta_;
};

struct RateResult {
  double bits = 0;
  MatrixXd grad_values;  // d(bits)/d(values), (rows, l)
  VectorXd grad_params;  // d(bits)/d(density parameters)
};

/// Uniform noise on (-1/2, 1/2) of the given shape.
template <typename Rng>
MatrixXd sample_uniform_noise(Index rows, Index cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  MatrixXd n(rows, cols);
  for (Index i = 0; i < n.size(); ++i) n.data()[i] = u(rng);
  return n;
}

/// Sum over elements of -log2 q_i(values(j, i)) with gradients. Column i uses
/// density dimension i. `group` names the tensor in errors.
RateResult rate_loss(const FactorizedDensity& density, const Eigen::Ref<const MatrixXd>& values,
                     const std::string& group = "");

/// Training-mode rate: values = surrogate + noise.
RateResult noisy_rate_loss(const FactorizedDensity& density,
                           const Eigen::Ref<const MatrixXd>& surrogate, const MatrixXd& noise,
                           const std::string& group = "");

/// Evaluation-mode rate of integer latents; no gradients.
double rate_bits(const FactorizedDensity& density, const IntMatrix& latent);

/// One Adam step of the density parameters along `grad_params`.
void apply_density_gradient(FactorizedDensity& density, Adam<double>& optimizer,
                            const VectorXd& grad_params, const std::string& name = "density");

/// rate_loss on `values` followed by a density update. Returns bits before
/// the update.
double fit_step(FactorizedDensity& density, const Eigen::Ref<const MatrixXd>& values,
                Adam<double>& optimizer);

/// Integer coding table of one latent dimension. Symbols min_symbol ..
/// min_symbol + frequencies.size() - 2 are coded directly; the final entry
/// is the escape (tail) symbol.
struct PmfChannel {
  std::int32_t min_symbol = 0;
  std::vector<std::uint16_t> frequencies;

  std::int32_t max_symbol() const {
    return min_symbol + static_cast<std::int32_t>(frequencies.size()) - 2;
  }
  std::size_t tail_index() const { return frequencies.size() - 1; }
  bool operator==(const PmfChannel&) const = default;
};

struct PmfTable {
  static constexpr std::uint32_t kPrecision = 16;
  static constexpr std::uint32_t kTotal = 1u << kPrecision;
  std::vector<PmfChannel> channels;
  bool operator==(const PmfTable&) const = default;
};

/// Rounds probabilities to integer frequencies summing to `total`: each
/// round(p * total) floored at 1, with the residual given to the most
/// probable entry.
std::vector<std::uint32_t> quantize_frequencies(std::span<const double> probabilities,
                                                std::uint32_t total = PmfTable::kTotal);

struct SymbolRange {
  std::int32_t min = 0, max = 0;
};

/// Per-column [min - 1, max + 1] over every latent matrix given.
std::vector<SymbolRange> observed_symbol_range(std::span<const IntMatrix* const> latents,
                                               Index channels);

/// Frozen coding table from the density's bin probabilities over each
/// channel's support; the tail symbol carries the leftover mass.
PmfTable build_pmf_table(const FactorizedDensity& density, std::span<const SymbolRange> support);

/// Ideal code length in bits of `latent` under `table`, escapes included.
double table_bits(const PmfTable& table, const IntMatrix& latent);

/// Checks the table invariants (every frequency >= 1, sums equal the total).
void validate_pmf_table(const PmfTable& table);

}  // namespace lnx

#endif  // LNX_ENTROPY_MODEL_HPP_
