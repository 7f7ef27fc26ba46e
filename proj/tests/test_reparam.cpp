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

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "gradcheck.hpp"
#include "lnx/model.hpp"
#include "lnx/reparam.hpp"

using namespace lnx;

namespace {

// Var(round(U[-b, b])) by direct integration on a fine grid.
double integrated_rounded_variance(double b) {
  const int steps = 2'000'000;
  double acc = 0;
  for (int i = 0; i < steps; ++i) {
    const double u = -b + (i + 0.5) * (2 * b / steps);
    const double r = round_half_away(u);
    acc += r * r;
  }
  return acc / steps;
}

}  // namespace

TEST_CASE("rounding sends halves away from zero") {
  CHECK(round_half_away(0.5) == 1);
  CHECK(round_half_away(-0.5) == -1);
  CHECK(round_half_away(1.5) == 2);
  CHECK(round_half_away(-1.5) == -2);
  CHECK(round_half_away(0.49999) == 0);
  CHECK(round_half_away(-2.2) == -2);
  MatrixXf s(1, 2);
  s << 0.5f, std::nanf("");
  CHECK_THROWS_AS(quantize(s), NumericError);
}

TEST_CASE("decode reshapes slice rows onto (c_out, c_in) kernel blocks") {
  const LayerSpec spec = LayerSpec::conv2d(kNetworkInput, 3, 2, 3, 1, 1);
  LatentTensor<double> t = make_latent<double>(spec);
  REQUIRE(t.rows() == 6);
  REQUIRE(t.slice_length() == 9);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> d(-3, 3);
  for (Index i = 0; i < t.surrogate.size(); ++i) t.surrogate.data()[i] = d(rng);
  t.surrogate.row(4).setConstant(0.3);  // rounds to zero: (c_out 1, c_in 1)
  MatrixXd psi(9, 9);
  testing::fill_normal(psi.data(), psi.size(), rng);
  const MatrixXd w = decode(t, psi);
  REQUIRE(w.rows() == 2);
  REQUIRE(w.cols() == 27);
  const MatrixXd slices = t.rounded().cast<double>() * psi;
  for (Index o = 0; o < 2; ++o)
    for (Index c = 0; c < 3; ++c)
      for (Index k = 0; k < 9; ++k) CHECK(w(o, c * 9 + k) == slices(o * 3 + c, k));
  CHECK((w.block(1, 9, 1, 9).array() == 0).all());
  CHECK_THROWS_AS(decode(t.rounded(), MatrixXd(8, 8).eval(), 2, 27), ShapeError);
}

TEST_CASE("straight-through gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(testing::decode_gradient_error(seed) < 1e-3);
  }
}

TEST_CASE("parameter groups follow (kind, kernel)") {
  const Architecture mini = make_architecture("miniconv", {1, 28, 28}, 10);
  const auto groups = partition_model(mini);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].slice_length == 9);
  CHECK(groups[0].members.size() == 4);
  CHECK(groups[1].slice_length == 1);
  CHECK(groups[1].kind == LayerKind::dense);

  const Architecture mlp = make_architecture("mlp", {1, 28, 28}, 10);
  const auto mlp_groups = partition_model(mlp);
  REQUIRE(mlp_groups.size() == 1);
  CHECK(mlp_groups[0].members.size() == 2);

  Architecture mixed{"mixed", {2, 6, 6}, 3, {}};
  mixed.layers = {LayerSpec::conv2d(kNetworkInput, 2, 4, 3, 1, 1), LayerSpec::conv2d(0, 4, 4, 1, 1, 0),
                  LayerSpec::conv2d(1, 4, 4, 3, 1, 1), LayerSpec::avgpool(2, 4), LayerSpec::dense(3, 4, 3)};
  const auto mg = partition_model(mixed);
  REQUIRE(mg.size() == 3);
  CHECK(mg[0].members == std::vector<int>{0, 2});
  CHECK(mg[1].slice_length == 1);
  CHECK(mg[1].kind == LayerKind::conv2d);

  const auto restricted = partition_model(mini, {0, 3});
  REQUIRE(restricted.size() == 1);
  CHECK(restricted[0].members == std::vector<int>{0, 3});
  CHECK_THROWS_AS(partition_model(mini, {1}), Error);
  CHECK_THROWS_AS(partition_model(mini, {99}), Error);
}

TEST_CASE("variance of a rounded uniform") {
  CHECK(rounded_uniform_variance(0.5) == 0.0);
  CHECK(rounded_uniform_variance(1.0) == doctest::Approx(0.5));
  CHECK(rounded_uniform_variance(2.0) == doctest::Approx(1.5));
  for (double b : {0.7, 1.3, 2.5, 3.9, 7.25}) {
    CAPTURE(b);
    CHECK(rounded_uniform_variance(b) == doctest::Approx(integrated_rounded_variance(b)).epsilon(1e-4));
  }
}

TEST_CASE("closed-form initialization constants") {
  CHECK(closed_form_decoder_variance(9, 64, 0.5) == doctest::Approx(0.013889).epsilon(1e-4));
  CHECK(closed_form_bound(64, 64, 2.0) == doctest::Approx(2.0));
  // Smaller fans get wider bounds.
  CHECK(closed_form_bound(16, 64, 2.0) > 2.0);
  // The closed form assumes Var(round(U[-b, b])) = ((2b+1)^2 - 1)/12, which
  // is exact only for the discrete uniform on {-b..b}; the decoded variance
  // it produces is off by the ratio of the true to the assumed variance.
  const double assumed = (25.0 - 1.0) / 12.0;
  const GroupInit plan = plan_group_init(9, {144.0}, 2.0, InitRule::closed_form);
  const double decoded = 9 * plan.decoder_variance * rounded_uniform_variance(2.0);
  CHECK(decoded * 144.0 / 2.0 == doctest::Approx(rounded_uniform_variance(2.0) / assumed));
}

TEST_CASE("exact-rounding plan hits 2/f for every member") {
  const std::vector<double> fans = {9, 144, 288};
  const GroupInit plan = plan_group_init(9, fans, 2.0);
  CHECK(plan.bounds[2] == 2.0);
  for (std::size_t m = 0; m < fans.size(); ++m) {
    const double decoded = 9 * plan.decoder_variance * rounded_uniform_variance(plan.bounds[m]);
    CHECK(decoded == doctest::Approx(2.0 / fans[m]).epsilon(1e-8));
  }
  CHECK_THROWS_AS(plan_group_init(9, fans, 0.5), Error);
  CHECK_THROWS_AS(plan_group_init(9, {}, 2.0), Error);
}

TEST_CASE("sampled decoded weights have variance near 2/f") {
  const Architecture a = testing::three_conv_stack();
  std::vector<double> sum(a.layers.size()), sq(a.layers.size()), count(a.layers.size());
  // The dense layer's decoder is a single scalar per draw, so it needs many
  // draws for a 10% estimate.
  for (std::uint64_t trial = 0; trial < 2000; ++trial) {
    std::mt19937_64 rng(trial);
    const auto m = make_latent_model<double>(a, ModelInit{}, rng);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (!a.layers[i].has_weight()) continue;
      const auto& w = m.params.layers[i].weight;
      sum[i] += w.sum();
      sq[i] += w.squaredNorm();
      count[i] += static_cast<double>(w.size());
    }
  }
  for (std::size_t i : {0u, 2u, 4u, 6u}) {
    CAPTURE(i);
    const double var = sq[i] / count[i] - std::pow(sum[i] / count[i], 2);
    const double target = 2.0 / static_cast<double>(layer_fan_in(a.layers[i]));
    CHECK(std::abs(var / target - 1) < 0.1);
  }
}

TEST_CASE("zero latent rows decode to zero weights for any decoder") {
  std::mt19937_64 rng(9);
  auto m = make_latent_model<float>(make_architecture("miniconv", {1, 28, 28}, 10), ModelInit{}, rng);
  m.latents[3].surrogate.topRows(5).setZero();
  m.psi[0].array() += 0.25f;
  m.decode_weights();
  const auto& w = m.params.layers[3].weight;
  const Index c_in = m.arch.layers[3].in_channels;
  for (Index r = 0; r < 5; ++r) {
    CHECK((w.block(r / c_in, (r % c_in) * 9, 1, 9).array() == 0.0f).all());
  }
}
