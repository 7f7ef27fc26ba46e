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
#include <numbers>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lnx/nn/conv.hpp"
#include "lnx/nn/loss.hpp"
#include "lnx/nn/network.hpp"
#include "lnx/nn/optim.hpp"

using namespace lnx;

namespace {

// Direct 7-loop convolution.
Tensor4<double> naive_conv(const Tensor4<double>& x, const MatrixXd& w, const ConvGeometry& g, Index c_out) {
  const Index oh = g.out_height(), ow = g.out_width();
  Tensor4<double> y(Shape4{x.shape.n, c_out, oh, ow});
  for (Index n = 0; n < x.shape.n; ++n)
    for (Index o = 0; o < c_out; ++o)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          double acc = 0;
          for (Index c = 0; c < g.in_channels; ++c)
            for (Index ky = 0; ky < g.kernel; ++ky)
              for (Index kx = 0; kx < g.kernel; ++kx) {
                const Index iy = oy * g.stride - g.padding + ky, ix = ox * g.stride - g.padding + kx;
                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                acc += w(o, (c * g.kernel + ky) * g.kernel + kx) * x(n, c, iy, ix);
              }
          y(n, o, oy, ox) = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("conv forward matches a direct loop") {
  std::mt19937_64 rng(3);
  for (auto [k, stride, pad] : {std::tuple<Index, Index, Index>{3, 1, 1}, {3, 2, 1}, {1, 1, 0}, {3, 2, 0}}) {
    Architecture a{"conv", {3, 7, 6}, 2, {}};
    a.layers = {LayerSpec::conv2d(kNetworkInput, 3, 4, k, stride, pad), LayerSpec::avgpool(0, 4),
                LayerSpec::dense(1, 4, 2)};
    Network<double> net(a);
    auto p = make_params<double>(a);
    testing::fill_normal(p.layers[0].weight.data(), p.layers[0].weight.size(), rng);
    testing::fill_normal(p.layers[2].weight.data(), p.layers[2].weight.size(), rng);
    Tensor4<double> x(Shape4{2, 3, 7, 6});
    testing::fill_normal(x.data.data(), x.data.size(), rng);
    ForwardCache<double> cache;
    net.forward(p, x, Mode::eval, &cache);
    const Tensor4<double> expect = naive_conv(x, p.layers[0].weight, net.conv_geometry(0), 4);
    CHECK(cache.outputs[0].shape == expect.shape);
    CHECK((cache.outputs[0].data - expect.data).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("col2im is the adjoint of im2col") {
  std::mt19937_64 rng(5);
  const ConvGeometry g{2, 5, 4, 3, 2, 1};
  MatrixXd image(2, 20), cols, back = MatrixXd::Zero(2, 20);
  testing::fill_normal(image.data(), image.size(), rng);
  im2col<double>(image, g, cols);
  MatrixXd probe(cols.rows(), cols.cols());
  testing::fill_normal(probe.data(), probe.size(), rng);
  col2im<double>(probe, g, back);
  // <im2col(x), y> == <x, col2im(y)>
  CHECK(std::abs((cols.array() * probe.array()).sum() - (image.array() * back.array()).sum()) < 1e-10);
}

TEST_CASE("backward matches finite differences on random residual networks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(testing::xent_gradient_error(seed) < 1e-3);
  }
}

TEST_CASE("input gradient matches finite differences") {
  testing::XentInstance s = testing::make_xent_instance(11);
  ForwardCache<double> cache;
  const MatrixXd logits = s.net.forward(s.params, s.batch, Mode::train, &cache);
  Tensor4<double> dx;
  s.net.backward(s.params, xent_loss(logits, s.labels).grad, cache, &dx);
  auto loss = [&] { return xent_loss(s.net.forward(s.params, s.batch, Mode::train), s.labels).loss; };
  CHECK(testing::check_vector(loss, s.batch.data.data(), s.batch.data.size(), dx.data.data()) < 1e-3);
}

TEST_CASE("eval-mode batchnorm gradients use running statistics") {
  testing::XentInstance s = testing::make_xent_instance(4);
  auto& bn = s.params.layers[1];
  bn.running_mean = VectorXd::LinSpaced(4, -0.5, 0.5);
  bn.running_var = VectorXd::LinSpaced(4, 0.5, 2.0);
  s.params.touch();
  ForwardCache<double> cache;
  const MatrixXd logits = s.net.forward(s.params, s.batch, Mode::eval, &cache);
  const auto grads = s.net.backward(s.params, xent_loss(logits, s.labels).grad, cache);
  auto loss = [&] { return xent_loss(s.net.forward(s.params, s.batch, Mode::eval), s.labels).loss; };
  auto& w = s.params.layers[0].weight;
  CHECK(testing::check_vector(loss, w.data(), w.size(), grads.layers[0].weight.data()) < 1e-3);
  CHECK(testing::check_vector(loss, bn.gamma.data(), 4, grads.layers[1].gamma.data()) < 1e-3);
}

TEST_CASE("running statistics follow the momentum update") {
  testing::XentInstance s = testing::make_xent_instance(8);
  ForwardCache<double> cache;
  s.net.forward(s.params, s.batch, Mode::train, &cache);
  const Index m = cache.normalized[1].shape.n * cache.normalized[1].shape.plane();
  s.net.update_running_stats(s.params, cache, 0.1);
  const auto& bn = s.params.layers[1];
  for (Index c = 0; c < 4; ++c) {
    CHECK(bn.running_mean[c] == doctest::Approx(0.1 * cache.batch_mean[1][c]));
    const double unbiased = cache.batch_var[1][c] * static_cast<double>(m) / static_cast<double>(m - 1);
    CHECK(bn.running_var[c] == doctest::Approx(0.9 + 0.1 * unbiased));
  }
}

TEST_CASE("backward rejects a stale cache") {
  testing::XentInstance s = testing::make_xent_instance(1);
  ForwardCache<double> cache;
  const MatrixXd logits = s.net.forward(s.params, s.batch, Mode::train, &cache);
  s.params.touch();
  CHECK_THROWS_AS(s.net.backward(s.params, xent_loss(logits, s.labels).grad, cache), Error);
}

TEST_CASE("shape errors name the layer") {
  Architecture a{"bad", {1, 4, 4}, 2, {}};
  a.layers = {LayerSpec::conv2d(kNetworkInput, 1, 3, 3, 1, 1), LayerSpec::batchnorm(0, 4)};
  try {
    a.validate();
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  const Architecture good = testing::gradcheck_architecture();
  Network<double> net(good);
  auto p = make_params<double>(good);
  CHECK_THROWS_AS(net.forward(p, Tensor4<double>(Shape4{1, 2, 4, 5}), Mode::eval), ShapeError);
  p.layers[3].weight.resize(8, 35);
  CHECK_THROWS_AS(net.forward(p, Tensor4<double>(Shape4{1, 2, 5, 5}), Mode::eval), ShapeError);
}

TEST_CASE("architecture descriptor round-trips") {
  for (const Architecture& a : {testing::gradcheck_architecture(),
                                make_architecture("miniconv", {1, 28, 28}, 10),
                                make_architecture("resnet20", {3, 32, 32}, 10, {8}),
                                make_architecture("mlp", {1, 28, 28}, 10)}) {
    CHECK(Architecture::from_json(a.to_json()) == a);
  }
  CHECK_THROWS_AS(Architecture::from_json("{\"name\": 3}"), FormatError);
}

TEST_CASE("cross-entropy values") {
  MatrixXd logits = MatrixXd::Zero(2, 3);
  logits(1, 2) = 1000;  // must not overflow
  const std::vector<std::int32_t> labels = {0, 2};
  const auto r = xent_loss(logits, labels);
  CHECK(r.loss == doctest::Approx(std::log(3.0) / 2));
  CHECK(r.grad(0, 0) == doctest::Approx((1.0 / 3 - 1) / 2));
  CHECK(r.grad.row(1).cwiseAbs().maxCoeff() < 1e-12);
  const std::vector<std::int32_t> bad = {0, 3};
  CHECK_THROWS_AS(xent_loss(logits, bad), Error);
}

TEST_CASE("adam matches a hand-computed step") {
  AdamState<double> st;
  AdamHyper h;
  h.learning_rate = 0.1;
  VectorXd p(2);
  p << 1.0, -2.0;
  VectorXd g(2);
  g << 0.5, -4.0;
  adam_step(st, h, p, g, "p");
  // First step: m_hat = g, v_hat = g^2, so the update is lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-7));
  adam_step(st, h, p, g, "p");
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-6));
  VectorXd nan(2);
  nan << 1.0, std::nan("");
  CHECK_THROWS_AS(adam_step(st, h, p, nan, "p"), NumericError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 0.01) == doctest::Approx(0.01));
  CHECK(cosine_lr(50, 100, 0.01) == doctest::Approx(0.005));
  CHECK(cosine_lr(100, 100, 0.01) == 0.0);
  CHECK(cosine_lr(25, 100, 1.0) == doctest::Approx(0.5 * (1 + std::cos(std::numbers::pi / 4))));
}
