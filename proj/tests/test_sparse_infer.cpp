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

#include <algorithm>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "lnx/model.hpp"
#include "lnx/sparse_infer.hpp"
#include "lnx/train.hpp"

using namespace lnx;

namespace {

using testing::counted_multiplies;
using testing::naive_conv;

// Zeros each latent row of every compressed layer with probability `p`.
template <typename Rng>
void sparsify(LatentModel<float>& m, double p, Rng& rng) {
  std::bernoulli_distribution drop(p);
  for (std::size_t i = 0; i < m.latents.size(); ++i) {
    if (!m.compressed(i)) continue;
    auto& s = m.latents[i].surrogate;
    for (Index r = 0; r < s.rows(); ++r) {
      if (drop(rng)) s.row(r).setZero();
    }
  }
  m.decode_weights();
}

// Batchnorm whose response to a zero input is exactly relu(beta) in {0, 1}.
template <typename Rng>
void sign_batchnorm(LatentModel<float>& m, Rng& rng) {
  std::bernoulli_distribution positive(0.5);
  for (auto& l : m.params.layers) {
    if (!l.gamma.size()) continue;
    for (Index c = 0; c < l.gamma.size(); ++c) {
      l.gamma[c] = 0.5f + static_cast<float>(c % 3);
      l.beta[c] = positive(rng) ? 1.0f : -1.0f;
      l.running_mean[c] = 0.0f;
      l.running_var[c] = 1.0f;
    }
  }
  m.params.touch();
}

LatentModel<float> sparse_miniconv(std::uint64_t seed, double p, std::vector<Index> widths = {4, 8, 8, 16}) {
  std::mt19937_64 rng(seed);
  auto m = make_latent_model<float>(make_architecture("miniconv", {2, 10, 10}, 10, widths), ModelInit{}, rng);
  sign_batchnorm(m, rng);
  sparsify(m, p, rng);
  return m;
}

// Structured pruning of a conv-BN-ReLU chain ending in avgpool + dense,
// written directly from the definition. Batchnorm constants are relu(beta)
// because sign_batchnorm() sets mean 0 and variance 1.
struct ChainOracle {
  std::vector<std::vector<bool>> kept;  // per conv block, per output channel
  std::int64_t structured = 0;
};

ChainOracle chain_oracle(const LatentModel<float>& m) {
  const auto& layers = m.arch.layers;
  std::vector<std::size_t> convs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::conv2d) convs.push_back(i);
  }
  const std::size_t dense = layers.size() - 1;
  auto zero_slice = [&](std::size_t layer, Index o, Index c) {
    const auto& w = m.params.layers[layer].weight;
    const Index l = layers[layer].slice_length();
    return (w.block(o, c * l, 1, l).array() == 0.0f).all();
  };
  const std::size_t blocks = convs.size();
  // Forward: which outputs are the constant zero after BN + ReLU.
  std::vector<std::vector<bool>> dead(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const LayerSpec& s = layers[convs[b]];
    dead[b].assign(static_cast<std::size_t>(s.out_channels), false);
    for (Index o = 0; o < s.out_channels; ++o) {
      bool live = false;
      for (Index c = 0; c < s.in_channels; ++c) {
        const bool input_dead = b > 0 && dead[b - 1][static_cast<std::size_t>(c)];
        live = live || (!input_dead && !zero_slice(convs[b], o, c));
      }
      const float beta = m.params.layers[convs[b] + 1].beta[o];
      dead[b][static_cast<std::size_t>(o)] = !live && beta < 0;
    }
  }
  // Backward: a channel is kept when it is not dead and a kept consumer reads it.
  ChainOracle r;
  r.kept.resize(blocks);
  std::vector<bool> consumer_kept(static_cast<std::size_t>(layers[dense].out_channels), true);
  std::size_t consumer = dense;
  for (std::size_t b = blocks; b-- > 0;) {
    const LayerSpec& s = layers[convs[b]];
    r.kept[b].assign(static_cast<std::size_t>(s.out_channels), false);
    for (Index o = 0; o < s.out_channels; ++o) {
      bool read = false;
      for (Index p = 0; p < layers[consumer].out_channels; ++p) {
        read = read || (consumer_kept[static_cast<std::size_t>(p)] && !zero_slice(consumer, p, o));
      }
      r.kept[b][static_cast<std::size_t>(o)] = read && !dead[b][static_cast<std::size_t>(o)];
    }
    if (std::none_of(r.kept[b].begin(), r.kept[b].end(), [](bool k) { return k; })) r.kept[b][0] = true;
    consumer_kept = r.kept[b];
    consumer = convs[b];
  }
  const auto shapes = m.arch.infer_shapes();
  auto count = [](const std::vector<bool>& v) { return static_cast<std::int64_t>(std::count(v.begin(), v.end(), true)); };
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::int64_t in = b == 0 ? layers[convs[0]].in_channels : count(r.kept[b - 1]);
    r.structured += count(r.kept[b]) * in * 9 * shapes[convs[b]].h * shapes[convs[b]].w;
  }
  r.structured += layers[dense].out_channels * count(r.kept[blocks - 1]);
  return r;
}

template <typename Scalar = float>
Tensor4<Scalar> random_images(Index n, Shape3 shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor4<Scalar> t(Shape4{n, shape.c, shape.h, shape.w});
  std::normal_distribution<Scalar> d(0, 1);
  for (Index i = 0; i < t.data.size(); ++i) t.data[i] = d(rng);
  return t;
}

}  // namespace

TEST_CASE("slice masks") {
  IntMatrix zero = IntMatrix::Zero(4, 9);
  CHECK(slice_mask(zero).sparsity() == 1.0);
  IntMatrix one = zero;
  one(2, 5) = -1;
  const SliceMask m = slice_mask(one);
  CHECK_FALSE(m.zero[2]);
  CHECK(m.zero_count() == 3);
  IntMatrix half(4, 4);
  half << 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2, 3, 4, 5;
  CHECK(slice_mask(half).sparsity() == 0.5);
  CHECK(slice_mask(half).slice_length == 4);
}

TEST_CASE("zero mask rows decode to zero weight slices") {
  LatentModel<float> m = sparse_miniconv(2, 0.5);
  for (std::size_t i = 0; i < m.latents.size(); ++i) {
    if (!m.compressed(i)) continue;
    CHECK(slice_mask(m.latents[i]).zero == weight_mask(m.params.layers[i].weight, m.latents[i].slice_length()).zero);
  }
}

TEST_CASE("block-sparse convolution matches the dense path") {
  std::mt19937_64 rng(21);
  const std::vector<ConvGeometry> geometries = {
      {3, 9, 9, 3, 1, 1}, {8, 16, 16, 3, 2, 1}, {16, 12, 10, 3, 1, 0}, {64, 32, 32, 3, 1, 1}};
  for (const ConvGeometry& g : geometries) {
    const Index c_out = g.in_channels == 64 ? 64 : 12;
    const LayerSpec spec = LayerSpec::conv2d(kNetworkInput, g.in_channels, c_out, g.kernel, g.stride, g.padding);
    LatentTensor<double> latent = make_latent<double>(spec);
    std::uniform_int_distribution<int> v(-3, 3);
    std::bernoulli_distribution drop(0.8);
    for (Index r = 0; r < latent.rows(); ++r) {
      for (Index k = 0; k < latent.slice_length(); ++k) latent.surrogate(r, k) = v(rng);
      if (drop(rng)) latent.surrogate.row(r).setZero();
    }
    MatrixXd psi(9, 9);
    std::normal_distribution<double> n(0.0, 0.2);
    for (Index i = 0; i < psi.size(); ++i) psi.data()[i] = n(rng);
    const Tensor4<double> x = random_images<double>(2, {g.in_channels, g.height, g.width}, 5);

    const MatrixXd w = decode(latent, psi);
    const Tensor4<double> ref = naive_conv(x, w, g);

    const SliceMask mask = slice_mask(latent);
    std::int64_t macs = 0;
    const Tensor4<double> y = block_sparse_conv(x, latent, psi, mask, g, &macs);
    CHECK((y.data - ref.data).cwiseAbs().maxCoeff() < 1e-5);
    // Single precision agrees to float rounding of the accumulated sums.
    const LatentTensor<float> lf{latent.surrogate.cast<float>(), latent.weight_rows, latent.weight_cols};
    const Tensor4<float> xf(x.shape, x.data.cast<float>());
    const Tensor4<float> yf = block_sparse_conv(xf, lf, MatrixXf(psi.cast<float>()), mask, g);
    CHECK((yf.data.cast<double>() - ref.data).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, ref.data.cwiseAbs().maxCoeff()));
    CHECK(macs == x.shape.n * counted_multiplies(spec, mask, g.out_height(), g.out_width()));
  }
}

TEST_CASE("block-sparse convolution edge cases") {
  const ConvGeometry g{2, 5, 5, 3, 1, 1};
  const LayerSpec spec = LayerSpec::conv2d(kNetworkInput, 2, 3, 3, 1, 1);
  LatentTensor<float> latent = make_latent<float>(spec);
  latent.surrogate.setConstant(1.0f);
  const MatrixXf psi = MatrixXf::Identity(9, 9);
  const Tensor4<float> x = random_images(1, {2, 5, 5}, 2);
  const SliceMask none = slice_mask(latent);
  const Tensor4<float> dense = block_sparse_conv(x, latent, psi, none, g);
  MatrixXf cols;
  im2col<float>(x.sample(0), g, cols);
  const MatrixXf expect = decode(latent, psi) * cols;
  CHECK(dense.sample(0) == expect);  // same gemm, bit for bit

  latent.surrogate.setZero();
  const SliceMask all = slice_mask(latent);
  CHECK(block_sparse_conv(x, latent, psi, all, g).data.isZero());
  // The mask was computed before the latent changed.
  CHECK_THROWS_AS(block_sparse_conv(x, latent, psi, none, g), Error);
  SliceMask wrong = all;
  wrong.zero.pop_back();
  CHECK_THROWS_AS(block_sparse_conv(x, latent, psi, wrong, g), ShapeError);
}

TEST_CASE("slice MACs match brute-force counting") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LatentModel<float> m = sparse_miniconv(seed, 0.7);
    const auto masks = model_masks(m);
    const FlopCounts f = count_flops(m.arch, m.params, masks);
    const auto shapes = m.arch.infer_shapes();
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
      const LayerSpec& s = m.arch.layers[i];
      if (s.kind != LayerKind::conv2d) continue;
      CHECK(f.layers[i].slice == counted_multiplies(s, masks[i], shapes[i].h, shapes[i].w));
      const double kept = 1.0 - masks[i].sparsity();
      CHECK(static_cast<double>(f.layers[i].slice) == doctest::Approx(kept * static_cast<double>(f.layers[i].dense)));
      CHECK(f.layers[i].dense == s.out_channels * s.in_channels * 9 * shapes[i].h * shapes[i].w);
    }
  }
}

TEST_CASE("structured MACs match a direct chain pruning") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CAPTURE(seed);
    const LatentModel<float> m = sparse_miniconv(seed, 0.3 + 0.02 * static_cast<double>(seed));
    const FlopCounts f = count_flops(m.arch, m.params, model_masks(m));
    const ChainOracle o = chain_oracle(m);
    CHECK(f.total.structured == o.structured);
    std::size_t b = 0;
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
      if (m.arch.layers[i].kind != LayerKind::conv2d) continue;
      std::vector<Index> expect;
      for (std::size_t c = 0; c < o.kept[b].size(); ++c) {
        if (o.kept[b][c]) expect.push_back(static_cast<Index>(c));
      }
      CHECK(f.plan.kept[i] == expect);
      ++b;
    }
  }
}

TEST_CASE("counts without sparsity are equal; ordering against dense holds") {
  // Masks with no zero slice, whatever the weights.
  const LatentModel<float> full = sparse_miniconv(1, 0.0);
  auto masks = model_masks(full);
  for (auto& mask : masks) std::fill(mask.zero.begin(), mask.zero.end(), 0);
  const FlopCounts f = count_flops(full.arch, full.params, masks);
  CHECK(f.total.dense == f.total.slice);
  CHECK(f.total.dense == f.total.structured);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LatentModel<float> m = sparse_miniconv(seed, 0.05 * static_cast<double>(seed));
    const FlopCounts c = count_flops(m.arch, m.params, model_masks(m));
    CHECK(c.total.slice <= c.total.dense);
    CHECK(c.total.structured <= c.total.dense);
    CHECK(c.total.structured >= 0);
  }
}

TEST_CASE("a removable input channel halves both counts") {
  // C_in = 2, C_out = 2, K = 3: every slice reading input channel 1 is zero.
  Architecture a{"two", {2, 6, 6}, 2, {}};
  a.layers = {LayerSpec::conv2d(kNetworkInput, 2, 2, 3, 1, 1), LayerSpec::batchnorm(0, 2), LayerSpec::relu(1, 2),
              LayerSpec::conv2d(2, 2, 2, 3, 1, 1), LayerSpec::avgpool(3, 2), LayerSpec::dense(4, 2, 2)};
  std::mt19937_64 rng(4);
  auto m = make_latent_model<float>(a, ModelInit{}, rng);
  sign_batchnorm(m, rng);
  m.params.layers[1].beta.setConstant(-1.0f);
  m.latents[0].surrogate.setConstant(1.0f);
  m.latents[0].surrogate.row(1).setZero();  // (o 0, c 1)
  m.latents[0].surrogate.row(3).setZero();  // (o 1, c 1)
  m.latents[3].surrogate.setConstant(1.0f);
  m.latents[3].surrogate.row(1).setZero();  // filter 0 ignores channel 1 of space 2
  m.latents[3].surrogate.row(3).setZero();
  m.decode_weights();
  const FlopCounts f = count_flops(a, m.params, model_masks(m));
  CHECK(f.layers[0].slice * 2 == f.layers[0].dense);
  // The second conv's inputs from channel 1 are read by no filter: half the channels go.
  CHECK(f.layers[3].slice * 2 == f.layers[3].dense);
  CHECK(f.layers[3].structured * 2 == f.layers[3].dense);
}

TEST_CASE("pruned networks compute the same logits") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    const LatentModel<float> m = sparse_miniconv(seed, 0.6);
    const FlopCounts f = count_flops(m.arch, m.params, model_masks(m));
    const PrunedNetwork pruned = prune_network(m.arch, m.params, f.plan);
    const Tensor4<float> x = random_images(4, m.arch.input, seed);
    const MatrixXf a = Network<float>(m.arch).forward(m.params, x, Mode::eval);
    const MatrixXf b = Network<float>(pruned.arch).forward(pruned.params, x, Mode::eval);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4f);
    CHECK(pruned.arch.name == "miniconv-pruned");
  }
  // Residual networks: spaces tied to shortcuts stay whole, the rest prune.
  std::mt19937_64 rng(8);
  auto r = make_latent_model<float>(make_architecture("resnet20", {3, 8, 8}, 10, {4}), ModelInit{}, rng);
  sign_batchnorm(r, rng);
  sparsify(r, 0.5, rng);
  const FlopCounts f = count_flops(r.arch, r.params, model_masks(r));
  const PrunedNetwork pruned = prune_network(r.arch, r.params, f.plan);
  const Tensor4<float> x = random_images(3, r.arch.input, 1);
  const MatrixXf a = Network<float>(r.arch).forward(r.params, x, Mode::eval);
  const MatrixXf b = Network<float>(pruned.arch).forward(pruned.params, x, Mode::eval);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4f);
  CHECK(f.total.structured < f.total.dense);
}

TEST_CASE("sparsity report") {
  const LatentModel<float> m = sparse_miniconv(3, 0.5);
  const SparsityReport r = analyze(m);
  Index slices = 0, zero = 0;
  for (const auto& l : r.layers) {
    slices += l.slices;
    zero += l.zero_slices;
    CHECK(l.slice_sparsity() >= 0);
    CHECK(l.slice_sparsity() <= 1);
    CHECK(l.unstructured_sparsity() >= l.slice_sparsity());
  }
  CHECK(r.slices == slices);
  CHECK(r.zero_slices == zero);
  CHECK(r.slice_flop_fraction() == doctest::Approx(static_cast<double>(r.macs.slice) / static_cast<double>(r.macs.dense)));
  const std::string json = r.to_json();
  CHECK(json.find("MAC (1 MAC = 2 FLOPs)") != std::string::npos);
  CHECK(json.find("\"dense_ms\"") == std::string::npos);  // no timing measured
}

TEST_CASE("speedup measurement") {
  const LatentModel<float> m = sparse_miniconv(4, 0.0, {16, 32, 32, 64});
  const Tensor4<float> x = random_images(256, m.arch.input, 3);
  const SpeedupResult same = bench_speedup(m.arch, m.params, m.arch, m.params, x);
  CHECK(same.dense_ms > 0);
  CHECK(same.threads >= 1);
  // Two timings of one network; loose because the host may be shared.
  CHECK(same.ratio == doctest::Approx(1.0).epsilon(0.25));

  // Keep every other channel of every conv block.
  ChannelPlan plan = count_flops(m.arch, m.params, model_masks(m)).plan;
  for (std::size_t i = 0; i + 1 < m.arch.layers.size(); ++i) {
    auto& k = plan.kept[i];
    std::vector<Index> half;
    for (std::size_t c = 0; c < k.size(); c += 2) half.push_back(k[c]);
    k = half;
  }
  plan.kept.back() = count_flops(m.arch, m.params, model_masks(m)).plan.kept.back();
  const PrunedNetwork pruned = prune_network(m.arch, m.params, plan);
  const SpeedupResult faster = bench_speedup(m.arch, m.params, pruned.arch, pruned.params, x);
  CHECK(faster.ratio > 1.0);
}
