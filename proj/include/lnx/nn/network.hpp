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

#ifndef LNX_NN_NETWORK_HPP_
#define LNX_NN_NETWORK_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lnx/nn/architecture.hpp"
#include "lnx/nn/conv.hpp"
#include "lnx/nn/tensor.hpp"

namespace lnx {

enum class Mode { train, eval };

template <typename Scalar>
struct LayerParams {
  MatrixX<Scalar> weight;  // conv: (C_out, C_in*K*K); dense: (C_out, C_in)
  VectorX<Scalar> bias;    // empty when the layer has no bias
  VectorX<Scalar> gamma, beta, running_mean, running_var;

  template <typename Other>
  LayerParams<Other> cast() const {
    return {weight.template cast<Other>(),       bias.template cast<Other>(),
            gamma.template cast<Other>(),        beta.template cast<Other>(),
            running_mean.template cast<Other>(), running_var.template cast<Other>()};
  }
};

/// All tensors a forward pass reads. `version` must be bumped after every
/// mutation so that stale forward caches are rejected by backward().
template <typename Scalar>
struct NetworkParams {
  std::vector<LayerParams<Scalar>> layers;
  std::uint64_t version = 0;

  void touch() { ++version; }

  template <typename Other>
  NetworkParams<Other> cast() const {
    NetworkParams<Other> out;
    for (const auto& l : layers) out.layers.push_back(l.template cast<Other>());
    return out;
  }
};

/// Zero weights and biases, unit BN scale and running variance.
template <typename Scalar>
NetworkParams<Scalar> make_params(const Architecture& arch) {
  NetworkParams<Scalar> p;
  for (const LayerSpec& s : arch.layers) {
    LayerParams<Scalar> l;
    if (s.kind == LayerKind::conv2d) {
      l.weight = MatrixX<Scalar>::Zero(s.out_channels, s.in_channels * s.kernel * s.kernel);
    } else if (s.kind == LayerKind::dense) {
      l.weight = MatrixX<Scalar>::Zero(s.out_channels, s.in_channels);
    } else if (s.kind == LayerKind::batchnorm) {
      l.gamma = VectorX<Scalar>::Ones(s.in_channels);
      l.beta = VectorX<Scalar>::Zero(s.in_channels);
      l.running_mean = VectorX<Scalar>::Zero(s.in_channels);
      l.running_var = VectorX<Scalar>::Ones(s.in_channels);
    }
    if (s.has_weight() && s.bias) l.bias = VectorX<Scalar>::Zero(s.out_channels);
    p.layers.push_back(std::move(l));
  }
  return p;
}

template <typename Scalar>
struct ForwardCache {
  std::uint64_t network_id = 0;
  std::uint64_t params_version = 0;
  const void* params_address = nullptr;
  Mode mode = Mode::eval;
  bool valid = false;
  Tensor4<Scalar> input;
  std::vector<Tensor4<Scalar>> outputs;
  std::vector<std::vector<MatrixX<Scalar>>> columns;  // conv: im2col per sample
  std::vector<Tensor4<Scalar>> normalized;            // batchnorm: x-hat
  std::vector<VectorX<Scalar>> batch_mean, batch_var, inv_std;
};

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Forward and exact backward over a shape-checked layer graph. The network
/// itself holds no parameters; they are passed explicitly.
template <typename Scalar>
class Network {
 public:
  explicit Network(Architecture arch)
      : arch_(std::move(arch)), shapes_(arch_.infer_shapes()), id_(next_id()) {}

  const Architecture& architecture() const { return arch_; }
  const std::vector<Shape3>& output_shapes() const { return shapes_; }
  Shape3 input_shape(std::size_t layer, std::size_t operand = 0) const {
    const int src = arch_.layers[layer].inputs[operand];
    return src == kNetworkInput ? arch_.input : shapes_[static_cast<std::size_t>(src)];
  }
  ConvGeometry conv_geometry(std::size_t layer) const {
    const LayerSpec& s = arch_.layers[layer];
    const Shape3 in = input_shape(layer);
    return {in.c, in.h, in.w, s.kernel, s.stride, s.padding};
  }

  /// Returns logits (batch x num_classes). When `cache` is given it is filled
  /// with everything backward() needs.
  MatrixX<Scalar> forward(const NetworkParams<Scalar>& params, const Tensor4<Scalar>& batch,
                          Mode mode, ForwardCache<Scalar>* cache = nullptr) const;

  /// Parameter gradients given d(loss)/d(logits). Running statistics in the
  /// result are left empty.
  NetworkParams<Scalar> backward(const NetworkParams<Scalar>& params,
                                 const MatrixX<Scalar>& grad_logits,
                                 const ForwardCache<Scalar>& cache,
                                 Tensor4<Scalar>* grad_input = nullptr) const;

  /// Exponential moving average of the batch statistics recorded in a
  /// train-mode cache (unbiased variance).
  void update_running_stats(NetworkParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                            Scalar momentum = Scalar(0.1)) const;

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
  }
  void check_params(const NetworkParams<Scalar>& params) const;

  Architecture arch_;
  std::vector<Shape3> shapes_;
  std::uint64_t id_;
};

template <typename Scalar>
void Network<Scalar>::check_params(const NetworkParams<Scalar>& params) const {
  if (params.layers.size() != arch_.layers.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.layers.size()) +
                     " layers, architecture has " + std::to_string(arch_.layers.size()));
  }
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& s = arch_.layers[i];
    const LayerParams<Scalar>& p = params.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(s.kind)) + ")";
    if (s.has_weight()) {
      const Index cols = s.kind == LayerKind::conv2d ? s.in_channels * s.kernel * s.kernel : s.in_channels;
      if (p.weight.rows() != s.out_channels || p.weight.cols() != cols) {
        throw ShapeError(where + ": weight is " + std::to_string(p.weight.rows()) + "x" +
                         std::to_string(p.weight.cols()) + ", expected " +
                         std::to_string(s.out_channels) + "x" + std::to_string(cols));
      }
      if (p.bias.size() != (s.bias ? s.out_channels : 0)) throw ShapeError(where + ": bias size");
    }
    if (s.kind == LayerKind::batchnorm &&
        (p.gamma.size() != s.in_channels || p.beta.size() != s.in_channels ||
         p.running_mean.size() != s.in_channels || p.running_var.size() != s.in_channels)) {
      throw ShapeError(where + ": batchnorm parameter size");
    }
  }
}

template <typename Scalar>
MatrixX<Scalar> Network<Scalar>::forward(const NetworkParams<Scalar>& params,
                                         const Tensor4<Scalar>& batch, Mode mode,
                                         ForwardCache<Scalar>* cache) const {
  check_params(params);
  const Shape3 in = arch_.input;
  if (batch.shape.c != in.c || batch.shape.h != in.h || batch.shape.w != in.w || batch.shape.n < 1) {
    throw ShapeError("layer -1 (input): batch shape " + batch.shape.str() +
                     " does not match network input");
  }
  const Index n = batch.shape.n;
  const std::size_t count = arch_.layers.size();
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  c = ForwardCache<Scalar>{};
  c.outputs.resize(count);
  c.columns.resize(count);
  c.normalized.resize(count);
  c.batch_mean.resize(count);
  c.batch_var.resize(count);
  c.inv_std.resize(count);
  c.input = batch;

  auto source = [&](std::size_t i, std::size_t operand) -> const Tensor4<Scalar>& {
    const int src = arch_.layers[i].inputs[operand];
    return src == kNetworkInput ? c.input : c.outputs[static_cast<std::size_t>(src)];
  };

  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& s = arch_.layers[i];
    const LayerParams<Scalar>& p = params.layers[i];
    const Tensor4<Scalar>& x = source(i, 0);
    const Shape3 os = shapes_[i];
    Tensor4<Scalar> y(Shape4{n, os.c, os.h, os.w});
    switch (s.kind) {
      case LayerKind::conv2d: {
        const ConvGeometry g = conv_geometry(i);
        auto& cols = c.columns[i];
        cols.resize(static_cast<std::size_t>(n));
        for (Index b = 0; b < n; ++b) {
          im2col<Scalar>(x.sample(b), g, cols[static_cast<std::size_t>(b)]);
          auto out = y.sample(b);
          out.noalias() = p.weight * cols[static_cast<std::size_t>(b)];
          if (s.bias) out.colwise() += p.bias;
        }
        break;
      }
      case LayerKind::dense: {
        auto out = y.rows();
        out.noalias() = x.rows() * p.weight.transpose();
        if (s.bias) out.rowwise() += p.bias.transpose();
        break;
      }
      case LayerKind::batchnorm: {
        const Index channels = os.c, plane = os.h * os.w;
        const Scalar count_per_channel = static_cast<Scalar>(n * plane);
        VectorX<Scalar> mean(channels), var(channels);
        if (mode == Mode::train) {
          mean.setZero();
          var.setZero();
          for (Index b = 0; b < n; ++b) mean += x.sample(b).rowwise().sum();
          mean /= count_per_channel;
          for (Index b = 0; b < n; ++b) {
            var += (x.sample(b).colwise() - mean).array().square().matrix().rowwise().sum();
          }
          var /= count_per_channel;
        } else {
          mean = p.running_mean;
          var = p.running_var;
        }
        VectorX<Scalar> inv_std =
            (var.array() + static_cast<Scalar>(kBatchNormEpsilon)).rsqrt().matrix();
        Tensor4<Scalar> xhat(y.shape);
        for (Index b = 0; b < n; ++b) {
          auto h = xhat.sample(b);
          h = ((x.sample(b).colwise() - mean).array().colwise() * inv_std.array()).matrix();
          y.sample(b) = ((h.array().colwise() * p.gamma.array()).colwise() + p.beta.array()).matrix();
        }
        c.normalized[i] = std::move(xhat);
        c.batch_mean[i] = std::move(mean);
        c.batch_var[i] = std::move(var);
        c.inv_std[i] = std::move(inv_std);
        break;
      }
      case LayerKind::relu:
        y.data = x.data.cwiseMax(Scalar(0));
        break;
      case LayerKind::avgpool: {
        const Scalar inv = Scalar(1) / static_cast<Scalar>(x.shape.plane());
        for (Index b = 0; b < n; ++b) y.sample(b) = x.sample(b).rowwise().sum() * inv;
        break;
      }
      case LayerKind::add:
        y.data = x.data + source(i, 1).data;
        break;
      case LayerKind::shortcut: {
        const Index pad = (s.out_channels - s.in_channels) / 2;
        for (Index b = 0; b < n; ++b) {
          for (Index ch = 0; ch < s.in_channels; ++ch) {
            for (Index yy = 0; yy < os.h; ++yy) {
              for (Index xx = 0; xx < os.w; ++xx) {
                y(b, ch + pad, yy, xx) = x(b, ch, yy * s.stride, xx * s.stride);
              }
            }
          }
        }
        break;
      }
    }
    c.outputs[i] = std::move(y);
  }

  c.network_id = id_;
  c.params_version = params.version;
  c.params_address = &params;
  c.mode = mode;
  c.valid = true;
  const Tensor4<Scalar>& last = c.outputs.back();
  return MatrixX<Scalar>(last.rows());
}

template <typename Scalar>
NetworkParams<Scalar> Network<Scalar>::backward(const NetworkParams<Scalar>& params,
                                                const MatrixX<Scalar>& grad_logits,
                                                const ForwardCache<Scalar>& cache,
                                                Tensor4<Scalar>* grad_input) const {
  if (!cache.valid || cache.network_id != id_ || cache.params_address != &params ||
      cache.params_version != params.version) {
    throw Error("stale forward cache: parameters or network changed since forward()");
  }
  const std::size_t count = arch_.layers.size();
  const Index n = cache.input.shape.n;
  if (grad_logits.rows() != n || grad_logits.cols() != arch_.num_classes) {
    throw ShapeError("layer " + std::to_string(count - 1) + ": logit gradient has wrong shape");
  }

  NetworkParams<Scalar> grads = make_params<Scalar>(arch_);
  for (auto& g : grads.layers) {
    g.weight.setZero();
    g.bias.setZero();
    g.gamma.setZero();
    g.beta.setZero();
    g.running_mean.resize(0);
    g.running_var.resize(0);
  }

  std::vector<Tensor4<Scalar>> dout(count);
  for (std::size_t i = 0; i < count; ++i) dout[i] = Tensor4<Scalar>(cache.outputs[i].shape);
  dout.back().rows() = grad_logits;
  Tensor4<Scalar> dinput(cache.input.shape);

  auto source = [&](std::size_t i, std::size_t operand) -> const Tensor4<Scalar>& {
    const int src = arch_.layers[i].inputs[operand];
    return src == kNetworkInput ? cache.input : cache.outputs[static_cast<std::size_t>(src)];
  };
  auto sink = [&](std::size_t i, std::size_t operand) -> Tensor4<Scalar>& {
    const int src = arch_.layers[i].inputs[operand];
    return src == kNetworkInput ? dinput : dout[static_cast<std::size_t>(src)];
  };

  for (std::size_t idx = count; idx-- > 0;) {
    const LayerSpec& s = arch_.layers[idx];
    const LayerParams<Scalar>& p = params.layers[idx];
    LayerParams<Scalar>& g = grads.layers[idx];
    const Tensor4<Scalar>& dy = dout[idx];
    const Tensor4<Scalar>& x = source(idx, 0);
    Tensor4<Scalar>& dx = sink(idx, 0);
    switch (s.kind) {
      case LayerKind::conv2d: {
        const ConvGeometry geo = conv_geometry(idx);
        MatrixX<Scalar> dcols;
        for (Index b = 0; b < n; ++b) {
          const auto& cols = cache.columns[idx][static_cast<std::size_t>(b)];
          const auto go = dy.sample(b);
          g.weight.noalias() += go * cols.transpose();
          if (s.bias) g.bias += go.rowwise().sum();
          dcols.noalias() = p.weight.transpose() * go;
          auto plane = dx.sample(b);
          col2im<Scalar>(dcols, geo, plane);
        }
        break;
      }
      case LayerKind::dense: {
        g.weight.noalias() += dy.rows().transpose() * x.rows();
        if (s.bias) g.bias += dy.rows().colwise().sum().transpose();
        dx.rows().noalias() += dy.rows() * p.weight;
        break;
      }
      case LayerKind::batchnorm: {
        const Tensor4<Scalar>& xhat = cache.normalized[idx];
        const VectorX<Scalar>& inv_std = cache.inv_std[idx];
        const Index channels = s.in_channels;
        VectorX<Scalar> sum_dy = VectorX<Scalar>::Zero(channels);
        VectorX<Scalar> sum_dy_xhat = VectorX<Scalar>::Zero(channels);
        for (Index b = 0; b < n; ++b) {
          sum_dy += dy.sample(b).rowwise().sum();
          sum_dy_xhat += dy.sample(b).cwiseProduct(xhat.sample(b)).rowwise().sum();
        }
        g.gamma += sum_dy_xhat;
        g.beta += sum_dy;
        if (cache.mode == Mode::train) {
          // dx = gamma*inv_std/M * (M*dy - sum(dy) - xhat*sum(dy*xhat))
          const Scalar m = static_cast<Scalar>(n * xhat.shape.plane());
          const VectorX<Scalar> scale = (p.gamma.array() * inv_std.array() / m).matrix();
          for (Index b = 0; b < n; ++b) {
            auto d = dx.sample(b);
            const auto h = xhat.sample(b);
            d += ((((dy.sample(b).array() * m).colwise() - sum_dy.array()) -
                   (h.array().colwise() * sum_dy_xhat.array()))
                      .colwise() *
                  scale.array())
                     .matrix();
          }
        } else {
          const VectorX<Scalar> scale = (p.gamma.array() * inv_std.array()).matrix();
          for (Index b = 0; b < n; ++b) {
            dx.sample(b) += (dy.sample(b).array().colwise() * scale.array()).matrix();
          }
        }
        break;
      }
      case LayerKind::relu: {
        const auto& y = cache.outputs[idx];
        dx.data.array() += (y.data.array() > Scalar(0)).select(dy.data.array(), Scalar(0));
        break;
      }
      case LayerKind::avgpool: {
        const Scalar inv = Scalar(1) / static_cast<Scalar>(x.shape.plane());
        for (Index b = 0; b < n; ++b) {
          dx.sample(b).colwise() += dy.sample(b).col(0) * inv;
        }
        break;
      }
      case LayerKind::add:
        dx.data += dy.data;
        sink(idx, 1).data += dy.data;
        break;
      case LayerKind::shortcut: {
        const Index pad = (s.out_channels - s.in_channels) / 2;
        const Shape4 os = dy.shape;
        for (Index b = 0; b < n; ++b) {
          for (Index ch = 0; ch < s.in_channels; ++ch) {
            for (Index yy = 0; yy < os.h; ++yy) {
              for (Index xx = 0; xx < os.w; ++xx) {
                dx(b, ch, yy * s.stride, xx * s.stride) += dy(b, ch + pad, yy, xx);
              }
            }
          }
        }
        break;
      }
    }
  }
  if (grad_input) *grad_input = std::move(dinput);
  return grads;
}

template <typename Scalar>
void Network<Scalar>::update_running_stats(NetworkParams<Scalar>& params,
                                           const ForwardCache<Scalar>& cache,
                                           Scalar momentum) const {
  if (!cache.valid || cache.mode != Mode::train) return;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    if (arch_.layers[i].kind != LayerKind::batchnorm) continue;
    const Scalar m = static_cast<Scalar>(cache.normalized[i].shape.n * cache.normalized[i].shape.plane());
    const Scalar unbias = m > Scalar(1) ? m / (m - Scalar(1)) : Scalar(1);
    auto& p = params.layers[i];
    p.running_mean = (Scalar(1) - momentum) * p.running_mean + momentum * cache.batch_mean[i];
    p.running_var = (Scalar(1) - momentum) * p.running_var + momentum * unbias * cache.batch_var[i];
  }
  params.touch();
}

}  // namespace lnx

#endif  // LNX_NN_NETWORK_HPP_
