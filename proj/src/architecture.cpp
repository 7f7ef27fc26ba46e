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

#include "lnx/nn/architecture.hpp"

#include <array>

#include <json.hpp>

namespace lnx {
namespace {

constexpr std::array<std::string_view, 7> kKindNames = {
    "conv2d", "dense", "batchnorm", "relu", "avgpool", "add", "shortcut"};

[[noreturn]] void fail(std::size_t layer, const LayerSpec& spec, const std::string& what) {
  throw ShapeError("layer " + std::to_string(layer) + " (" + std::string(to_string(spec.kind)) +
                   "): " + what);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  return kKindNames.at(static_cast<std::size_t>(kind));
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  }
  throw Error("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(int input, Index c_in, Index c_out, Index k, Index stride, Index pad,
                            bool bias) {
  return {LayerKind::conv2d, {input}, c_in, c_out, k, stride, pad, bias};
}
LayerSpec LayerSpec::dense(int input, Index c_in, Index c_out, bool bias) {
  return {LayerKind::dense, {input}, c_in, c_out, 1, 1, 0, bias};
}
LayerSpec LayerSpec::batchnorm(int input, Index channels) {
  return {LayerKind::batchnorm, {input}, channels, channels};
}
LayerSpec LayerSpec::relu(int input, Index channels) {
  return {LayerKind::relu, {input}, channels, channels};
}
LayerSpec LayerSpec::avgpool(int input, Index channels) {
  return {LayerKind::avgpool, {input}, channels, channels};
}
LayerSpec LayerSpec::add(int a, int b, Index channels) {
  return {LayerKind::add, {a, b}, channels, channels};
}
LayerSpec LayerSpec::shortcut(int input, Index c_in, Index c_out, Index stride) {
  return {LayerKind::shortcut, {input}, c_in, c_out, 1, stride, 0};
}

std::vector<Shape3> Architecture::infer_shapes() const {
  if (input.c < 1 || input.h < 1 || input.w < 1) {
    throw ShapeError("network input shape must be positive");
  }
  if (layers.empty()) throw ShapeError("architecture has no layers");
  std::vector<Shape3> shapes;
  shapes.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    const std::size_t arity = spec.kind == LayerKind::add ? 2 : 1;
    if (spec.inputs.size() != arity) fail(i, spec, "expected " + std::to_string(arity) + " input(s)");
    std::vector<Shape3> in;
    for (int src : spec.inputs) {
      if (src < kNetworkInput || src >= static_cast<int>(i)) {
        fail(i, spec, "input index " + std::to_string(src) + " is not an earlier layer");
      }
      in.push_back(src == kNetworkInput ? input : shapes[static_cast<std::size_t>(src)]);
    }
    if (spec.in_channels < 1 || spec.out_channels < 1) fail(i, spec, "channel counts must be >= 1");
    if (spec.kernel < 1 || spec.stride < 1 || spec.padding < 0) {
      fail(i, spec, "kernel and stride must be >= 1, padding >= 0");
    }
    const Shape3 x = in.front();
    Shape3 out;
    switch (spec.kind) {
      case LayerKind::conv2d: {
        if (x.c != spec.in_channels) {
          fail(i, spec, "expects " + std::to_string(spec.in_channels) + " input channels, got " +
                            std::to_string(x.c));
        }
        const Index span_h = x.h + 2 * spec.padding - spec.kernel;
        const Index span_w = x.w + 2 * spec.padding - spec.kernel;
        if (span_h < 0 || span_w < 0) fail(i, spec, "kernel larger than padded input");
        out = {spec.out_channels, span_h / spec.stride + 1, span_w / spec.stride + 1};
        break;
      }
      case LayerKind::dense:
        if (x.size() != spec.in_channels) {
          fail(i, spec, "expects " + std::to_string(spec.in_channels) + " input features, got " +
                            std::to_string(x.size()));
        }
        out = {spec.out_channels, 1, 1};
        break;
      case LayerKind::batchnorm:
      case LayerKind::relu:
        if (x.c != spec.in_channels) fail(i, spec, "channel mismatch");
        out = x;
        break;
      case LayerKind::avgpool:
        if (x.c != spec.in_channels) fail(i, spec, "channel mismatch");
        out = {x.c, 1, 1};
        break;
      case LayerKind::add:
        if (in[0] != in[1]) fail(i, spec, "operands have different shapes");
        if (x.c != spec.in_channels) fail(i, spec, "channel mismatch");
        out = x;
        break;
      case LayerKind::shortcut:
        if (x.c != spec.in_channels) fail(i, spec, "channel mismatch");
        if (spec.out_channels < spec.in_channels || (spec.out_channels - spec.in_channels) % 2 != 0) {
          fail(i, spec, "zero padding needs an even, non-negative channel increase");
        }
        out = {spec.out_channels, (x.h - 1) / spec.stride + 1, (x.w - 1) / spec.stride + 1};
        break;
    }
    if (spec.kind != LayerKind::conv2d && spec.kind != LayerKind::dense &&
        spec.kind != LayerKind::shortcut && spec.out_channels != spec.in_channels) {
      fail(i, spec, "in/out channels must agree");
    }
    shapes.push_back(out);
  }
  const Shape3& last = shapes.back();
  if (num_classes < 1 || last != Shape3{num_classes, 1, 1}) {
    throw ShapeError("layer " + std::to_string(layers.size() - 1) +
                     ": network output must be (num_classes, 1, 1)");
  }
  return shapes;
}

// Fields equal to their defaults are left out: inputs = {i - 1}, in = the
// producer's channels, out = in, k = stride = 1, pad = 0, bias = false.
std::string Architecture::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["input"] = {input.c, input.h, input.w};
  j["num_classes"] = num_classes;
  auto& arr = j["layers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    nlohmann::json l = {{"kind", to_string(s.kind)}};
    if (s.inputs != std::vector<int>{static_cast<int>(i) - 1}) l["inputs"] = s.inputs;
    const int src = s.inputs.empty() ? -1 : s.inputs.front();
    const Index produced = src < 0 || src >= static_cast<int>(i) ? input.c : layers[static_cast<std::size_t>(src)].out_channels;
    if (s.in_channels != produced) l["in"] = s.in_channels;
    if (s.out_channels != s.in_channels) l["out"] = s.out_channels;
    if (s.kernel != 1) l["k"] = s.kernel;
    if (s.stride != 1) l["stride"] = s.stride;
    if (s.padding != 0) l["pad"] = s.padding;
    if (s.bias) l["bias"] = true;
    arr.push_back(std::move(l));
  }
  return j.dump();
}

Architecture Architecture::from_json(std::string_view text) {
  Architecture a;
  try {
    const auto j = nlohmann::json::parse(text);
    a.name = j.at("name").get<std::string>();
    const auto in = j.at("input").get<std::vector<Index>>();
    if (in.size() != 3) throw Error("input shape needs 3 entries");
    a.input = {in[0], in[1], in[2]};
    a.num_classes = j.at("num_classes").get<Index>();
    for (const auto& l : j.at("layers")) {
      const int i = static_cast<int>(a.layers.size());
      LayerSpec s;
      s.kind = layer_kind_from_string(l.at("kind").get<std::string>());
      s.inputs = l.value("inputs", std::vector<int>{i - 1});
      const int src = s.inputs.empty() ? -1 : s.inputs.front();
      const Index produced = src < 0 || src >= i ? a.input.c : a.layers[static_cast<std::size_t>(src)].out_channels;
      s.in_channels = l.value("in", produced);
      s.out_channels = l.value("out", s.in_channels);
      s.kernel = l.value("k", Index{1});
      s.stride = l.value("stride", Index{1});
      s.padding = l.value("pad", Index{0});
      s.bias = l.value("bias", false);
      a.layers.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture descriptor: ") + e.what());
  }
  a.validate();
  return a;
}

Architecture make_mlp(Shape3 input, Index hidden, Index num_classes) {
  Architecture a{"mlp", input, num_classes, {}};
  a.layers.push_back(LayerSpec::dense(kNetworkInput, input.size(), hidden));
  a.layers.push_back(LayerSpec::relu(0, hidden));
  a.layers.push_back(LayerSpec::dense(1, hidden, num_classes));
  a.validate();
  return a;
}

Architecture make_miniconv(Shape3 input, const std::vector<Index>& widths,
                           const std::vector<Index>& strides, Index num_classes) {
  if (widths.empty() || widths.size() != strides.size()) {
    throw Error("miniconv needs one stride per conv width");
  }
  Architecture a{"miniconv", input, num_classes, {}};
  int prev = kNetworkInput;
  Index channels = input.c;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    a.layers.push_back(LayerSpec::conv2d(prev, channels, widths[i], 3, strides[i], 1));
    a.layers.push_back(LayerSpec::batchnorm(static_cast<int>(a.layers.size()) - 1, widths[i]));
    a.layers.push_back(LayerSpec::relu(static_cast<int>(a.layers.size()) - 1, widths[i]));
    prev = static_cast<int>(a.layers.size()) - 1;
    channels = widths[i];
  }
  a.layers.push_back(LayerSpec::avgpool(prev, channels));
  a.layers.push_back(
      LayerSpec::dense(static_cast<int>(a.layers.size()) - 1, channels, num_classes));
  a.validate();
  return a;
}

Architecture make_resnet20(Shape3 input, Index base_width, Index num_classes) {
  Architecture a{"resnet20", input, num_classes, {}};
  auto push = [&](LayerSpec s) {
    a.layers.push_back(std::move(s));
    return static_cast<int>(a.layers.size()) - 1;
  };
  int x = push(LayerSpec::conv2d(kNetworkInput, input.c, base_width, 3, 1, 1));
  x = push(LayerSpec::batchnorm(x, base_width));
  x = push(LayerSpec::relu(x, base_width));
  Index channels = base_width;
  for (int stage = 0; stage < 3; ++stage) {
    const Index width = base_width << stage;
    for (int block = 0; block < 3; ++block) {
      const Index stride = (stage > 0 && block == 0) ? 2 : 1;
      int y = push(LayerSpec::conv2d(x, channels, width, 3, stride, 1));
      y = push(LayerSpec::batchnorm(y, width));
      y = push(LayerSpec::relu(y, width));
      y = push(LayerSpec::conv2d(y, width, width, 3, 1, 1));
      y = push(LayerSpec::batchnorm(y, width));
      int skip = x;
      if (stride != 1 || channels != width) skip = push(LayerSpec::shortcut(x, channels, width, stride));
      x = push(LayerSpec::add(y, skip, width));
      x = push(LayerSpec::relu(x, width));
      channels = width;
    }
  }
  x = push(LayerSpec::avgpool(x, channels));
  push(LayerSpec::dense(x, channels, num_classes));
  a.validate();
  return a;
}

Architecture make_architecture(std::string_view name, Shape3 input, Index num_classes,
                               const std::vector<Index>& widths) {
  if (name == "mlp") return make_mlp(input, widths.empty() ? 128 : widths.front(), num_classes);
  if (name == "miniconv") {
    std::vector<Index> w = widths.empty() ? std::vector<Index>{16, 32, 32, 64} : widths;
    std::vector<Index> strides(w.size(), 1);
    // Downsample on every second conv.
    for (std::size_t i = 1; i < strides.size(); i += 2) strides[i] = 2;
    return make_miniconv(input, w, strides, num_classes);
  }
  if (name == "resnet20") return make_resnet20(input, widths.empty() ? 16 : widths.front(), num_classes);
  throw Error("unknown architecture '" + std::string(name) + "'");
}

}  // namespace lnx
