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

#include "lnx/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace lnx {

std::vector<ParameterGroup> partition_model(const Architecture& arch,
                                            const std::vector<int>& compressible) {
  std::vector<int> layers = compressible;
  if (layers.empty()) {
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
      if (arch.layers[i].has_weight()) layers.push_back(static_cast<int>(i));
    }
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());

  std::vector<ParameterGroup> groups;
  std::map<std::pair<LayerKind, Index>, std::size_t> lookup;
  for (int idx : layers) {
    if (idx < 0 || idx >= static_cast<int>(arch.layers.size())) {
      throw Error("partition_model: layer " + std::to_string(idx) + " does not exist");
    }
    const LayerSpec& spec = arch.layers[static_cast<std::size_t>(idx)];
    if (!spec.has_weight()) {
      throw Error("partition_model: layer " + std::to_string(idx) + " (" +
                  std::string(to_string(spec.kind)) + ") cannot be compressed");
    }
    const Index k = spec.kind == LayerKind::conv2d ? spec.kernel : 1;
    const auto key = std::make_pair(spec.kind, k);
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      ParameterGroup g;
      g.kind = spec.kind;
      g.kernel = k;
      g.slice_length = spec.slice_length();
      g.name = spec.kind == LayerKind::conv2d
                   ? "conv" + std::to_string(k) + "x" + std::to_string(k)
                   : std::string("dense");
      it = lookup.emplace(key, groups.size()).first;
      groups.push_back(std::move(g));
    }
    groups[it->second].members.push_back(idx);
  }
  return groups;
}

Index layer_fan_in(const LayerSpec& spec) {
  return spec.kind == LayerKind::conv2d ? spec.in_channels * spec.kernel * spec.kernel
                                        : spec.in_channels;
}

double rounded_uniform_variance(double b) {
  if (b <= 0) return 0;
  // Integer k owns [k - 1/2, k + 1/2); mass is the overlap with [-b, b].
  const auto top = static_cast<std::int64_t>(std::floor(b + 0.5));
  double second = 0;
  for (std::int64_t k = 1; k <= top; ++k) {
    const double lo = static_cast<double>(k) - 0.5;
    const double hi = std::min(b, static_cast<double>(k) + 0.5);
    if (hi > lo) second += 2.0 * (hi - lo) * static_cast<double>(k * k);
  }
  return second / (2.0 * b);
}

double closed_form_decoder_variance(Index slice_length, double fan_max, double b_min) {
  const double spread = (2 * b_min + 1) * (2 * b_min + 1) - 1;
  return 24.0 / (static_cast<double>(slice_length) * fan_max * spread);
}

double closed_form_bound(double fan, double fan_max, double b_min) {
  const double spread = (2 * b_min + 1) * (2 * b_min + 1) - 1;
  return (std::sqrt(fan_max / fan * spread + 1) - 1) / 2;
}

namespace {

// Smallest b with rounded_uniform_variance(b) >= target. The variance is
// continuous and nondecreasing for b > 1/2.
double solve_bound(double target, double b_min) {
  double lo = b_min, hi = std::max(1.0, b_min);
  while (rounded_uniform_variance(hi) < target) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rounded_uniform_variance(mid) < target ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

GroupInit plan_group_init(Index slice_length, const std::vector<double>& fans, double b_min,
                          InitRule rule) {
  if (!(b_min > 0.5)) {
    throw Error("init: b_min must exceed 0.5 so that some latents round to nonzero values");
  }
  if (fans.empty()) throw Error("init: group has no layers");
  const double fan_max = *std::max_element(fans.begin(), fans.end());
  if (!(fan_max > 0)) throw Error("init: fans must be positive");
  const double l = static_cast<double>(slice_length);
  GroupInit plan;
  if (rule == InitRule::closed_form) {
    plan.decoder_variance = closed_form_decoder_variance(slice_length, fan_max, b_min);
    for (double f : fans) plan.bounds.push_back(closed_form_bound(f, fan_max, b_min));
  } else {
    // 2/f = l * v * Var(round(U[-b, b])), anchored at the largest fan.
    const double anchor = rounded_uniform_variance(b_min);
    plan.decoder_variance = 2.0 / (l * fan_max * anchor);
    for (double f : fans) {
      plan.bounds.push_back(f == fan_max ? b_min : solve_bound(anchor * fan_max / f, b_min));
    }
  }
  return plan;
}

}  // namespace lnx
