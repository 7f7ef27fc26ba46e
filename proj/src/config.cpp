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

#include "lnx/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lnx {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* expected) {
  throw Error("config: " + std::string(key) + " = '" + std::string(value) + "': expected " + expected);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "a finite number");
  } else {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(key, v, "an integer");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "true or false");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view v) {
  if (key == "dataset") c.dataset = v;
  else if (key == "architecture") c.architecture = v;
  else if (key == "widths") {
    c.widths.clear();
    std::string_view rest = v;
    while (!trim(rest).empty()) {
      const auto comma = rest.find(',');
      c.widths.push_back(parse_number<Index>(key, trim(rest.substr(0, comma))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  } else if (key == "epochs") c.epochs = parse_number<int>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<Index>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "lr_main") c.lr_main = parse_number<double>(key, v);
  else if (key == "lr_entropy") c.lr_entropy = parse_number<double>(key, v);
  else if (key == "lambda_i") c.lambda_i = parse_number<double>(key, v);
  else if (key == "lambda_u") c.sparsity.lambda_unstructured = parse_number<double>(key, v);
  else if (key == "lambda_s") c.sparsity.lambda_structured = parse_number<double>(key, v);
  else if (key == "unstructured_norm") {
    if (v == "l2") c.sparsity.unstructured_norm = UnstructuredNorm::l2;
    else if (v == "l1") c.sparsity.unstructured_norm = UnstructuredNorm::l1;
    else bad(key, v, "l2 or l1");
  } else if (key == "group_norm") {
    if (v == "l2") c.sparsity.group_norm = GroupNorm::l2;
    else if (v == "linf") c.sparsity.group_norm = GroupNorm::linf;
    else bad(key, v, "l2 or linf");
  } else if (key == "rho") {
    if (v == "slice_length") c.sparsity.rho = RhoRule::slice_length;
    else if (v == "unit") c.sparsity.rho = RhoRule::unit;
    else bad(key, v, "slice_length or unit");
  } else if (key == "b_min") c.b_min = parse_number<double>(key, v);
  else if (key == "init_rule") {
    if (v == "exact_rounding") c.init_rule = InitRule::exact_rounding;
    else if (v == "closed_form") c.init_rule = InitRule::closed_form;
    else bad(key, v, "exact_rounding or closed_form");
  } else if (key == "reparameterize") c.reparameterize = parse_bool(key, v);
  else if (key == "bn_recalibration") c.bn_recalibration = parse_bool(key, v);
  else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, v);
  else if (key == "density_init_scale") c.density_init_scale = parse_number<double>(key, v);
  else if (key == "subset_fraction") c.subset_fraction = parse_number<double>(key, v);
  else if (key == "objective_scale") {
    if (v == "unit") c.objective_scale = ObjectiveScale::unit;
    else if (v == "batch") c.objective_scale = ObjectiveScale::batch;
    else if (v == "dataset") c.objective_scale = ObjectiveScale::dataset;
    else bad(key, v, "unit, batch or dataset");
  } else if (key == "augment") {
    if (v == "auto") c.augment = Augment::automatic;
    else if (v == "on") c.augment = Augment::on;
    else if (v == "off") c.augment = Augment::off;
    else bad(key, v, "auto, on or off");
  } else if (key == "max_train_samples") c.max_train_samples = parse_number<Index>(key, v);
  else if (key == "data_dir") c.data_dir = v;
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "workers") c.workers = parse_number<int>(key, v);
  else throw Error("config: unknown key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void RunConfig::validate() const {
  if (dataset != "mnist" && dataset != "cifar10-subset" && dataset != "cifar10") {
    throw Error("config: unknown dataset '" + dataset + "'");
  }
  if (epochs < 0) throw Error("config: epochs must be >= 0");
  if (batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (!(lr_main >= 0 && lr_entropy >= 0 && lambda_i >= 0 && weight_decay >= 0)) {
    throw Error("config: rates and coefficients must be >= 0");
  }
  sparsity.validate();
  if (reparameterize && !(b_min > 0.5)) throw Error("config: b_min must exceed 0.5");
  if (!(density_init_scale > 0)) throw Error("config: density_init_scale must be > 0");
  if (!(subset_fraction > 0 && subset_fraction <= 1)) throw Error("config: subset_fraction must be in (0, 1]");
  if (max_train_samples < 0) throw Error("config: max_train_samples must be >= 0");
  if (workers < 1) throw Error("config: workers must be >= 1");
}

bool RunConfig::augmentation_enabled() const {
  if (augment == Augment::automatic) return dataset != "mnist";
  return augment == Augment::on;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "dataset = " << dataset << "\n";
  os << "architecture = " << architecture << "\n";
  os << "widths = ";
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  os << "\n";
  os << "epochs = " << epochs << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "seed = " << seed << "\n";
  os << "lr_main = " << format_double(lr_main) << "\n";
  os << "lr_entropy = " << format_double(lr_entropy) << "\n";
  os << "lambda_i = " << format_double(lambda_i) << "\n";
  os << "objective_scale = " << (objective_scale == ObjectiveScale::unit    ? "unit"
                                : objective_scale == ObjectiveScale::batch ? "batch"
                                                                           : "dataset") << "\n";
  os << "lambda_u = " << format_double(sparsity.lambda_unstructured) << "\n";
  os << "lambda_s = " << format_double(sparsity.lambda_structured) << "\n";
  os << "unstructured_norm = " << (sparsity.unstructured_norm == UnstructuredNorm::l2 ? "l2" : "l1") << "\n";
  os << "group_norm = " << (sparsity.group_norm == GroupNorm::l2 ? "l2" : "linf") << "\n";
  os << "rho = " << (sparsity.rho == RhoRule::slice_length ? "slice_length" : "unit") << "\n";
  os << "b_min = " << format_double(b_min) << "\n";
  os << "init_rule = " << (init_rule == InitRule::exact_rounding ? "exact_rounding" : "closed_form") << "\n";
  os << "reparameterize = " << (reparameterize ? "true" : "false") << "\n";
  os << "bn_recalibration = " << (bn_recalibration ? "true" : "false") << "\n";
  os << "weight_decay = " << format_double(weight_decay) << "\n";
  os << "density_init_scale = " << format_double(density_init_scale) << "\n";
  os << "subset_fraction = " << format_double(subset_fraction) << "\n";
  os << "augment = " << (augment == Augment::automatic ? "auto" : augment == Augment::on ? "on" : "off") << "\n";
  os << "max_train_samples = " << max_train_samples << "\n";
  os << "data_dir = " << data_dir << "\n";
  os << "output_dir = " << output_dir << "\n";
  os << "workers = " << workers << "\n";
  return os.str();
}

std::uint64_t RunConfig::result_hash() const {
  RunConfig c = *this;
  c.data_dir.clear();
  c.output_dir.clear();
  c.workers = 1;
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (unsigned char ch : c.to_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lnx
