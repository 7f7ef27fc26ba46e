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

#include <string>

#include "doctest.h"
#include "lnx/config.hpp"

using namespace lnx;

namespace {

std::string message(std::string_view text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.lambda_i == 1e-4);
  CHECK(c.lr_entropy == 1e-4);
  CHECK(c.lr_main == 1e-2);
  CHECK(c.objective_scale == ObjectiveScale::unit);
  CHECK(c.init_rule == InitRule::exact_rounding);
  CHECK(c.sparsity.group_norm == GroupNorm::l2);
  CHECK(c.sparsity.rho == RhoRule::slice_length);
  CHECK_FALSE(c.augmentation_enabled());
  RunConfig cifar;
  cifar.dataset = "cifar10-subset";
  CHECK(cifar.augmentation_enabled());
}

TEST_CASE("parsing, comments and round trip") {
  const RunConfig c = parse_config(R"(# a run
dataset = cifar10-subset
architecture = resnet20   # trailing comment
widths = 8, 16,32
epochs = 3
seed = 18446744073709551615
lambda_u = 3e-5
lambda_s = 0.25
group_norm = linf
unstructured_norm = l1
rho = unit
init_rule = closed_form
objective_scale = dataset
reparameterize = no
augment = off

output_dir = /tmp/x
)");
  CHECK(c.dataset == "cifar10-subset");
  CHECK(c.architecture == "resnet20");
  CHECK(c.widths == std::vector<Index>{8, 16, 32});
  CHECK(c.epochs == 3);
  CHECK(c.seed == 18446744073709551615ull);
  CHECK(c.sparsity.lambda_unstructured == 3e-5);
  CHECK(c.sparsity.lambda_structured == 0.25);
  CHECK(c.sparsity.group_norm == GroupNorm::linf);
  CHECK(c.sparsity.unstructured_norm == UnstructuredNorm::l1);
  CHECK(c.sparsity.rho == RhoRule::unit);
  CHECK(c.init_rule == InitRule::closed_form);
  CHECK(c.objective_scale == ObjectiveScale::dataset);
  CHECK_FALSE(c.reparameterize);
  CHECK_FALSE(c.augmentation_enabled());
  CHECK(c.output_dir == "/tmp/x");

  const RunConfig back = parse_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.result_hash() == c.result_hash());
  RunConfig odd;
  odd.lr_main = 0.1 + 0.2;  // needs all 17 digits
  CHECK(parse_config(odd.to_text()).lr_main == odd.lr_main);
}

TEST_CASE("errors carry the line number") {
  CHECK(message("epochs = 2\nbogus = 1\n").find("config line 2: config: unknown key 'bogus'") == 0);
  CHECK(message("\n\nepochs 2").find("config line 3: expected") == 0);
  CHECK(message("epochs = two").find("config line 1") == 0);
  CHECK(message("lambda_s = nan").find("finite") != std::string::npos);
  CHECK(message("lambda_s = -1").find("nonnegative") != std::string::npos);
  CHECK(message("group_norm = l3").find("l2 or linf") != std::string::npos);
  CHECK(message("b_min = 0.5").find("b_min") != std::string::npos);
  CHECK(message("dataset = imagenet").find("unknown dataset") != std::string::npos);
  CHECK(message("workers = 0").find("workers") != std::string::npos);
  CHECK(message("subset_fraction = 1.5").find("subset_fraction") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), Error);
}

TEST_CASE("result hash ignores paths and workers only") {
  RunConfig a;
  RunConfig b = a;
  b.output_dir = "elsewhere";
  b.data_dir = "/data";
  b.workers = 4;
  CHECK(a.result_hash() == b.result_hash());
  for (const char* setting : {"seed = 1", "lambda_s = 1e-3", "epochs = 11", "rho = unit", "objective_scale = dataset", "objective_scale = batch",
                              "density_init_scale = 2", "max_train_samples = 100", "bn_recalibration = false"}) {
    CAPTURE(setting);
    CHECK(parse_config(setting).result_hash() != a.result_hash());
  }
}

TEST_CASE("single settings") {
  RunConfig c;
  apply_setting(c, "lambda_i", "0");
  CHECK(c.lambda_i == 0);
  apply_setting(c, "widths", "");
  CHECK(c.widths.empty());
  CHECK_THROWS_AS(apply_setting(c, "epochs", "1.5"), Error);
  CHECK_THROWS_AS(apply_setting(c, "reparameterize", "maybe"), Error);
}
