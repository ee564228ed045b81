/**
 * Copyright 2026 The p2aug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "p2aug/ad/gradcheck.hpp"
#include "p2aug/ad/ops.hpp"
#include "p2aug/rng.hpp"

namespace p2aug::app {

/// One differentiable operation under test. `run` draws a random instance from `rng`,
/// builds a scalar loss through the operation and checks it with ad::check_gradients.
struct GradcheckCase {
  std::string module;  // autodiff, augment, policy, p2net
  std::string op;
  std::function<ad::GradCheckReport(Rng& rng, const ad::GradCheckOptions& options)> run;
};

struct GradcheckRow {
  std::string module;
  std::string op;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string worst;  // "instance#i input#k[j]"
};

/// Every differentiable operation of the library.
std::vector<GradcheckCase> default_gradcheck_cases();

using Conv2dFn = std::function<ad::Tensor(const ad::Tensor&, const ad::Tensor&, const ad::Tensor&, ad::Conv2dOptions)>;
/// The conv2d case, parameterized by the implementation so a broken backward can be
/// substituted in tests.
GradcheckCase conv2d_case(Conv2dFn conv = ad::conv2d);

/// Module names present in `cases`, in order of first appearance.
std::vector<std::string> gradcheck_modules(const std::vector<GradcheckCase>& cases);

/// Runs `instances` random instances of every case whose module matches `scope` ("all"
/// selects everything). Throws ValueError for an unknown scope.
std::vector<GradcheckRow> run_gradcheck(const std::vector<GradcheckCase>& cases, std::string_view scope,
                                        std::size_t instances, std::uint64_t seed,
                                        const ad::GradCheckOptions& options = {});

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows);

}  // namespace p2aug::app
