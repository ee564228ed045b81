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
#include <span>
#include <string>

#include "p2aug/ad/tensor.hpp"

namespace p2aug::ad {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates checked per input; larger inputs are subsampled.
  std::size_t max_coords = 48;
  std::uint64_t seed = 0;
  /// Coordinates that miss the tolerance are re-measured at step/10, step/100, ...
  /// Piecewise-linear ops (relu, clamp, bilinear taps) put kinks inside a wide stencil;
  /// a wrong backward stays wrong at every step size.
  int refinements = 2;
  /// Judge every input against the largest analytic component over all inputs instead
  /// of its own. Suits parameter sets whose tensors differ in gradient scale by orders of
  /// magnitude (a bias next to the conv feeding a loss).
  bool shared_floor = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::size_t refined = 0;
  bool passed = true;
  std::string worst;  // "input#i[j]" of the worst coordinate
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares the reverse-mode gradient of the scalar `fn` with respect to each tensor in
/// `inputs` against central finite differences. `fn` must read the current values of
/// `inputs` and be deterministic. Gradients of `inputs` are overwritten.
///
/// Relative errors use a per-input floor of 1e-3 x the largest analytic component so
/// components far below the tensor's scale are judged on absolute terms (see shared_floor).
GradCheckReport check_gradients(const std::function<Tensor()>& fn, std::span<Tensor> inputs,
                                const GradCheckOptions& options = {});

}  // namespace p2aug::ad
