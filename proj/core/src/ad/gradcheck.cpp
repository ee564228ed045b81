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

#include "p2aug/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "p2aug/ad/tape.hpp"
#include "p2aug/error.hpp"
#include "p2aug/rng.hpp"

namespace p2aug::ad {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<Tensor()>& fn, std::span<Tensor> inputs,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  std::vector<std::vector<double>> analytic(inputs.size());
  double f0 = 0.0;
  {
    Tape tape;
    Tape::Scope scope(tape);
    for (Tensor& t : inputs) {
      t.set_requires_grad(true);
      t.zero_grad();
    }
    Tensor loss = fn();
    if (loss.numel() != 1) throw ShapeError("gradcheck function must return a scalar");
    f0 = loss.item();
    tape.backward(loss);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (inputs[k].has_grad()) {
        analytic[k].assign(inputs[k].grad().begin(), inputs[k].grad().end());
      } else {
        analytic[k].assign(inputs[k].numel(), 0.0);
      }
    }
  }

  double shared_scale = 0.0;
  for (const auto& a : analytic)
    for (double g : a) shared_scale = std::max(shared_scale, std::abs(g));

  NoGradGuard no_grad;
  auto eval = [&]() { return fn().item(); };
  Rng rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    const std::size_t n = t.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > options.max_coords) {
      for (std::size_t i = 0; i < options.max_coords; ++i) {
        std::swap(coords[i], coords[i + rng.below(n - i)]);
      }
      coords.resize(options.max_coords);
    }
    double scale = 0.0;
    for (double a : analytic[k]) scale = std::max(scale, std::abs(a));
    if (options.shared_floor) scale = shared_scale;
    const double floor = std::max(1e-3 * scale, 1e-8 * (1.0 + std::abs(f0)));

    auto data = t.data_mut();
    for (std::size_t idx : coords) {
      const double original = data[idx];
      double err = 0.0;
      double h = options.step;
      for (int attempt = 0; attempt <= options.refinements; ++attempt) {
        data[idx] = original + h;
        const double fp = eval();
        data[idx] = original - h;
        const double fm = eval();
        data[idx] = original;
        const double numeric = (fp - fm) / (2.0 * h);
        err = relative_error(analytic[k][idx], numeric, floor);
        if (err <= options.tolerance) {
          if (attempt > 0) ++report.refined;
          break;
        }
        h /= 10.0;
      }
      ++report.coords;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = "input#" + std::to_string(k) + "[" + std::to_string(idx) + "]";
      }
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace p2aug::ad
