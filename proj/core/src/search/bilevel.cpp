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

#include "p2aug/search/bilevel.hpp"

#include <cmath>
#include <functional>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/error.hpp"

namespace p2aug::search {
namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot values_of(const std::vector<ad::Tensor>& ts) {
  Snapshot s;
  s.reserve(ts.size());
  for (const ad::Tensor& t : ts) s.emplace_back(t.data().begin(), t.data().end());
  return s;
}

Snapshot grads_of(const std::vector<ad::Tensor>& ts) {
  Snapshot s;
  s.reserve(ts.size());
  for (const ad::Tensor& t : ts) {
    if (t.has_grad()) {
      s.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      s.emplace_back(t.numel(), 0.0);
    }
  }
  return s;
}

// ts = base + alpha * dir
void assign(std::vector<ad::Tensor>& ts, const Snapshot& base, const Snapshot* dir = nullptr, double alpha = 0.0) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto d = ts[i].data_mut();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = dir ? base[i][j] + alpha * (*dir)[i][j] : base[i][j];
  }
}

double run_backward(const std::function<ad::Tensor()>& loss_fn, std::vector<ad::Tensor>& a, std::vector<ad::Tensor>& b) {
  ad::zero_grads(a);
  ad::zero_grads(b);
  ad::Tape tape;
  ad::Tape::Scope scope(tape);
  ad::Tensor loss = loss_fn();
  if (loss.numel() != 1) throw ShapeError("loss must be a scalar");
  const double value = loss.item();
  if (!std::isfinite(value)) throw Error("non-finite loss");
  tape.backward(loss);
  return value;
}

}  // namespace

HypergradStats hypergrad_step(BilevelProblem& problem, ad::Optimizer& model_optimizer, ad::Optimizer& policy_optimizer,
                              const HypergradOptions& options) {
  std::vector<ad::Tensor> omega = problem.model_parameters();
  std::vector<ad::Tensor> d = problem.policy_parameters();
  auto train = [&] { return problem.train_loss(); };
  auto val = [&] { return problem.val_loss(); };
  HypergradStats stats;

  const Snapshot omega_prev = values_of(omega);
  stats.train_loss = run_backward(train, omega, d);
  model_optimizer.step(omega);
  const Snapshot omega_k = values_of(omega);

  stats.val_loss = run_backward(val, omega, d);
  const Snapshot v = grads_of(omega);
  double norm2 = 0.0;
  for (const auto& g : v)
    for (double x : g) norm2 += x * x;
  stats.val_grad_norm = std::sqrt(norm2);

  if (!(stats.val_grad_norm >= options.min_grad_norm)) {
    stats.policy_skipped = true;
    ad::zero_grads(omega);
    ad::zero_grads(d);
    return stats;
  }
  const double eps = options.epsilon_scale / stats.val_grad_norm;
  stats.epsilon = eps;

  assign(omega, omega_prev, &v, eps);
  run_backward(train, omega, d);
  const Snapshot g_plus = grads_of(d);
  assign(omega, omega_prev, &v, -eps);
  run_backward(train, omega, d);
  const Snapshot g_minus = grads_of(d);
  assign(omega, omega_k);
  ad::zero_grads(omega);

  double pnorm2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto g = d[i].grad_mut();
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] = -options.zeta * (g_plus[i][j] - g_minus[i][j]) / (2.0 * eps);
      pnorm2 += g[j] * g[j];
    }
  }
  stats.policy_grad_norm = std::sqrt(pnorm2);
  policy_optimizer.step(d);
  problem.project_policy();
  return stats;
}

QuadraticToyProblem::QuadraticToyProblem(double omega, double d)
    : omega_(ad::Tensor::scalar(omega, true)), d_(ad::Tensor::scalar(d, true)) {}

ad::Tensor QuadraticToyProblem::train_loss() {
  ad::Tensor diff = ad::sub(omega_, d_);
  return ad::mul(diff, diff);
}

ad::Tensor QuadraticToyProblem::val_loss() { return ad::mul(omega_, omega_); }

}  // namespace p2aug::search
