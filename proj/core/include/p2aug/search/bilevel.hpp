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

#include <vector>

#include "p2aug/ad/optim.hpp"
#include "p2aug/ad/tensor.hpp"

namespace p2aug::search {

/// Inner/outer problem seen by the alternating optimizer. Both losses must be
/// deterministic between calls within one step: the problem holds the current batches
/// and augmentation draws and only changes them when the caller says so.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;
  /// omega: network weights.
  virtual std::vector<ad::Tensor> model_parameters() = 0;
  /// d: augmentation policy parameters.
  virtual std::vector<ad::Tensor> policy_parameters() = 0;
  virtual ad::Tensor train_loss() = 0;
  virtual ad::Tensor val_loss() = 0;
  /// Restores policy constraints after an update.
  virtual void project_policy() {}
};

struct HypergradOptions {
  /// Scale of the second-order term; the inner step size in the unrolled objective.
  double zeta = 5e-4;
  /// epsilon = epsilon_scale / ||grad_omega L_val||.
  double epsilon_scale = 0.01;
  /// Below this gradient norm epsilon is undefined and the policy update is skipped.
  double min_grad_norm = 1e-12;
};

struct HypergradStats {
  double train_loss = 0.0;   // at (omega_{k-1}, d_{k-1})
  double val_loss = 0.0;     // at (omega_k)
  double val_grad_norm = 0.0;
  double epsilon = 0.0;
  double policy_grad_norm = 0.0;
  bool policy_skipped = false;
};

/// One alternating step:
///   1. omega_k = model_optimizer step on grad_omega L_train(omega_{k-1}, d)
///   2. v = grad_omega L_val(omega_k)
///   3. epsilon = epsilon_scale / ||v||
///   4. omega_pm = omega_{k-1} +- epsilon * v
///   5. grad_d = -zeta * (grad_d L_train(omega_plus, d) - grad_d L_train(omega_minus, d)) / (2 epsilon)
///   6. policy_optimizer step on grad_d, project, omega restored to omega_k
/// On return the policy tensors' gradients hold grad_d.
HypergradStats hypergrad_step(BilevelProblem& problem, ad::Optimizer& model_optimizer, ad::Optimizer& policy_optimizer,
                              const HypergradOptions& options);

/// L_train = (omega - d)^2, L_val = omega^2. The hypergradient has a closed form, which
/// makes this the reference problem for the optimizer.
class QuadraticToyProblem final : public BilevelProblem {
 public:
  QuadraticToyProblem(double omega, double d);
  std::vector<ad::Tensor> model_parameters() override { return {omega_}; }
  std::vector<ad::Tensor> policy_parameters() override { return {d_}; }
  ad::Tensor train_loss() override;
  ad::Tensor val_loss() override;

  double omega() const { return omega_.item(); }
  double d() const { return d_.item(); }
  ad::Tensor& omega_tensor() { return omega_; }
  ad::Tensor& d_tensor() { return d_; }

 private:
  ad::Tensor omega_, d_;
};

}  // namespace p2aug::search
