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

#include <cstddef>
#include <vector>

#include "p2aug/ad/tensor.hpp"
#include "p2aug/aug/ops.hpp"
#include "p2aug/rng.hpp"

namespace p2aug::search {

/// One gated operation of a sub-policy. The application probability is stored as a
/// logit so it stays inside (0, 1); the magnitude is normalized to [0, 1].
struct OperationSlot {
  aug::AugOpKind kind = aug::AugOpKind::Rotate;
  ad::Tensor p_logit;
  ad::Tensor magnitude;

  double probability() const;
};

/// Noise for one relaxed draw: K Gumbel(0,1) samples for the sub-policy choice and
/// K x N uniforms in (0, 1) for the operation gates.
struct GumbelDraw {
  std::vector<double> gumbel;
  std::vector<double> gate_uniforms;

  static GumbelDraw sample(std::size_t k, std::size_t n, Rng& rng);
};

/// K sub-policies of N operations each, selected with probabilities pi = softmax(logits).
/// Logits are kept normalized (log pi) by project().
class Policy {
 public:
  Policy(std::size_t k, std::size_t n, double tau1 = 1.0, double tau2 = 1.0);

  /// Uniform pi, p = 0.5, random kinds and magnitudes.
  static Policy random(std::size_t k, std::size_t n, Rng& rng, double tau1 = 1.0, double tau2 = 1.0);

  std::size_t k() const { return k_; }
  std::size_t n() const { return n_; }
  double tau1() const { return tau1_; }
  double tau2() const { return tau2_; }
  void set_tau1(double tau);
  void set_tau2(double tau);

  const ad::Tensor& logits() const { return logits_; }
  ad::Tensor& logits() { return logits_; }
  const OperationSlot& slot(std::size_t k, std::size_t n) const { return slots_[k * n_ + n]; }
  OperationSlot& slot(std::size_t k, std::size_t n) { return slots_[k * n_ + n]; }

  /// Trainable tensors: logits, every p_logit, and magnitudes of ops whose output is
  /// differentiable in m. Flip magnitudes are never updated.
  std::vector<ad::Tensor> parameters() const;

  /// Clamps magnitudes into [0, 1] and shifts logits so that exp(logits) sums to 1.
  void project();

  std::vector<double> pi() const;
  /// H(pi) plus the binary entropy of every gate, in nats.
  double entropy() const;

  /// Deep copy with fresh parameter storage.
  Policy clone() const;

 private:
  std::size_t k_, n_;
  double tau1_, tau2_;
  ad::Tensor logits_;
  std::vector<OperationSlot> slots_;
};

/// c = softmax((log pi + g) / tau1).
ad::Tensor relax_categorical(const Policy& policy, const GumbelDraw& draw);

/// b = sigmoid((p_logit + log(u / (1 - u))) / tau2).
ad::Tensor relax_bernoulli(const OperationSlot& slot, double u, double tau2);

/// b * O(x, m) + (1 - b) * x. Keypoints come from the transformed branch when b >= 0.5.
aug::Sample apply_gated_op(const aug::Sample& sample, const OperationSlot& slot, const ad::Tensor& b);

struct ApplyOptions {
  /// Evaluate only the sub-policy with the largest weight, scaled by c_k / value(c_k) so
  /// its forward value is unchanged while the weight still receives a gradient.
  bool hard_forward = false;
};

/// sum_k c_k S_k(x), where S_k runs its N gated ops in sequence. Keypoints follow the
/// sub-policy with the largest weight.
aug::Sample apply_policy(const aug::Sample& sample, const Policy& policy, const GumbelDraw& draw,
                         const ApplyOptions& options = {});

/// Discrete draw: argmax(log pi + g) and step gates p_logit + logit(u) > 0.
struct HardDecision {
  std::size_t sub_policy = 0;
  std::vector<bool> gates;  // N entries for the chosen sub-policy
};

HardDecision sample_hard(const Policy& policy, const GumbelDraw& draw);

/// Applies the chosen sub-policy's enabled ops in sequence without recording gradients.
aug::Sample apply_hard(const aug::Sample& sample, const Policy& policy, const HardDecision& decision);

/// Linear schedule from `start` at step 0 to `end` at `total_steps`.
double annealed_temperature(double start, double end, std::size_t step, std::size_t total_steps);

}  // namespace p2aug::search
