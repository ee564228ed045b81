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

#include "p2aug/search/policy.hpp"

#include <algorithm>
#include <cmath>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/error.hpp"

namespace p2aug::search {
namespace {

double log_sum_exp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

void check_temperature(double tau, const char* what) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValueError(std::string(what) + " must be positive, got " + std::to_string(tau));
}

void check_draw(const Policy& policy, const GumbelDraw& draw) {
  if (draw.gumbel.size() != policy.k() || draw.gate_uniforms.size() != policy.k() * policy.n()) {
    throw ShapeError("draw does not match a policy with K=" + std::to_string(policy.k()) +
                     ", N=" + std::to_string(policy.n()));
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

double OperationSlot::probability() const { return 1.0 / (1.0 + std::exp(-p_logit.item())); }

GumbelDraw GumbelDraw::sample(std::size_t k, std::size_t n, Rng& rng) {
  GumbelDraw draw;
  draw.gumbel.resize(k);
  for (double& g : draw.gumbel) g = rng.gumbel();
  draw.gate_uniforms.resize(k * n);
  for (double& u : draw.gate_uniforms) u = rng.uniform_open();
  return draw;
}

Policy::Policy(std::size_t k, std::size_t n, double tau1, double tau2) : k_(k), n_(n), tau1_(tau1), tau2_(tau2) {
  if (k == 0 || n == 0) throw ValueError("policy needs K >= 1 and N >= 1");
  check_temperature(tau1, "tau1");
  check_temperature(tau2, "tau2");
  logits_ = ad::Tensor({k}, -std::log(static_cast<double>(k)), true);
  slots_.resize(k * n);
  for (OperationSlot& s : slots_) {
    s.p_logit = ad::Tensor::scalar(0.0, true);
    s.magnitude = ad::Tensor::scalar(0.5, true);
  }
}

Policy Policy::random(std::size_t k, std::size_t n, Rng& rng, double tau1, double tau2) {
  Policy policy(k, n, tau1, tau2);
  for (OperationSlot& s : policy.slots_) {
    s.kind = aug::kAllKinds[rng.below(aug::kAllKinds.size())];
    s.magnitude.data_mut()[0] = rng.uniform();
  }
  return policy;
}

void Policy::set_tau1(double tau) {
  check_temperature(tau, "tau1");
  tau1_ = tau;
}

void Policy::set_tau2(double tau) {
  check_temperature(tau, "tau2");
  tau2_ = tau;
}

std::vector<ad::Tensor> Policy::parameters() const {
  std::vector<ad::Tensor> params{logits_};
  for (const OperationSlot& s : slots_) params.push_back(s.p_logit);
  for (const OperationSlot& s : slots_) {
    if (aug::info(s.kind).magnitude_differentiable) params.push_back(s.magnitude);
  }
  return params;
}

void Policy::project() {
  for (OperationSlot& s : slots_) {
    auto m = s.magnitude.data_mut();
    m[0] = std::clamp(m[0], 0.0, 1.0);
  }
  auto l = logits_.data_mut();
  const double lse = log_sum_exp(l);
  for (double& x : l) x -= lse;
}

std::vector<double> Policy::pi() const {
  auto l = logits_.data();
  const double lse = log_sum_exp(l);
  std::vector<double> p(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) p[i] = std::exp(l[i] - lse);
  return p;
}

double Policy::entropy() const {
  double h = 0.0;
  for (double p : pi())
    if (p > 0.0) h -= p * std::log(p);
  for (const OperationSlot& s : slots_) {
    // Binary entropy from the logit: log(1 + e^z) - z * sigmoid(z).
    const double z = s.p_logit.item();
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    h += softplus - z * s.probability();
  }
  return h;
}

Policy Policy::clone() const {
  Policy copy(k_, n_, tau1_, tau2_);
  copy.logits_ = logits_.detach().set_requires_grad(true);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    copy.slots_[i].kind = slots_[i].kind;
    copy.slots_[i].p_logit = slots_[i].p_logit.detach().set_requires_grad(true);
    copy.slots_[i].magnitude = slots_[i].magnitude.detach().set_requires_grad(true);
  }
  return copy;
}

ad::Tensor relax_categorical(const Policy& policy, const GumbelDraw& draw) {
  check_temperature(policy.tau1(), "tau1");
  check_draw(policy, draw);
  ad::Tensor g({policy.k()}, draw.gumbel);
  return ad::softmax(ad::scale(ad::add(ad::log_softmax(policy.logits()), g), 1.0 / policy.tau1()));
}

ad::Tensor relax_bernoulli(const OperationSlot& slot, double u, double tau2) {
  check_temperature(tau2, "tau2");
  if (!(u > 0.0 && u < 1.0)) throw ValueError("gate uniform must lie strictly inside (0, 1)");
  return ad::sigmoid(ad::scale(ad::add_scalar(slot.p_logit, std::log(u / (1.0 - u))), 1.0 / tau2));
}

aug::Sample apply_gated_op(const aug::Sample& sample, const OperationSlot& slot, const ad::Tensor& b) {
  if (!b.defined() || b.numel() != 1) throw ShapeError("gate must be a scalar");
  const double bv = b.item();
  if (!(bv >= 0.0 && bv <= 1.0)) throw ValueError("gate value outside [0, 1]");
  aug::Sample transformed = aug::apply_op(sample, slot.kind, slot.magnitude);
  aug::Sample out;
  out.id = sample.id;
  out.flip_permutation = sample.flip_permutation;
  out.keypoints = bv >= 0.5 ? std::move(transformed.keypoints) : sample.keypoints;
  out.image = ad::add(ad::mul(transformed.image, b), ad::mul(sample.image, ad::add_scalar(ad::neg(b), 1.0)));
  return out;
}

aug::Sample apply_policy(const aug::Sample& sample, const Policy& policy, const GumbelDraw& draw,
                         const ApplyOptions& options) {
  check_draw(policy, draw);
  ad::Tensor c = relax_categorical(policy, draw);
  const std::size_t best = argmax(c.data());

  auto run = [&](std::size_t k) {
    aug::Sample s = sample;
    for (std::size_t n = 0; n < policy.n(); ++n) {
      const OperationSlot& slot = policy.slot(k, n);
      s = apply_gated_op(s, slot, relax_bernoulli(slot, draw.gate_uniforms[k * policy.n() + n], policy.tau2()));
    }
    return s;
  };

  if (options.hard_forward) {
    aug::Sample s = run(best);
    ad::Tensor weight = ad::scale(ad::select(c, best), 1.0 / c[best]);
    s.image = ad::mul(s.image, weight);
    return s;
  }

  aug::Sample out;
  out.id = sample.id;
  out.flip_permutation = sample.flip_permutation;
  for (std::size_t k = 0; k < policy.k(); ++k) {
    aug::Sample s = run(k);
    ad::Tensor term = ad::mul(s.image, ad::select(c, k));
    out.image = out.image.defined() ? ad::add(out.image, term) : term;
    if (k == best) out.keypoints = std::move(s.keypoints);
  }
  return out;
}

HardDecision sample_hard(const Policy& policy, const GumbelDraw& draw) {
  check_draw(policy, draw);
  auto l = policy.logits().data();
  const double lse = log_sum_exp(l);
  std::vector<double> score(policy.k());
  for (std::size_t k = 0; k < policy.k(); ++k) score[k] = (l[k] - lse) + draw.gumbel[k];
  HardDecision d;
  d.sub_policy = argmax(score);
  d.gates.resize(policy.n());
  for (std::size_t n = 0; n < policy.n(); ++n) {
    const double u = draw.gate_uniforms[d.sub_policy * policy.n() + n];
    d.gates[n] = policy.slot(d.sub_policy, n).p_logit.item() + std::log(u / (1.0 - u)) > 0.0;
  }
  return d;
}

aug::Sample apply_hard(const aug::Sample& sample, const Policy& policy, const HardDecision& decision) {
  if (decision.sub_policy >= policy.k() || decision.gates.size() != policy.n()) {
    throw ShapeError("hard decision does not match the policy");
  }
  ad::NoGradGuard no_grad;
  aug::Sample s = sample;
  for (std::size_t n = 0; n < policy.n(); ++n) {
    if (!decision.gates[n]) continue;
    const OperationSlot& slot = policy.slot(decision.sub_policy, n);
    s = aug::apply_op(s, slot.kind, slot.magnitude.detach());
  }
  return s;
}

double annealed_temperature(double start, double end, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return end;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return start + (end - start) * t;
}

}  // namespace p2aug::search
