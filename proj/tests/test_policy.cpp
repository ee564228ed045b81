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

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "p2aug/ad/optim.hpp"
#include "p2aug/error.hpp"
#include "p2aug/log.hpp"
#include "p2aug/search/bilevel.hpp"
#include "p2aug/search/policy.hpp"
#include "p2aug/search/policy_io.hpp"
#include "support/fd_oracle.hpp"

namespace p2aug::search {
namespace {

using ad::Tensor;
using aug::AugOpKind;
using aug::Sample;
using p2aug::testing::max_grad_error;
using p2aug::testing::project;
using p2aug::testing::random_tensor;

constexpr double kOff = -1000.0;  // gate logit that drives b to exactly 0
constexpr double kOn = 1000.0;    // ... and to exactly 1

void set_logits(Policy& p, const std::vector<double>& l) { std::copy(l.begin(), l.end(), p.logits().data_mut().begin()); }

GumbelDraw zero_draw(std::size_t k, std::size_t n, double u = 0.5) {
  return {std::vector<double>(k, 0.0), std::vector<double>(k * n, u)};
}

Sample smooth_sample(std::size_t size, Rng& rng) {
  std::vector<double> v(size * size);
  const double fx = rng.uniform(0.2, 0.5), fy = rng.uniform(0.2, 0.5), ph = rng.uniform(0, 6.28);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) v[r * size + c] = 0.4 + 0.15 * std::sin(fx * c + ph) * std::cos(fy * r);
  return {Tensor({1, size, size}, std::move(v)), {{size / 2.0, size / 2.0, true}}, "s", {}};
}

double magnitude_for(AugOpKind kind, double natural) {
  const aug::AugOpInfo& i = aug::info(kind);
  return (natural - i.min) / (i.max - i.min);
}

TEST(Policy, DefaultsAndInvariants) {
  Rng rng(1);
  Policy p = Policy::random(8, 2, rng);
  double s = 0.0;
  for (double x : p.pi()) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t n = 0; n < 2; ++n) {
      EXPECT_DOUBLE_EQ(p.slot(k, n).probability(), 0.5);
      EXPECT_GE(p.slot(k, n).magnitude.item(), 0.0);
      EXPECT_LE(p.slot(k, n).magnitude.item(), 1.0);
    }
  EXPECT_NEAR(p.entropy(), std::log(8.0) + 16 * std::log(2.0), 1e-12);
  EXPECT_THROW(Policy(0, 2), ValueError);
  EXPECT_THROW(Policy(2, 2, 0.0, 1.0), ValueError);
  EXPECT_THROW(p.set_tau2(-1.0), ValueError);
}

TEST(Policy, ProjectNormalizesAndClamps) {
  Policy p(3, 1);
  set_logits(p, {2.0, -1.0, 0.5});
  p.slot(0, 0).magnitude.data_mut()[0] = 1.7;
  p.slot(1, 0).magnitude.data_mut()[0] = -0.2;
  const std::vector<double> before = p.pi();
  p.project();
  double s = 0.0;
  for (double l : p.logits().data()) s += std::exp(l);
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p.pi()[i], before[i], 1e-15);
  EXPECT_EQ(p.slot(0, 0).magnitude.item(), 1.0);
  EXPECT_EQ(p.slot(1, 0).magnitude.item(), 0.0);
}

TEST(Policy, ParametersSkipNonDifferentiableMagnitudes) {
  Policy p(2, 1);
  p.slot(0, 0).kind = AugOpKind::FlipHorizontal;
  p.slot(1, 0).kind = AugOpKind::Rotate;
  auto params = p.parameters();
  ASSERT_EQ(params.size(), 4u);  // logits, two p_logits, one magnitude
  EXPECT_TRUE(params[3].same_storage(p.slot(1, 0).magnitude));
}

TEST(RelaxCategorical, UniformWithZeroNoise) {
  Policy p(5, 1);
  Tensor c = relax_categorical(p, zero_draw(5, 1));
  for (double x : c.data()) EXPECT_NEAR(x, 0.2, 1e-15);
}

TEST(RelaxCategorical, ZeroNoiseUnitTemperatureRecoversPi) {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    Policy p(6, 1);
    std::vector<double> l(6);
    for (double& x : l) x = rng.normal();
    set_logits(p, l);
    Tensor c = relax_categorical(p, zero_draw(6, 1));
    const auto pi = p.pi();
    double s = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_NEAR(c[k], pi[k], 1e-15);
      s += c[k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(RelaxCategorical, ArgmaxFrequenciesMatchPi) {
  Policy p(4, 1);
  set_logits(p, {std::log(0.1), std::log(0.2), std::log(0.3), std::log(0.4)});
  Rng rng(3);
  const int trials = 100000;
  std::vector<int> hits(4, 0);
  for (int t = 0; t < trials; ++t) ++hits[sample_hard(p, GumbelDraw::sample(4, 1, rng)).sub_policy];
  const auto pi = p.pi();
  for (std::size_t k = 0; k < 4; ++k) {
    const double sd = std::sqrt(pi[k] * (1 - pi[k]) / trials);
    EXPECT_NEAR(hits[k] / static_cast<double>(trials), pi[k], 4 * sd) << k;
  }
}

TEST(RelaxCategorical, RejectsBadTemperatureAndDraw) {
  Policy p(3, 2);
  EXPECT_THROW(p.set_tau1(0.0), ValueError);
  EXPECT_THROW(relax_categorical(p, zero_draw(2, 2)), ShapeError);
}

TEST(RelaxBernoulli, Examples) {
  OperationSlot s{AugOpKind::Rotate, Tensor::scalar(0.0), Tensor::scalar(0.5)};
  for (double tau : {0.01, 1.0, 7.0}) EXPECT_EQ(relax_bernoulli(s, 0.5, tau).item(), 0.5);
  s.p_logit = Tensor::scalar(std::log(0.7 / 0.3));
  EXPECT_NEAR(relax_bernoulli(s, 0.5, 1.0).item(), 0.7, 1e-15);
  EXPECT_THROW(relax_bernoulli(s, 0.5, 0.0), ValueError);
  EXPECT_THROW(relax_bernoulli(s, 0.0, 1.0), ValueError);
  EXPECT_THROW(relax_bernoulli(s, 1.0, 1.0), ValueError);
}

TEST(RelaxBernoulli, ThresholdFrequencyMatchesP) {
  Rng rng(4);
  for (double p : {0.2, 0.7}) {
    OperationSlot s{AugOpKind::Rotate, Tensor::scalar(std::log(p / (1 - p))), Tensor::scalar(0.5)};
    const int trials = 100000;
    int above = 0;
    for (int t = 0; t < trials; ++t) above += relax_bernoulli(s, rng.uniform_open(), 1.0).item() > 0.5;
    EXPECT_NEAR(above / static_cast<double>(trials), p, 4 * std::sqrt(p * (1 - p) / trials));
  }
}

TEST(Relaxation, LowTemperatureLimits) {
  Rng rng(5);
  int checked = 0;
  while (checked < 10) {
    Policy p(5, 2, 1e-3, 1e-3);
    std::vector<double> l(5);
    for (double& x : l) x = rng.normal();
    set_logits(p, l);
    p.slot(0, 0).p_logit.data_mut()[0] = rng.normal();
    GumbelDraw draw = GumbelDraw::sample(5, 2, rng);
    // Skip near-ties; the limit is only approached at tau = 1e-3 when gaps exceed ~0.02.
    std::vector<double> score(5);
    for (std::size_t k = 0; k < 5; ++k) score[k] = l[k] + draw.gumbel[k];
    std::vector<double> sorted = score;
    std::sort(sorted.rbegin(), sorted.rend());
    const double z = p.slot(0, 0).p_logit.item() + std::log(draw.gate_uniforms[0] / (1 - draw.gate_uniforms[0]));
    if (sorted[0] - sorted[1] < 0.05 || std::abs(z) < 0.05) continue;
    ++checked;
    Tensor c = relax_categorical(p, draw);
    const std::size_t hard = sample_hard(p, draw).sub_policy;
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(c[k], k == hard ? 1.0 : 0.0, 1e-6);
    EXPECT_NEAR(relax_bernoulli(p.slot(0, 0), draw.gate_uniforms[0], 1e-3).item(), z > 0 ? 1.0 : 0.0, 1e-6);
  }
}

TEST(Relaxation, ArgmaxInvariantUnderTemperature) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    Policy p = Policy::random(6, 1, rng);
    std::vector<double> l(6);
    for (double& x : l) x = rng.normal();
    set_logits(p, l);
    GumbelDraw draw = GumbelDraw::sample(6, 1, rng);
    const std::size_t hard = sample_hard(p, draw).sub_policy;
    for (double tau : {0.05, 1.0, 20.0}) {
      p.set_tau1(tau);
      Tensor c = relax_categorical(p, draw);
      const auto d = c.data();
      EXPECT_EQ(static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin()), hard);
    }
  }
}

TEST(ApplyGatedOp, EndpointsAreExact) {
  Rng rng(7);
  Sample s = smooth_sample(12, rng);
  OperationSlot slot{AugOpKind::Rotate, Tensor::scalar(0.0), Tensor::scalar(0.8)};
  Sample full = aug::apply_op(s, slot.kind, slot.magnitude);
  Sample b0 = apply_gated_op(s, slot, Tensor::scalar(0.0));
  Sample b1 = apply_gated_op(s, slot, Tensor::scalar(1.0));
  for (std::size_t i = 0; i < s.image.numel(); ++i) {
    EXPECT_EQ(b0.image[i], s.image[i]);
    EXPECT_EQ(b1.image[i], full.image[i]);
  }
  EXPECT_EQ(b0.keypoints[0].x, s.keypoints[0].x);
  EXPECT_EQ(b1.keypoints[0].x, full.keypoints[0].x);
  EXPECT_THROW(apply_gated_op(s, slot, Tensor::scalar(1.5)), ValueError);
}

TEST(ApplyGatedOp, HalfBlendOfBrightness) {
  const double delta = 0.1;
  Sample s{Tensor({1, 4, 4}, 0.3), {}, "c", {}};
  OperationSlot slot{AugOpKind::Brightness, Tensor::scalar(0.0), Tensor::scalar(magnitude_for(AugOpKind::Brightness, delta))};
  Sample out = apply_gated_op(s, slot, Tensor::scalar(0.5));
  for (double v : out.image.data()) EXPECT_NEAR(v, 0.3 + 0.5 * delta, 1e-15);
}

TEST(ApplyGatedOp, KeypointsFollowDominantBranch) {
  Sample s{Tensor({1, 10, 10}, 0.5), {{4.0, 4.0, true}}, "k", {}};
  OperationSlot slot{AugOpKind::TranslateX, Tensor::scalar(0.0), Tensor::scalar(1.0)};
  EXPECT_EQ(apply_gated_op(s, slot, Tensor::scalar(0.49)).keypoints[0].x, 4.0);
  EXPECT_NEAR(apply_gated_op(s, slot, Tensor::scalar(0.5)).keypoints[0].x, 5.5, 1e-12);
}

TEST(ApplyPolicy, SingleSubPolicyIgnoresLogits) {
  Rng rng(8);
  Policy p = Policy::random(1, 2, rng);
  set_logits(p, {3.7});
  Sample s = smooth_sample(10, rng);
  GumbelDraw draw = GumbelDraw::sample(1, 2, rng);
  Sample direct = s;
  for (std::size_t n = 0; n < 2; ++n) {
    direct = apply_gated_op(direct, p.slot(0, n), relax_bernoulli(p.slot(0, n), draw.gate_uniforms[n], p.tau2()));
  }
  Sample out = apply_policy(s, p, draw);
  for (std::size_t i = 0; i < s.image.numel(); ++i) EXPECT_EQ(out.image[i], direct.image[i]);
}

TEST(ApplyPolicy, ClosedGatesGiveIdentity) {
  Rng rng(9);
  Policy p = Policy::random(4, 2, rng);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t n = 0; n < 2; ++n) p.slot(k, n).p_logit.data_mut()[0] = kOff;
  Sample s = smooth_sample(10, rng);
  Sample out = apply_policy(s, p, GumbelDraw::sample(4, 2, rng));
  for (std::size_t i = 0; i < s.image.numel(); ++i) EXPECT_NEAR(out.image[i], s.image[i], 1e-15);
  EXPECT_EQ(out.keypoints[0].x, s.keypoints[0].x);
}

TEST(ApplyPolicy, WeightedBlendOfTwoSubPolicies) {
  const double delta = 0.1;
  Policy p(2, 2);
  set_logits(p, {std::log(0.25), std::log(0.75)});
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t n = 0; n < 2; ++n) p.slot(k, n).p_logit.data_mut()[0] = kOff;
  p.slot(1, 0).kind = AugOpKind::Brightness;
  p.slot(1, 0).p_logit.data_mut()[0] = kOn;
  p.slot(1, 0).magnitude.data_mut()[0] = magnitude_for(AugOpKind::Brightness, delta);
  Sample s{Tensor({1, 3, 5}, 0.5), {}, "w", {}};
  Sample out = apply_policy(s, p, zero_draw(2, 2));
  for (double v : out.image.data()) EXPECT_NEAR(v, 0.5 + 0.75 * delta, 1e-12);
}

TEST(ApplyPolicy, HardForwardMatchesArgmaxSubPolicy) {
  Rng rng(10);
  Policy p = Policy::random(3, 2, rng);
  Sample s = smooth_sample(10, rng);
  GumbelDraw draw = GumbelDraw::sample(3, 2, rng);
  Tensor c = relax_categorical(p, draw);
  const std::size_t best = std::max_element(c.data().begin(), c.data().end()) - c.data().begin();
  Sample expect = s;
  for (std::size_t n = 0; n < 2; ++n) {
    const OperationSlot& slot = p.slot(best, n);
    expect = apply_gated_op(expect, slot, relax_bernoulli(slot, draw.gate_uniforms[best * 2 + n], p.tau2()));
  }
  Sample out = apply_policy(s, p, draw, {.hard_forward = true});
  for (std::size_t i = 0; i < s.image.numel(); ++i) EXPECT_NEAR(out.image[i], expect.image[i], 1e-14);
}

TEST(ApplyPolicy, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  for (int instance = 0; instance < 10; ++instance) {
    Policy p = Policy::random(3, 2, rng);
    for (std::size_t k = 0; k < 3; ++k) {
      p.logits().data_mut()[k] = rng.normal(0.0, 0.5);
      for (std::size_t n = 0; n < 2; ++n) {
        p.slot(k, n).p_logit.data_mut()[0] = rng.normal();
        p.slot(k, n).magnitude.data_mut()[0] = rng.uniform(0.1, 0.9);
      }
    }
    Sample s = smooth_sample(12, rng);
    GumbelDraw draw = GumbelDraw::sample(3, 2, rng);
    Tensor r = random_tensor({1, 12, 12}, rng);
    auto fn = [&] { return project(apply_policy(s, p, draw).image, r); };
    // Judge every parameter against the gradient scale of the whole policy.
    auto params = p.parameters();
    double scale = 0.0;
    for (Tensor& t : params)
      for (double g : p2aug::testing::analytic_grad(fn, t)) scale = std::max(scale, std::abs(g));
    for (std::size_t i = 0; i < params.size(); ++i) {
      EXPECT_LE(max_grad_error(fn, params[i], 1e-4, 64, 1e-5, scale), 1e-4) << "instance " << instance << " param " << i;
    }
  }
}

TEST(HardSampling, AppliesEnabledOpsOnly) {
  Policy p(2, 2);
  set_logits(p, {std::log(0.5), std::log(0.5)});
  p.slot(1, 0).kind = AugOpKind::Brightness;
  p.slot(1, 0).magnitude.data_mut()[0] = 1.0;
  p.slot(1, 1).kind = AugOpKind::TranslateX;
  p.slot(1, 0).p_logit.data_mut()[0] = 5.0;
  p.slot(1, 1).p_logit.data_mut()[0] = -5.0;
  GumbelDraw draw{{0.0, 1.0}, {0.5, 0.5, 0.5, 0.5}};
  HardDecision d = sample_hard(p, draw);
  EXPECT_EQ(d.sub_policy, 1u);
  EXPECT_EQ(d.gates, (std::vector<bool>{true, false}));
  Sample s{Tensor({1, 4, 4}, 0.2), {{1.0, 1.0, true}}, "h", {}};
  Sample out = apply_hard(s, p, d);
  for (double v : out.image.data()) EXPECT_NEAR(v, 0.5, 1e-15);
  EXPECT_EQ(out.keypoints[0].x, 1.0);
}

TEST(Anneal, LinearSchedule) {
  EXPECT_DOUBLE_EQ(annealed_temperature(1.0, 0.1, 0, 10), 1.0);
  EXPECT_DOUBLE_EQ(annealed_temperature(1.0, 0.1, 5, 10), 0.55);
  EXPECT_DOUBLE_EQ(annealed_temperature(1.0, 0.1, 20, 10), 0.1);
}

TEST(Hypergrad, QuadraticToyClosedForm) {
  QuadraticToyProblem toy(1.0, 0.0);
  ad::Sgd omega_opt(0.1), d_opt(0.0);
  HypergradStats st = hypergrad_step(toy, omega_opt, d_opt, {.zeta = 0.1});
  EXPECT_NEAR(toy.omega(), 0.8, 1e-15);
  EXPECT_FALSE(st.policy_skipped);
  EXPECT_NEAR(st.val_grad_norm, 1.6, 1e-15);
  EXPECT_NEAR(st.epsilon, 0.01 / 1.6, 1e-15);
  // -zeta * d/d(omega) [d/dd (omega - d)^2] * grad L_val = -0.1 * (-2) * 1.6
  EXPECT_NEAR(toy.d_tensor().grad()[0], 0.32, 1e-6);
  EXPECT_DOUBLE_EQ(st.train_loss, 1.0);
  EXPECT_NEAR(st.val_loss, 0.64, 1e-15);
}

TEST(Hypergrad, StationaryPolicyHasZeroGradient) {
  // omega_k = 1 - 0.2 * (1 - d) vanishes at d = -4.
  QuadraticToyProblem toy(1.0, -4.0);
  ad::Sgd omega_opt(0.1), d_opt(0.01);
  HypergradStats st = hypergrad_step(toy, omega_opt, d_opt, {.zeta = 0.1});
  EXPECT_LT(std::abs(toy.d_tensor().has_grad() ? toy.d_tensor().grad()[0] : 0.0), 1e-6);
  EXPECT_LT(std::abs(st.policy_grad_norm), 1e-6);
  EXPECT_NEAR(toy.d(), -4.0, 1e-6);
}

TEST(Hypergrad, ZeroValidationGradientSkipsPolicyUpdate) {
  QuadraticToyProblem toy(0.0, 0.0);
  ad::Sgd omega_opt(0.1), d_opt(1.0);
  HypergradStats st = hypergrad_step(toy, omega_opt, d_opt, {.zeta = 0.1});
  EXPECT_TRUE(st.policy_skipped);
  EXPECT_EQ(st.epsilon, 0.0);
  EXPECT_EQ(toy.d(), 0.0);
}

TEST(Hypergrad, ToyConvergesIn500Steps) {
  QuadraticToyProblem toy(1.0, 0.5);
  ad::Sgd omega_opt(0.1), d_opt(0.5);
  for (int i = 0; i < 500; ++i) hypergrad_step(toy, omega_opt, d_opt, {.zeta = 0.1});
  EXPECT_LT(std::abs(toy.omega()), 1e-2);
  EXPECT_LT(std::abs(toy.d() - toy.omega()), 1e-2);
}

TEST(Hypergrad, InnerStepNeverIncreasesTrainLoss) {
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const double w0 = rng.uniform(-2, 2), d0 = rng.uniform(-2, 2);
    QuadraticToyProblem toy(w0, d0);
    ad::Sgd omega_opt(1e-3), d_opt(0.01);
    HypergradStats st = hypergrad_step(toy, omega_opt, d_opt, {.zeta = 1e-3});
    const double after = (toy.omega() - d0) * (toy.omega() - d0);
    EXPECT_LE(after, st.train_loss);
  }
}

TEST(PolicyIo, RoundTripIsBitExact) {
  Rng rng(13);
  Policy p = Policy::random(8, 2, rng, 0.7, 1.3);
  for (std::size_t k = 0; k < 8; ++k) {
    p.logits().data_mut()[k] = rng.normal();
    for (std::size_t n = 0; n < 2; ++n) p.slot(k, n).p_logit.data_mut()[0] = rng.normal();
  }
  p.project();
  Policy q = import_policy(export_policy(p));
  ASSERT_EQ(q.k(), 8u);
  ASSERT_EQ(q.n(), 2u);
  EXPECT_EQ(q.tau1(), 0.7);
  EXPECT_EQ(q.tau2(), 1.3);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(q.logits()[k], p.logits()[k]);
    for (std::size_t n = 0; n < 2; ++n) {
      EXPECT_EQ(q.slot(k, n).kind, p.slot(k, n).kind);
      EXPECT_EQ(q.slot(k, n).p_logit.item(), p.slot(k, n).p_logit.item());
      EXPECT_EQ(q.slot(k, n).magnitude.item(), p.slot(k, n).magnitude.item());
    }
  }
  EXPECT_EQ(export_policy(q), export_policy(p));
}

TEST(PolicyIo, UnnormalizedPiIsRenormalizedWithWarning) {
  std::vector<std::string> warnings;
  log::set_sink([&](std::string_view level, std::string_view msg) {
    if (level == "warn") warnings.emplace_back(msg);
  });
  Policy p = import_policy(R"({"version":1,"K":2,"N":1,"tau1":1,"tau2":1,"pi":[1.0,3.0],
    "slots":[[{"kind":"Rotate","p":0.5,"m":0.5}],[{"kind":"Scale","p":0.5,"m":0.5}]]})");
  log::set_sink(nullptr);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("renormaliz"), std::string::npos);
  EXPECT_NEAR(p.pi()[0], 0.25, 1e-15);
  EXPECT_NEAR(p.pi()[1], 0.75, 1e-15);
}

TEST(PolicyIo, HandWrittenTwoOperationExample) {
  // Sub-policy 0: ShearX with probability 0.7 and magnitude 5 of 10, then Rotate with
  // probability 0.2.
  Policy p = import_policy(R"({
    "version": 1, "K": 2, "N": 2, "tau1": 1.0, "tau2": 1.0, "pi": [0.5, 0.5],
    "slots": [
      [{"kind": "ShearX", "p": 0.7, "m": 0.5}, {"kind": "Rotate", "p": 0.2, "m": 0.3}],
      [{"kind": "Brightness", "p": 0.5, "m": 0.5}, {"kind": "Contrast", "p": 0.5, "m": 0.5}]
    ]})");
  EXPECT_EQ(p.slot(0, 0).kind, AugOpKind::ShearX);
  EXPECT_NEAR(p.slot(0, 0).probability(), 0.7, 1e-15);
  EXPECT_EQ(p.slot(0, 0).magnitude.item(), 0.5);
  EXPECT_EQ(p.slot(0, 1).kind, AugOpKind::Rotate);
  EXPECT_NEAR(p.slot(0, 1).probability(), 0.2, 1e-15);
  EXPECT_NEAR(p.pi()[0], 0.5, 1e-15);
}

std::string import_error(const std::string& text) {
  try {
    import_policy(text);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

TEST(PolicyIo, RejectsBadFilesWithFieldPath) {
  EXPECT_NE(import_error("{not json").find("malformed"), std::string::npos);
  EXPECT_NE(import_error(R"({"version":1,"K":1,"N":1,"tau1":1,"tau2":1,"logits":[0],
    "slots":[[{"kind":"Solarize","p":0.5,"m":0.5}]]})")
                .find("slots[0][0].kind"),
            std::string::npos);
  EXPECT_NE(import_error(R"({"version":1,"K":2,"N":1,"tau1":1,"tau2":1,"logits":[0],
    "slots":[[{"kind":"Rotate","p":0.5,"m":0.5}],[{"kind":"Rotate","p":0.5,"m":0.5}]]})")
                .find("logits"),
            std::string::npos);
  EXPECT_NE(import_error(R"({"version":1,"K":1,"N":2,"tau1":1,"tau2":1,"logits":[0],
    "slots":[[{"kind":"Rotate","p":0.5,"m":0.5}]]})")
                .find("slots[0]: expected 2"),
            std::string::npos);
  EXPECT_NE(import_error(R"({"version":1,"K":1,"N":1,"tau1":1,"tau2":1,"logits":[0],
    "slots":[[{"kind":"Rotate","p":0.5,"m":1.5}]]})")
                .find("slots[0][0].m"),
            std::string::npos);
  EXPECT_NE(import_error(R"({"version":2})").find("version"), std::string::npos);
  EXPECT_NE(import_error(R"({"version":1,"N":1})").find("K: missing"), std::string::npos);
}

}  // namespace
}  // namespace p2aug::search
