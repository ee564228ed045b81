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

#include "p2aug/app/pose_task.hpp"

#include <algorithm>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/error.hpp"

namespace p2aug::app {

pose::HeatmapGeometry heatmap_geometry(const ExperimentConfig& config) {
  pose::HeatmapGeometry g;
  g.stride = 4;
  g.sigma = config.model.target_sigma;
  return g;
}

ad::Tensor targets_for(const aug::Sample& sample, const pose::HeatmapGeometry& geometry) {
  return pose::render_heatmaps(sample.keypoints, sample.width() / geometry.stride, sample.height() / geometry.stride,
                               geometry);
}

ad::Tensor sample_training_loss(const net::P2Net& model, const aug::Sample& sample, const ExperimentConfig& config) {
  const ad::Tensor target = targets_for(sample, heatmap_geometry(config));
  return net::training_loss(model.forward(sample.image), target, pose::visibility(sample.keypoints),
                            config.model.ohkm_alpha);
}

ad::Tensor sample_val_loss(const net::P2Net& model, const aug::Sample& sample, const ExperimentConfig& config,
                           bool ohkm) {
  const ad::Tensor target = targets_for(sample, heatmap_geometry(config));
  const ad::Tensor pred = model.forward(sample.image).stage2;
  const auto vis = pose::visibility(sample.keypoints);
  return ohkm ? net::ohkm_loss(pred, target, vis, config.model.ohkm_alpha) : net::l2_loss(pred, target, vis);
}

EvalResult evaluate(const net::P2Net& model, const std::vector<pose::SceneSample>& samples,
                    const ExperimentConfig& config, bool flip) {
  ad::NoGradGuard no_grad;
  const pose::HeatmapGeometry g = heatmap_geometry(config);
  const auto pairs = pose::flip_pairs(config.data.spec.scene.joints);
  EvalResult r;
  double loss = 0.0;
  for (const pose::SceneSample& s : samples) {
    const ad::Tensor pred = model.forward(s.sample.image).stage2;
    loss += net::l2_loss(pred, targets_for(s.sample, g), pose::visibility(s.sample.keypoints)).item();
    ad::Tensor maps;
    if (flip) {
      const ad::Tensor flipped = model.forward(ad::flip_horizontal(s.sample.image)).stage2;
      maps = pose::smooth_and_flip_average(pred, flipped, pairs, config.eval.blur_sigma);
    } else {
      maps = pose::gaussian_blur(pred, config.eval.blur_sigma);
    }
    const auto decoded = pose::decode_keypoints(maps, g);
    r.pck += pose::pck_count(decoded, s.sample.keypoints, s.scale, config.eval.pck_threshold);
    ++r.samples;
  }
  if (r.samples > 0) r.mean_val_loss = loss / static_cast<double>(r.samples);
  return r;
}

search::Policy initial_policy(const ExperimentConfig& config) {
  Rng rng(mix_seed(config.seed, kPolicyStream));
  const PolicyConfig& pc = config.policy;
  search::Policy p(pc.k, pc.n, pc.tau1, pc.tau2);
  for (std::size_t k = 0; k < pc.k; ++k)
    for (std::size_t n = 0; n < pc.n; ++n) {
      search::OperationSlot& s = p.slot(k, n);
      s.kind = pc.ops[rng.below(pc.ops.size())];
      s.magnitude.data_mut()[0] = rng.uniform();
    }
  return p;
}

void check_policy_compatible(const search::Policy& policy, const ExperimentConfig& config) {
  const auto& ops = config.policy.ops;
  for (std::size_t k = 0; k < policy.k(); ++k)
    for (std::size_t n = 0; n < policy.n(); ++n) {
      const aug::AugOpKind kind = policy.slot(k, n).kind;
      if (std::find(ops.begin(), ops.end(), kind) == ops.end()) {
        throw ValueError("policy uses " + std::string(aug::name(kind)) + " (sub-policy " + std::to_string(k) +
                         ", op " + std::to_string(n) + "), which is not in policy.ops");
      }
    }
}

PoseSearchProblem::PoseSearchProblem(net::P2Net& model, search::Policy& policy,
                                     const std::vector<pose::SceneSample>& train,
                                     const std::vector<pose::SceneSample>& val, const ExperimentConfig& config,
                                     std::uint64_t seed)
    : model_(model), policy_(policy), train_(train), val_(val), config_(config), rng_(seed) {
  if (train.empty() || val.empty()) throw ValueError("search needs non-empty train and val splits");
  next_batch();
}

void PoseSearchProblem::next_batch() {
  train_batch_.resize(config_.search.train_batch);
  val_batch_.resize(config_.search.val_batch);
  for (auto& i : train_batch_) i = rng_.below(train_.size());
  for (auto& i : val_batch_) i = rng_.below(val_.size());
  draws_.clear();
  for (std::size_t b = 0; b < train_batch_.size(); ++b)
    draws_.push_back(search::GumbelDraw::sample(policy_.k(), policy_.n(), rng_));
}

ad::Tensor PoseSearchProblem::train_loss() {
  search::ApplyOptions opts;
  opts.hard_forward = config_.policy.hard_forward;
  ad::Tensor total;
  for (std::size_t b = 0; b < train_batch_.size(); ++b) {
    const aug::Sample augmented = search::apply_policy(train_[train_batch_[b]].sample, policy_, draws_[b], opts);
    const ad::Tensor l = sample_training_loss(model_, augmented, config_);
    total = total.defined() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(train_batch_.size()));
}

ad::Tensor PoseSearchProblem::val_loss() {
  const bool ohkm = config_.search.val_loss == "ohkm";
  ad::Tensor total;
  for (std::size_t i : val_batch_) {
    const ad::Tensor l = sample_val_loss(model_, val_[i].sample, config_, ohkm);
    total = total.defined() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(val_batch_.size()));
}

}  // namespace p2aug::app
