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
#include <optional>
#include <vector>

#include "p2aug/app/config.hpp"
#include "p2aug/net/p2net.hpp"
#include "p2aug/pose/heatmaps.hpp"
#include "p2aug/pose/scene.hpp"
#include "p2aug/search/bilevel.hpp"
#include "p2aug/search/policy.hpp"

namespace p2aug::app {

/// Independent random streams, seeded with mix_seed(config.seed, stream).
enum Stream : std::uint64_t { kModelStream = 1, kPolicyStream = 2, kSearchStream = 3, kOrderStream = 4, kAugStream = 5 };

/// Heatmap geometry used by the model: stride 4 (C2) and the configured target sigma.
pose::HeatmapGeometry heatmap_geometry(const ExperimentConfig& config);

/// Target maps for a (possibly augmented) sample at the model's output resolution.
ad::Tensor targets_for(const aug::Sample& sample, const pose::HeatmapGeometry& geometry);

/// l2 on stage 1 plus the hard-keypoint loss on stage 2.
ad::Tensor sample_training_loss(const net::P2Net& model, const aug::Sample& sample, const ExperimentConfig& config);

/// Loss on the refined maps only: plain l2, or the hard-keypoint loss when `ohkm`.
ad::Tensor sample_val_loss(const net::P2Net& model, const aug::Sample& sample, const ExperimentConfig& config,
                           bool ohkm = false);

struct EvalResult {
  std::size_t samples = 0;
  pose::PckCount pck;
  double mean_val_loss = 0.0;  // refined-map l2, averaged over samples
};

/// Flip-averaged (optional) and blurred refined maps, quarter-shift decoding, PCK.
EvalResult evaluate(const net::P2Net& model, const std::vector<pose::SceneSample>& samples,
                    const ExperimentConfig& config, bool flip);

/// Initial policy for a search: uniform pi, gate probabilities 0.5, kinds drawn from the
/// configured operations and magnitudes uniform in [0, 1], drawn from kPolicyStream.
search::Policy initial_policy(const ExperimentConfig& config);

/// Throws ValueError when the policy uses an operation outside config.policy.ops.
void check_policy_compatible(const search::Policy& policy, const ExperimentConfig& config);

/// Bilevel view of the pose task: omega = P2Net weights, d = policy parameters.
/// L_train averages the training loss over a batch of relaxed-augmented training samples;
/// L_val averages the validation loss over clean validation samples. Batches and noise are
/// redrawn only by next_batch().
class PoseSearchProblem final : public search::BilevelProblem {
 public:
  PoseSearchProblem(net::P2Net& model, search::Policy& policy, const std::vector<pose::SceneSample>& train,
                    const std::vector<pose::SceneSample>& val, const ExperimentConfig& config, std::uint64_t seed);

  void next_batch();

  std::vector<ad::Tensor> model_parameters() override { return model_.parameters().tensors(); }
  std::vector<ad::Tensor> policy_parameters() override { return policy_.parameters(); }
  ad::Tensor train_loss() override;
  ad::Tensor val_loss() override;
  void project_policy() override { policy_.project(); }

 private:
  net::P2Net& model_;
  search::Policy& policy_;
  const std::vector<pose::SceneSample>& train_;
  const std::vector<pose::SceneSample>& val_;
  const ExperimentConfig& config_;
  Rng rng_;
  std::vector<std::size_t> train_batch_, val_batch_;
  std::vector<search::GumbelDraw> draws_;
};

}  // namespace p2aug::app
