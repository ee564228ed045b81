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
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "p2aug/aug/ops.hpp"
#include "p2aug/net/p2net.hpp"
#include "p2aug/pose/dataset.hpp"

namespace p2aug::app {

enum class Task { Pose, QuadraticToy };

struct DataConfig {
  /// Dataset directory; relative paths resolve against the output directory.
  std::string dir = "data";
  pose::DatasetSpec spec;  // spec.scene.seed is always the experiment seed
};

struct ModelConfig {
  std::array<std::size_t, 4> widths{16, 32, 64, 128};
  std::size_t blocks_per_stage = 1;
  /// Keypoints kept by the hard-keypoint loss on the refined heatmaps.
  std::size_t ohkm_alpha = 3;
  double target_sigma = 1.0;  // heatmap cells
};

struct PolicyConfig {
  std::size_t k = 8;
  std::size_t n = 2;
  double tau1 = 1.0;
  double tau2 = 1.0;
  /// Linear temperature anneal over the search to anneal_to; off by default.
  bool anneal = false;
  double anneal_to = 0.1;
  /// Evaluate only the heaviest sub-policy during search (soft weights still get gradients).
  bool hard_forward = false;
  /// Operation kinds a policy may use; searched policies draw from these and trained
  /// policies are checked against them.
  std::vector<aug::AugOpKind> ops{aug::kAllKinds.begin(), aug::kAllKinds.end()};
};

struct SearchConfig {
  std::size_t steps = 500;
  std::size_t train_batch = 4;
  std::size_t val_batch = 4;
  double zeta = 5e-4;
  double lr = 5e-4;  // omega, Adam
  double weight_decay = 1e-5;
  double policy_lr = 0.01;  // d, plain gradient descent
  /// Loss for L_val: "l2" or "ohkm".
  std::string val_loss = "l2";
  /// Every this many steps L_val and PCK are measured on `eval_samples` fixed validation
  /// samples; the best policy by that L_val is kept. 0 disables (last policy kept).
  std::size_t eval_every = 50;
  std::size_t eval_samples = 32;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 5e-4;
  double weight_decay = 1e-5;
  /// Periodic checkpoint interval; the final step is always checkpointed.
  std::size_t checkpoint_every = 1000;
  /// Train on the first `subset` training samples only (0 = all).
  std::size_t subset = 0;
  /// PolicyFile path; empty trains without augmentation. --policy overrides.
  std::string policy;
  /// Drop the learning rate by 10x for the last this fraction of steps (0 = constant).
  double lr_drop_fraction = 0.0;
};

struct EvalConfig {
  std::string split = "test";
  bool flip = true;
  double blur_sigma = 1.0;  // heatmap cells
  double pck_threshold = 0.5;
};

struct ToyConfig {
  double omega = 1.0;
  double d = 0.0;
  double omega_lr = 0.1;
  double d_lr = 0.5;
  double zeta = 0.1;
};

struct ExperimentConfig {
  Task task = Task::Pose;
  std::uint64_t seed = 0;
  bool wall_time = false;  // record wall-clock seconds in the metrics log
  DataConfig data;
  ModelConfig model;
  PolicyConfig policy;
  SearchConfig search;
  TrainConfig train;
  EvalConfig eval;
  ToyConfig toy;

  /// Throws ValueError naming the offending field.
  void validate() const;
  net::P2NetConfig net_config() const;
};

std::string_view task_name(Task task);

/// Parses a JSON document. Absent keys keep their defaults; unknown keys, wrong types
/// and invalid values throw FormatError with the key path.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field with its effective value; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& config);

}  // namespace p2aug::app
