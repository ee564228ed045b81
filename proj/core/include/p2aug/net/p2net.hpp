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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "p2aug/net/blocks.hpp"

namespace p2aug::net {

struct P2NetConfig {
  std::size_t in_channels = 1;
  std::array<std::size_t, 4> widths{16, 32, 64, 128};
  std::size_t blocks_per_stage = 1;
  std::size_t joints = 5;
};

/// Backbone, preparation convs, parallel then progressive fusion, and the two-stage
/// refinement head. Heatmaps come out at stride 4.
class P2Net {
 public:
  P2Net(const P2NetConfig& config, std::uint64_t seed);

  const P2NetConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  Pyramid features(const ad::Tensor& image) const;
  HeatmapPair forward(const ad::Tensor& image) const;

  Backbone& backbone() { return *backbone_; }
  ParallelFusion& parallel_fusion() { return *parallel_; }
  ProgressiveFusion& progressive_fusion() { return *progressive_; }
  RefinementHead& head() { return *head_; }

 private:
  P2NetConfig config_;
  ParameterSet params_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<Preparation> preparation_;
  std::unique_ptr<ParallelFusion> parallel_;
  std::unique_ptr<ProgressiveFusion> progressive_;
  std::unique_ptr<RefinementHead> head_;
};

/// Mean over visible keypoints of the per-keypoint mean squared error. Returns 0 with a
/// warning when nothing is visible.
ad::Tensor l2_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& visible);

/// Mean of the `alpha` largest per-keypoint errors among visible keypoints. Ties keep
/// the lower index; alpha >= visible count reduces to l2_loss exactly.
ad::Tensor ohkm_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& visible,
                     std::size_t alpha);

/// l2(stage1) + ohkm(stage2).
ad::Tensor training_loss(const HeatmapPair& out, const ad::Tensor& target, const std::vector<bool>& visible,
                         std::size_t alpha);

/// Binary checkpoint: "P2AUGCKP", u32 version, u64 count, then per parameter the name,
/// rank, extents and raw little-endian doubles.
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
/// Loads into an existing parameter set; names and shapes must match.
void load_checkpoint(ParameterSet& params, const std::filesystem::path& path);

}  // namespace p2aug::net
