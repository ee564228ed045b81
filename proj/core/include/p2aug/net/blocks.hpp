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
#include <cstddef>
#include <string>
#include <vector>

#include "p2aug/net/layers.hpp"

namespace p2aug::net {

/// Feature pyramid C2..C5 at strides 4, 8, 16, 32.
struct Pyramid {
  std::array<ad::Tensor, 4> level;

  ad::Tensor& c2() { return level[0]; }
  ad::Tensor& c3() { return level[1]; }
  ad::Tensor& c4() { return level[2]; }
  ad::Tensor& c5() { return level[3]; }
  const ad::Tensor& c2() const { return level[0]; }

  /// Throws ShapeError unless every level has half the extent of the previous one.
  void validate() const;
};

/// conv3x3 -> relu -> conv3x3, plus identity, then relu.
struct ResidualBlock {
  Conv2d conv1, conv2;

  ResidualBlock(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
};

/// 1x1 reduce to C/2 -> relu -> 3x3 dilation 2 -> relu -> 1x1 expand, plus identity.
struct DilatedBottleneck {
  Conv2d reduce, dilated, expand;

  DilatedBottleneck(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
  std::size_t channels() const { return expand.out_channels(); }
};

/// x * sigmoid(conv1x1(global_avg_pool(x))), one weight per channel.
struct AttentionModule {
  Conv2d fc;

  AttentionModule(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng);
  ad::Tensor weights(const ad::Tensor& x) const;
  ad::Tensor operator()(const ad::Tensor& x) const;
};

/// Scaled-down residual backbone: two stride-2 3x3 convs to stride 4, then four stages
/// (the first at stride 4, each later one opened by a stride-2 conv).
struct Backbone {
  Conv2d stem1, stem2;
  std::array<Conv2d, 3> down;
  std::array<std::vector<ResidualBlock>, 4> stages;

  Backbone(ParameterSet& params, const std::string& name, std::size_t in_channels,
           const std::array<std::size_t, 4>& widths, std::size_t blocks_per_stage, Rng& rng);
  /// x: C x H x W with H and W divisible by 32.
  Pyramid operator()(const ad::Tensor& x) const;
};

/// Two 3x3 convs on C2 and on C3 ahead of fusion.
struct Preparation {
  std::array<Conv2d, 2> c2, c3;

  Preparation(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths, Rng& rng);
  Pyramid operator()(const Pyramid& p) const;
};

/// For each target C2..C4: every level is resampled to the target resolution, mapped by
/// a 1x1 conv to the target width, summed, passed through a final 1x1 conv and added back
/// to the target. C5 is passed through.
struct ParallelFusion {
  std::array<std::array<Conv2d, 4>, 3> branch;  // [target][source]
  std::array<Conv2d, 3> merge;

  ParallelFusion(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths, Rng& rng);
  Pyramid operator()(const Pyramid& p) const;
  void zero();
};

/// Top-down: f5 = c5, f_l = c_l + conv1x1(upsample2x(f_{l+1})).
struct ProgressiveFusion {
  std::array<Conv2d, 3> lateral;  // into C2, C3, C4

  ProgressiveFusion(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths,
                    Rng& rng);
  Pyramid operator()(const Pyramid& p) const;
  void zero();
};

struct HeatmapPair {
  ad::Tensor stage1;  // J x h x w from fused C2
  ad::Tensor stage2;  // J x h x w refined
};

/// Stage 1: 1x1 head on fused C2. Stage 2: bottleneck + attention per level, C3..C5
/// upsampled to C2, concatenated, final bottleneck and 1x1 head.
struct RefinementHead {
  Conv2d stage1_head;
  std::vector<DilatedBottleneck> level_bottleneck;
  std::vector<AttentionModule> level_attention;
  DilatedBottleneck final_bottleneck;
  Conv2d stage2_head;

  RefinementHead(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths,
                 std::size_t joints, Rng& rng);
  HeatmapPair operator()(const Pyramid& p) const;
};

}  // namespace p2aug::net
