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

#include "p2aug/net/blocks.hpp"

#include "p2aug/error.hpp"

namespace p2aug::net {
namespace {

constexpr double kHeadInitScale = 0.01;

std::string child(const std::string& name, const std::string& part) { return name + "." + part; }

void require_channels(const ad::Tensor& x, std::size_t channels, const char* block) {
  if (x.rank() != 3 || x.dim(0) != channels) {
    throw ShapeError(std::string(block) + ": expected " + std::to_string(channels) + " channels, got " +
                     ad::to_string(x.shape()));
  }
}

}  // namespace

void Pyramid::validate() const {
  for (std::size_t l = 0; l < 4; ++l) {
    if (!level[l].defined() || level[l].rank() != 3) throw ShapeError("pyramid level C" + std::to_string(l + 2) + " missing");
  }
  for (std::size_t l = 1; l < 4; ++l) {
    if (level[l].dim(1) * 2 != level[l - 1].dim(1) || level[l].dim(2) * 2 != level[l - 1].dim(2)) {
      throw ShapeError("pyramid level C" + std::to_string(l + 2) + " is not half of C" + std::to_string(l + 1));
    }
  }
}

ResidualBlock::ResidualBlock(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng)
    : conv1(conv3x3(params, child(name, "conv1"), channels, channels, rng)),
      conv2(conv3x3(params, child(name, "conv2"), channels, channels, rng)) {}

ad::Tensor ResidualBlock::operator()(const ad::Tensor& x) const {
  return ad::relu(ad::add(conv2(ad::relu(conv1(x))), x));
}

DilatedBottleneck::DilatedBottleneck(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng)
    : reduce(conv1x1(params, child(name, "reduce"), channels, std::max<std::size_t>(1, channels / 2), rng)),
      dilated(conv3x3(params, child(name, "dilated"), reduce.out_channels(), reduce.out_channels(), rng, 1, 2)),
      expand(conv1x1(params, child(name, "expand"), reduce.out_channels(), channels, rng)) {}

ad::Tensor DilatedBottleneck::operator()(const ad::Tensor& x) const {
  require_channels(x, channels(), "dilated bottleneck");
  return ad::add(expand(ad::relu(dilated(ad::relu(reduce(x))))), x);
}

AttentionModule::AttentionModule(ParameterSet& params, const std::string& name, std::size_t channels, Rng& rng)
    : fc(conv1x1(params, child(name, "fc"), channels, channels, rng)) {}

ad::Tensor AttentionModule::weights(const ad::Tensor& x) const {
  require_channels(x, fc.in_channels(), "attention");
  return ad::sigmoid(fc(ad::global_avg_pool(x)));
}

ad::Tensor AttentionModule::operator()(const ad::Tensor& x) const { return ad::scale_channels(x, weights(x)); }

Backbone::Backbone(ParameterSet& params, const std::string& name, std::size_t in_channels,
                   const std::array<std::size_t, 4>& widths, std::size_t blocks_per_stage, Rng& rng)
    : stem1(conv3x3(params, child(name, "stem1"), in_channels, widths[0], rng, 2)),
      stem2(conv3x3(params, child(name, "stem2"), widths[0], widths[0], rng, 2)) {
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string stage = child(name, "stage" + std::to_string(s + 2));
    if (s > 0) down[s - 1] = conv3x3(params, child(stage, "down"), widths[s - 1], widths[s], rng, 2);
    for (std::size_t b = 0; b < blocks_per_stage; ++b) {
      stages[s].emplace_back(params, child(stage, "block" + std::to_string(b)), widths[s], rng);
    }
  }
}

Pyramid Backbone::operator()(const ad::Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) % 32 != 0 || x.dim(2) % 32 != 0) {
    throw ShapeError("backbone input must be C x H x W with H, W divisible by 32, got " + ad::to_string(x.shape()));
  }
  Pyramid p;
  ad::Tensor h = ad::relu(stem2(ad::relu(stem1(x))));
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) h = ad::relu(down[s - 1](h));
    for (const ResidualBlock& b : stages[s]) h = b(h);
    p.level[s] = h;
  }
  return p;
}

Preparation::Preparation(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths,
                         Rng& rng) {
  for (std::size_t i = 0; i < 2; ++i) {
    c2[i] = conv3x3(params, child(name, "c2.conv" + std::to_string(i)), widths[0], widths[0], rng);
    c3[i] = conv3x3(params, child(name, "c3.conv" + std::to_string(i)), widths[1], widths[1], rng);
  }
}

Pyramid Preparation::operator()(const Pyramid& p) const {
  Pyramid out = p;
  out.level[0] = ad::relu(c2[1](ad::relu(c2[0](p.level[0]))));
  out.level[1] = ad::relu(c3[1](ad::relu(c3[0](p.level[1]))));
  return out;
}

ParallelFusion::ParallelFusion(ParameterSet& params, const std::string& name, const std::array<std::size_t, 4>& widths,
                               Rng& rng) {
  for (std::size_t t = 0; t < 3; ++t) {
    const std::string target = child(name, "to_c" + std::to_string(t + 2));
    for (std::size_t s = 0; s < 4; ++s) {
      branch[t][s] = conv1x1(params, child(target, "from_c" + std::to_string(s + 2)), widths[s], widths[t], rng);
    }
    merge[t] = conv1x1(params, child(target, "merge"), widths[t], widths[t], rng);
  }
}

Pyramid ParallelFusion::operator()(const Pyramid& p) const {
  p.validate();
  Pyramid out = p;
  for (std::size_t t = 0; t < 3; ++t) {
    ad::Tensor acc;
    for (std::size_t s = 0; s < 4; ++s) {
      ad::Tensor term = branch[t][s](resample_levels(p.level[s], static_cast<int>(s), static_cast<int>(t)));
      acc = acc.defined() ? ad::add(acc, term) : term;
    }
    out.level[t] = ad::add(p.level[t], merge[t](acc));
  }
  return out;
}

void ParallelFusion::zero() {
  for (auto& row : branch)
    for (Conv2d& c : row) c.zero();
  for (Conv2d& c : merge) c.zero();
}

ProgressiveFusion::ProgressiveFusion(ParameterSet& params, const std::string& name,
                                     const std::array<std::size_t, 4>& widths, Rng& rng) {
  for (std::size_t t = 0; t < 3; ++t) {
    lateral[t] = conv1x1(params, child(name, "into_c" + std::to_string(t + 2)), widths[t + 1], widths[t], rng);
  }
}

Pyramid ProgressiveFusion::operator()(const Pyramid& p) const {
  p.validate();
  Pyramid out = p;
  for (int t = 2; t >= 0; --t) {
    const ad::Tensor up = ad::upsample2x(out.level[t + 1], ad::UpsampleMode::Bilinear);
    out.level[t] = ad::add(p.level[t], lateral[t](up));
  }
  return out;
}

void ProgressiveFusion::zero() {
  for (Conv2d& c : lateral) c.zero();
}

RefinementHead::RefinementHead(ParameterSet& params, const std::string& name,
                               const std::array<std::size_t, 4>& widths, std::size_t joints, Rng& rng)
    : stage1_head(conv1x1(params, child(name, "stage1_head"), widths[0], joints, rng)),
      final_bottleneck(params, child(name, "final_bottleneck"), widths[0] + widths[1] + widths[2] + widths[3], rng),
      stage2_head(conv1x1(params, child(name, "stage2_head"), final_bottleneck.channels(), joints, rng)) {
  // Start the heatmaps near zero, where almost all of every target is.
  stage1_head.scale_weights(kHeadInitScale);
  stage2_head.scale_weights(kHeadInitScale);
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string level = child(name, "c" + std::to_string(l + 2));
    level_bottleneck.emplace_back(params, child(level, "bottleneck"), widths[l], rng);
    level_attention.emplace_back(params, child(level, "attention"), widths[l], rng);
  }
}

HeatmapPair RefinementHead::operator()(const Pyramid& p) const {
  p.validate();
  HeatmapPair out;
  out.stage1 = stage1_head(p.level[0]);
  std::vector<ad::Tensor> parts;
  for (std::size_t l = 0; l < 4; ++l) {
    ad::Tensor h = level_attention[l](level_bottleneck[l](p.level[l]));
    parts.push_back(resample_levels(h, static_cast<int>(l), 0));
  }
  out.stage2 = stage2_head(final_bottleneck(ad::concat_channels(parts)));
  return out;
}

}  // namespace p2aug::net
