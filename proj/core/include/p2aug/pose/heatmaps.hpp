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
#include <span>
#include <utility>
#include <vector>

#include "p2aug/ad/tensor.hpp"
#include "p2aug/aug/ops.hpp"

namespace p2aug::pose {

/// Image <-> heatmap mapping. Heatmap cell u covers image pixels [stride*u, stride*u + stride),
/// so its centre sits at x_img = stride * u + offset with offset = (stride - 1) / 2. With that
/// offset a horizontal image flip is an exact grid mirror of the heatmap.
struct HeatmapGeometry {
  std::size_t stride = 4;
  double sigma = 1.0;  // target Gaussian std, in cells

  double offset() const { return (static_cast<double>(stride) - 1.0) / 2.0; }
  double to_cell(double image_coord) const { return (image_coord - offset()) / static_cast<double>(stride); }
  double to_image(double cell_coord) const { return cell_coord * static_cast<double>(stride) + offset(); }
};

/// J x h x w target maps: exp(-d^2 / (2 sigma^2)) around each visible keypoint, all-zero for
/// invisible ones.
ad::Tensor render_heatmaps(std::span<const aug::Keypoint> keypoints, std::size_t map_width, std::size_t map_height,
                           const HeatmapGeometry& geometry = {});

/// Per-channel visibility mask, the form the losses take.
std::vector<bool> visibility(std::span<const aug::Keypoint> keypoints);

struct DecodedKeypoint {
  double x = 0.0;  // column
  double y = 0.0;  // row
  double score = 0.0;
  bool empty = false;  // flat map: no peak, centre returned
};

/// Argmax of each channel of a J x h x w map, moved a quarter cell toward the largest of
/// its 4-neighbours. Ties among the largest neighbours leave the peak in place. A flat
/// channel decodes to the map centre with `empty` set. Coordinates are in cells.
std::vector<DecodedKeypoint> decode_cells(const ad::Tensor& maps);

/// decode_cells mapped to image coordinates.
std::vector<DecodedKeypoint> decode_keypoints(const ad::Tensor& maps, const HeatmapGeometry& geometry = {});

/// Separable Gaussian blur of every channel (zero padding, kernel radius ceil(3 sigma),
/// renormalized). sigma below 1e-6 returns the input.
ad::Tensor gaussian_blur(const ad::Tensor& maps, double sigma);

/// Blurs both sets, mirrors `flipped_maps` back, swaps the channels of each pair and
/// averages with `maps`. Throws ValueError for out-of-range or repeated pair indices.
ad::Tensor smooth_and_flip_average(const ad::Tensor& maps, const ad::Tensor& flipped_maps,
                                   std::span<const std::pair<std::size_t, std::size_t>> flip_pairs,
                                   double sigma = 1.0);

struct PckCount {
  std::size_t hits = 0;
  std::size_t visible = 0;

  PckCount& operator+=(const PckCount& o) {
    hits += o.hits;
    visible += o.visible;
    return *this;
  }
  std::optional<double> value() const {
    if (visible == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(visible);
  }
};

/// Counts visible ground-truth keypoints whose prediction lies within
/// threshold_fraction * scale (Euclidean, image pixels).
PckCount pck_count(std::span<const DecodedKeypoint> decoded, std::span<const aug::Keypoint> truth, double scale,
                   double threshold_fraction = 0.5);

/// Fraction form of pck_count; absent when no keypoint is visible.
std::optional<double> pck(std::span<const DecodedKeypoint> decoded, std::span<const aug::Keypoint> truth, double scale,
                          double threshold_fraction = 0.5);

}  // namespace p2aug::pose
