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

#include "p2aug/pose/heatmaps.hpp"

#include <algorithm>
#include <cmath>

#include "p2aug/error.hpp"

namespace p2aug::pose {
namespace {

void require_maps(const ad::Tensor& maps, const char* what) {
  if (!maps.defined() || maps.rank() != 3) throw ShapeError(std::string(what) + ": expected J x h x w maps");
}

}  // namespace

ad::Tensor render_heatmaps(std::span<const aug::Keypoint> keypoints, std::size_t map_width, std::size_t map_height,
                           const HeatmapGeometry& geometry) {
  if (!(geometry.sigma > 0.0) || geometry.stride == 0) throw ValueError("render_heatmaps: bad geometry");
  const std::size_t plane = map_width * map_height;
  std::vector<double> v(keypoints.size() * plane, 0.0);
  const double inv = 1.0 / (2.0 * geometry.sigma * geometry.sigma);
  for (std::size_t j = 0; j < keypoints.size(); ++j) {
    if (!keypoints[j].visible) continue;
    const double u = geometry.to_cell(keypoints[j].x), w = geometry.to_cell(keypoints[j].y);
    double* out = v.data() + j * plane;
    for (std::size_t r = 0; r < map_height; ++r)
      for (std::size_t c = 0; c < map_width; ++c) {
        const double dx = static_cast<double>(c) - u, dy = static_cast<double>(r) - w;
        out[r * map_width + c] = std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  return ad::Tensor({keypoints.size(), map_height, map_width}, std::move(v));
}

std::vector<bool> visibility(std::span<const aug::Keypoint> keypoints) {
  std::vector<bool> v(keypoints.size());
  for (std::size_t j = 0; j < keypoints.size(); ++j) v[j] = keypoints[j].visible;
  return v;
}

std::vector<DecodedKeypoint> decode_cells(const ad::Tensor& maps) {
  require_maps(maps, "decode_keypoints");
  const std::size_t joints = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  if (h == 0 || w == 0) throw ShapeError("decode_keypoints: empty maps");
  const auto data = maps.data();
  std::vector<DecodedKeypoint> out(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    const auto m = data.subspan(j * h * w, h * w);
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    DecodedKeypoint& d = out[j];
    if (*lo == *hi) {
      d.x = (static_cast<double>(w) - 1.0) / 2.0;
      d.y = (static_cast<double>(h) - 1.0) / 2.0;
      d.score = *hi;
      d.empty = true;
      continue;
    }
    const std::size_t at = static_cast<std::size_t>(hi - m.begin());
    const std::size_t r = at / w, c = at % w;
    d.x = static_cast<double>(c);
    d.y = static_cast<double>(r);
    d.score = *hi;

    // Neighbours in (dx, dy) order: left, right, up, down.
    const int offs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    double best = -INFINITY;
    int best_k = -1;
    bool tie = false;
    for (int k = 0; k < 4; ++k) {
      const long nc = static_cast<long>(c) + offs[k][0], nr = static_cast<long>(r) + offs[k][1];
      if (nc < 0 || nr < 0 || nc >= static_cast<long>(w) || nr >= static_cast<long>(h)) continue;
      const double v = m[static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc)];
      if (v > best) {
        best = v;
        best_k = k;
        tie = false;
      } else if (v == best) {
        tie = true;
      }
    }
    if (best_k >= 0 && !tie) {
      d.x += 0.25 * offs[best_k][0];
      d.y += 0.25 * offs[best_k][1];
    }
  }
  return out;
}

std::vector<DecodedKeypoint> decode_keypoints(const ad::Tensor& maps, const HeatmapGeometry& geometry) {
  std::vector<DecodedKeypoint> out = decode_cells(maps);
  for (DecodedKeypoint& d : out) {
    d.x = geometry.to_image(d.x);
    d.y = geometry.to_image(d.y);
  }
  return out;
}

ad::Tensor gaussian_blur(const ad::Tensor& maps, double sigma) {
  require_maps(maps, "gaussian_blur");
  if (!(sigma >= 0.0)) throw ValueError("gaussian_blur: sigma must be non-negative");
  if (sigma < 1e-6) return maps.detach();
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (long i = -radius; i <= radius; ++i)
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  double total = 0.0;
  for (double k : kernel) total += k;
  for (double& k : kernel) k /= total;

  const std::size_t joints = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  const auto src = maps.data();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (std::size_t j = 0; j < joints; ++j) {
    const std::size_t base = j * h * w;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          const long cc = static_cast<long>(c) + i;
          if (cc >= 0 && cc < static_cast<long>(w)) acc += kernel[i + radius] * src[base + r * w + cc];
        }
        tmp[base + r * w + c] = acc;
      }
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          const long rr = static_cast<long>(r) + i;
          if (rr >= 0 && rr < static_cast<long>(h)) acc += kernel[i + radius] * tmp[base + rr * w + c];
        }
        out[base + r * w + c] = acc;
      }
  }
  return ad::Tensor(maps.shape(), std::move(out));
}

ad::Tensor smooth_and_flip_average(const ad::Tensor& maps, const ad::Tensor& flipped_maps,
                                   std::span<const std::pair<std::size_t, std::size_t>> flip_pairs, double sigma) {
  require_maps(maps, "smooth_and_flip_average");
  require_maps(flipped_maps, "smooth_and_flip_average");
  if (maps.shape() != flipped_maps.shape()) throw ShapeError("smooth_and_flip_average: map sets differ in shape");
  const std::size_t joints = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  std::vector<std::size_t> partner(joints);
  for (std::size_t j = 0; j < joints; ++j) partner[j] = j;
  std::vector<bool> used(joints, false);
  for (const auto& [a, b] : flip_pairs) {
    if (a >= joints || b >= joints || a == b || used[a] || used[b]) {
      throw ValueError("smooth_and_flip_average: malformed flip pair (" + std::to_string(a) + ", " +
                       std::to_string(b) + ")");
    }
    used[a] = used[b] = true;
    partner[a] = b;
    partner[b] = a;
  }
  const ad::Tensor s = gaussian_blur(maps, sigma);
  const ad::Tensor f = gaussian_blur(flipped_maps, sigma);
  const auto sv = s.data(), fv = f.data();
  std::vector<double> out(sv.size());
  for (std::size_t j = 0; j < joints; ++j) {
    const std::size_t src = partner[j];
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const double mirrored = fv[(src * h + r) * w + (w - 1 - c)];
        out[(j * h + r) * w + c] = 0.5 * (sv[(j * h + r) * w + c] + mirrored);
      }
  }
  return ad::Tensor(maps.shape(), std::move(out));
}

PckCount pck_count(std::span<const DecodedKeypoint> decoded, std::span<const aug::Keypoint> truth, double scale,
                   double threshold_fraction) {
  if (decoded.size() != truth.size()) throw ShapeError("pck: keypoint counts differ");
  if (!(scale > 0.0) || !(threshold_fraction >= 0.0)) throw ValueError("pck: scale and threshold must be positive");
  const double limit = threshold_fraction * scale;
  PckCount count;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (!truth[j].visible) continue;
    ++count.visible;
    if (std::hypot(decoded[j].x - truth[j].x, decoded[j].y - truth[j].y) <= limit) ++count.hits;
  }
  return count;
}

std::optional<double> pck(std::span<const DecodedKeypoint> decoded, std::span<const aug::Keypoint> truth, double scale,
                          double threshold_fraction) {
  return pck_count(decoded, truth, scale, threshold_fraction).value();
}

}  // namespace p2aug::pose
