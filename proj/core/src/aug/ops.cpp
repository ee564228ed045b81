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

#include "p2aug/aug/ops.hpp"

#include <cmath>
#include <numbers>

#include "p2aug/error.hpp"

namespace p2aug::aug {
namespace {

constexpr std::array<AugOpInfo, 9> kInfo = {{
    {"ShearX", -0.3, 0.3, true, true},
    {"ShearY", -0.3, 0.3, true, true},
    {"TranslateX", -0.15, 0.15, true, true},
    {"TranslateY", -0.15, 0.15, true, true},
    {"Rotate", -30.0, 30.0, true, true},
    {"FlipHorizontal", 0.0, 1.0, true, false},
    {"Brightness", -0.3, 0.3, false, true},
    {"Contrast", 0.5, 1.5, false, true},
    {"Scale", 0.7, 1.3, true, true},
}};

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

const AugOpInfo& info(AugOpKind kind) { return kInfo[static_cast<std::size_t>(kind)]; }

std::string_view name(AugOpKind kind) { return info(kind).name; }

std::optional<AugOpKind> parse_kind(std::string_view text) {
  for (AugOpKind k : kAllKinds)
    if (info(k).name == text) return k;
  return std::nullopt;
}

double natural_value(AugOpKind kind, double m) {
  const AugOpInfo& i = info(kind);
  return i.min + m * (i.max - i.min);
}

Affine affine_of(AugOpKind kind, double v, std::size_t width, std::size_t height) {
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  switch (kind) {
    case AugOpKind::ShearX:
      return {1, v, -v * cy, 0, 1, 0};
    case AugOpKind::ShearY:
      return {1, 0, 0, v, 1, -v * cx};
    case AugOpKind::TranslateX:
      return {1, 0, -v * static_cast<double>(width), 0, 1, 0};
    case AugOpKind::TranslateY:
      return {1, 0, 0, 0, 1, -v * static_cast<double>(height)};
    case AugOpKind::Rotate: {
      const double c = std::cos(v * kDegToRad), s = std::sin(v * kDegToRad);
      return {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy};
    }
    case AugOpKind::Scale: {
      if (!(v > 0.0)) throw ValueError("Scale factor must be positive");
      const double k = 1.0 / v;
      return {k, 0, cx * (1 - k), 0, k, cy * (1 - k)};
    }
    case AugOpKind::FlipHorizontal:
      return {-1, 0, static_cast<double>(width) - 1.0, 0, 1, 0};
    default:
      throw ValueError(std::string("affine_of: ") + std::string(name(kind)) + " is not a geometric operation");
  }
}

Affine affine_derivative(AugOpKind kind, double v, std::size_t width, std::size_t height) {
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  switch (kind) {
    case AugOpKind::ShearX:
      return {0, 1, -cy, 0, 0, 0};
    case AugOpKind::ShearY:
      return {0, 0, 0, 1, 0, -cx};
    case AugOpKind::TranslateX:
      return {0, 0, -static_cast<double>(width), 0, 0, 0};
    case AugOpKind::TranslateY:
      return {0, 0, 0, 0, 0, -static_cast<double>(height)};
    case AugOpKind::Rotate: {
      const double c = std::cos(v * kDegToRad), s = std::sin(v * kDegToRad);
      const double k = kDegToRad;
      return {-s * k, -c * k, (s * cx + c * cy) * k, c * k, -s * k, (-c * cx + s * cy) * k};
    }
    case AugOpKind::Scale: {
      const double dk = -1.0 / (v * v);
      return {dk, 0, -cx * dk, 0, dk, -cy * dk};
    }
    case AugOpKind::FlipHorizontal:
      return {0, 0, 0, 0, 0, 0};
    default:
      throw ValueError(std::string("affine_derivative: ") + std::string(name(kind)) +
                       " is not a geometric operation");
  }
}

Affine compose(const Affine& a, const Affine& b) {
  return {a[0] * b[0] + a[1] * b[3],        a[0] * b[1] + a[1] * b[4],        a[0] * b[2] + a[1] * b[5] + a[2],
          a[3] * b[0] + a[4] * b[3],        a[3] * b[1] + a[4] * b[4],        a[3] * b[2] + a[4] * b[5] + a[5]};
}

Affine invert(const Affine& a) {
  const double det = a[0] * a[4] - a[1] * a[3];
  if (std::abs(det) < 1e-15) throw ValueError("affine matrix is singular");
  const double i0 = a[4] / det, i1 = -a[1] / det, i3 = -a[3] / det, i4 = a[0] / det;
  return {i0, i1, -(i0 * a[2] + i1 * a[5]), i3, i4, -(i3 * a[2] + i4 * a[5])};
}

std::pair<double, double> transform_point(const Affine& a, double x, double y) {
  return {a[0] * x + a[1] * y + a[2], a[3] * x + a[4] * y + a[5]};
}

void validate_magnitude(const ad::Tensor& m) {
  if (!m.defined() || m.numel() != 1) throw ValueError("magnitude must be a single value");
  const double v = m.item();
  if (!(v >= 0.0 && v <= 1.0)) throw ValueError("magnitude " + std::to_string(v) + " outside [0, 1]");
}

ad::Tensor affine_tensor(AugOpKind kind, const ad::Tensor& m, std::size_t width, std::size_t height) {
  validate_magnitude(m);
  const AugOpInfo& i = info(kind);
  const double v = natural_value(kind, m.item());
  const Affine a = affine_of(kind, v, width, height);
  if (!i.magnitude_differentiable) return ad::Tensor(ad::Shape{2, 3}, std::vector<double>(a.begin(), a.end()));
  const Affine d = affine_derivative(kind, v, width, height);
  const double range = i.max - i.min;
  return ad::make_result(ad::Shape{2, 3}, std::vector<double>(a.begin(), a.end()), {m},
                         [d, range](std::span<const double> g, std::vector<std::span<double>>& gi) {
                           double acc = 0.0;
                           for (int k = 0; k < 6; ++k) acc += g[k] * d[k];
                           gi[0][0] += acc * range;
                         });
}

Sample apply_geometric(const Sample& sample, AugOpKind kind, const ad::Tensor& m, ad::Interpolation interpolation) {
  if (!info(kind).geometric) {
    throw ValueError(std::string("apply_geometric: ") + std::string(name(kind)) + " is photometric");
  }
  const std::size_t w = sample.width(), h = sample.height();
  ad::Tensor matrix = affine_tensor(kind, m, w, h);
  Affine a;
  std::copy(matrix.data().begin(), matrix.data().end(), a.begin());
  const Affine forward = invert(a);

  Sample out;
  out.id = sample.id;
  out.flip_permutation = sample.flip_permutation;
  out.image = ad::warp_affine(sample.image, matrix, interpolation);
  out.keypoints.resize(sample.keypoints.size());
  const double max_x = static_cast<double>(w) - 1.0, max_y = static_cast<double>(h) - 1.0;
  for (std::size_t j = 0; j < sample.keypoints.size(); ++j) {
    const Keypoint& kp = sample.keypoints[j];
    const auto [x, y] = transform_point(forward, kp.x, kp.y);
    const bool inside = x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y;
    std::size_t dst = j;
    if (kind == AugOpKind::FlipHorizontal && !sample.flip_permutation.empty()) dst = sample.flip_permutation[j];
    out.keypoints[dst] = {x, y, kp.visible && inside};
  }
  return out;
}

Sample apply_photometric(const Sample& sample, AugOpKind kind, const ad::Tensor& m) {
  validate_magnitude(m);
  Sample out;
  out.id = sample.id;
  out.flip_permutation = sample.flip_permutation;
  out.keypoints = sample.keypoints;
  const AugOpInfo& i = info(kind);
  const double range = i.max - i.min;
  // natural(m) = min + m * range, built on the tape so the gradient reaches m.
  ad::Tensor natural = ad::add_scalar(ad::scale(m, range), i.min);
  switch (kind) {
    case AugOpKind::Brightness:
      out.image = ad::clamp(ad::add(sample.image, natural), 0.0, 1.0);
      break;
    case AugOpKind::Contrast: {
      ad::Tensor mu = ad::mean(sample.image);
      out.image = ad::clamp(ad::add(ad::mul(ad::sub(sample.image, mu), natural), mu), 0.0, 1.0);
      break;
    }
    default:
      throw ValueError(std::string("apply_photometric: ") + std::string(name(kind)) + " is geometric");
  }
  return out;
}

Sample apply_op(const Sample& sample, AugOpKind kind, const ad::Tensor& m) {
  return info(kind).geometric ? apply_geometric(sample, kind, m) : apply_photometric(sample, kind, m);
}

}  // namespace p2aug::aug
