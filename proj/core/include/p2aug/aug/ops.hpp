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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tensor.hpp"

namespace p2aug::aug {

enum class AugOpKind { ShearX, ShearY, TranslateX, TranslateY, Rotate, FlipHorizontal, Brightness, Contrast, Scale };

inline constexpr std::array<AugOpKind, 9> kAllKinds = {
    AugOpKind::ShearX,         AugOpKind::ShearY,     AugOpKind::TranslateX,
    AugOpKind::TranslateY,     AugOpKind::Rotate,     AugOpKind::FlipHorizontal,
    AugOpKind::Brightness,     AugOpKind::Contrast,   AugOpKind::Scale};

/// Natural magnitude range and differentiability of one operation. Magnitudes are
/// stored normalized, m in [0, 1]; the natural value is min + m * (max - min).
///   shear: horizontal/vertical shear factor
///   translate: fraction of the image extent
///   rotate: degrees
///   brightness: additive offset
///   contrast: gain about the image mean
///   scale: zoom factor about the image center
struct AugOpInfo {
  std::string_view name;
  double min;
  double max;
  bool geometric;
  bool magnitude_differentiable;
};

const AugOpInfo& info(AugOpKind kind);
std::string_view name(AugOpKind kind);
std::optional<AugOpKind> parse_kind(std::string_view name);
double natural_value(AugOpKind kind, double m);

/// Row-major 2x3 matrix mapping output pixel coordinates (col, row) to input coordinates.
using Affine = std::array<double, 6>;

/// Canonical matrix of a geometric operation, composed about the image center
/// ((width - 1) / 2, (height - 1) / 2). Throws ValueError for photometric kinds.
Affine affine_of(AugOpKind kind, double natural, std::size_t width, std::size_t height);
/// d affine_of / d natural.
Affine affine_derivative(AugOpKind kind, double natural, std::size_t width, std::size_t height);
/// Matrix of the map p -> a(b(p)).
Affine compose(const Affine& a, const Affine& b);
Affine invert(const Affine& a);
std::pair<double, double> transform_point(const Affine& a, double x, double y);

struct Keypoint {
  double x = 0.0;  // column, continuous pixel coordinates
  double y = 0.0;  // row
  bool visible = true;
};

struct Sample {
  ad::Tensor image;  // C x H x W, values in [0, 1]
  std::vector<Keypoint> keypoints;
  std::string id;
  /// Keypoint index permutation applied by a horizontal flip (left/right swap). Empty
  /// means identity.
  std::vector<std::size_t> flip_permutation;

  std::size_t width() const { return image.dim(2); }
  std::size_t height() const { return image.dim(1); }
};

/// Throws ValueError unless m is a single value inside [0, 1].
void validate_magnitude(const ad::Tensor& m);

/// affine_of as a 2x3 tensor that is differentiable with respect to the normalized
/// magnitude m (constant for FlipHorizontal).
ad::Tensor affine_tensor(AugOpKind kind, const ad::Tensor& m, std::size_t width, std::size_t height);

/// Warps the image by the op's affine (zero fill) and maps keypoints through its inverse;
/// keypoints leaving the frame become invisible. FlipHorizontal also applies the
/// sample's flip permutation.
Sample apply_geometric(const Sample& sample, AugOpKind kind, const ad::Tensor& m,
                       ad::Interpolation interpolation = ad::Interpolation::Bilinear);

/// Brightness: x + delta(m). Contrast: mean + gamma(m) * (x - mean). Clamped to [0, 1];
/// keypoints untouched.
Sample apply_photometric(const Sample& sample, AugOpKind kind, const ad::Tensor& m);

/// Dispatches on the kind's family.
Sample apply_op(const Sample& sample, AugOpKind kind, const ad::Tensor& m);

}  // namespace p2aug::aug
