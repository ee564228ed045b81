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
#include <span>
#include <vector>

#include "p2aug/ad/tensor.hpp"

namespace p2aug::ad {

// Elementwise ----------------------------------------------------------------

enum class Elementwise { Add, Sub, Mul, Scale, Exp, Log, Sigmoid, Relu, Negate };

/// Elementwise kernel. Binary kinds (Add, Sub, Mul) take `b` and broadcast a scalar
/// operand; Scale multiplies by the constant `factor`; the rest are unary.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b = nullptr, double factor = 1.0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor neg(const Tensor& a);
/// Values outside [lo, hi] are clipped and pass no gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Reductions and indexing -----------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);
/// Element i of a as a single-element tensor.
Tensor select(const Tensor& a, std::size_t index);
/// Elements at `indices`, in that order, as a rank-1 tensor.
Tensor gather(const Tensor& a, std::span<const std::size_t> indices);
/// Numerically stable softmax / log-softmax over all elements of a rank-1 tensor.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// Linear algebra and image operators ------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};

/// x: C_in x H x W, weight: C_out x C_in x kh x kw, bias: C_out or undefined. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions options = {});

enum class UpsampleMode { Nearest, Bilinear };

/// Doubles H and W. Bilinear follows the align-corners-false sample grid.
Tensor upsample2x(const Tensor& x, UpsampleMode mode);
/// 2x2 average pooling; H and W must be even.
Tensor downsample2x(const Tensor& x);
/// Per-channel mean, C x 1 x 1.
Tensor global_avg_pool(const Tensor& x);
/// Per-channel mean as a rank-1 tensor of length C.
Tensor channel_mean(const Tensor& x);
Tensor concat_channels(std::span<const Tensor> xs);
/// x (C x H x W) times a per-channel weight with C elements.
Tensor scale_channels(const Tensor& x, const Tensor& weights);
/// Mirrors columns of a rank-3 tensor.
Tensor flip_horizontal(const Tensor& x);

enum class Interpolation { Nearest, Bilinear };

/// Resamples x (C x H x W) at A * (col, row, 1) for every output pixel, with zero fill
/// outside the input. `affine` is a 2x3 tensor mapping output pixel coordinates to input
/// coordinates; its gradient is produced for Bilinear only.
Tensor warp_affine(const Tensor& x, const Tensor& affine, Interpolation mode = Interpolation::Bilinear);

}  // namespace p2aug::ad
