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

#include "p2aug/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "p2aug/error.hpp"

namespace p2aug::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// dst (+)= lhs * rhs. Eigen's blocked GEMM packs its operands and gives the same bits for
// any buffer address, but its matrix-vector and small coefficient-wise kernels peel to the
// first aligned element, so with AVX the summation order follows the heap layout. Those
// shapes take a fixed-order loop instead.
template <typename Lhs, typename Rhs>
void product_into(MapMat dst, const Lhs& lhs, const Rhs& rhs, bool accumulate) {
  const Eigen::Index m = dst.rows(), n = dst.cols(), k = lhs.cols();
  if (m > 1 && n > 1 && m + n + k >= EIGEN_GEMM_TO_COEFFBASED_THRESHOLD) {
    if (accumulate) {
      dst.noalias() += lhs * rhs;
    } else {
      dst.noalias() = lhs * rhs;
    }
    return;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index p = 0; p < k; ++p) s += lhs(i, p) * rhs(p, j);
      dst(i, j) = accumulate ? dst(i, j) + s : s;
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                     to_string(t.shape()));
  }
}

bool is_binary(Elementwise kind) {
  return kind == Elementwise::Add || kind == Elementwise::Sub || kind == Elementwise::Mul;
}

}  // namespace

// Elementwise ----------------------------------------------------------------

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor* b, double factor) {
  if (is_binary(kind)) {
    if (b == nullptr) throw ValueError("binary elementwise op needs two operands");
    const Tensor& rhs = *b;
    const std::size_t na = a.numel(), nb = rhs.numel();
    if (a.shape() != rhs.shape() && na != 1 && nb != 1) {
      throw ShapeError("elementwise shape mismatch: " + to_string(a.shape()) + " vs " + to_string(rhs.shape()));
    }
    const Shape out_shape = (na == 1 && nb != 1) ? rhs.shape() : a.shape();
    const std::size_t n = numel_of(out_shape);
    const std::size_t sa = na == 1 ? 0 : 1, sb = nb == 1 ? 0 : 1;
    auto da = a.data();
    auto db = rhs.data();
    std::vector<double> out(n);
    switch (kind) {
      case Elementwise::Add:
        for (std::size_t i = 0; i < n; ++i) out[i] = da[i * sa] + db[i * sb];
        break;
      case Elementwise::Sub:
        for (std::size_t i = 0; i < n; ++i) out[i] = da[i * sa] - db[i * sb];
        break;
      default:
        for (std::size_t i = 0; i < n; ++i) out[i] = da[i * sa] * db[i * sb];
        break;
    }
    return make_result(out_shape, std::move(out), {a, rhs},
                       [kind, a, rhs, n, sa, sb](std::span<const double> g, std::vector<std::span<double>>& gi) {
                         auto ga = gi[0];
                         auto gb = gi[1];
                         const double sign_b = kind == Elementwise::Sub ? -1.0 : 1.0;
                         if (kind == Elementwise::Mul) {
                           auto va = a.data();
                           auto vb = rhs.data();
                           if (!ga.empty())
                             for (std::size_t i = 0; i < n; ++i) ga[i * sa] += g[i] * vb[i * sb];
                           if (!gb.empty())
                             for (std::size_t i = 0; i < n; ++i) gb[i * sb] += g[i] * va[i * sa];
                         } else {
                           if (!ga.empty())
                             for (std::size_t i = 0; i < n; ++i) ga[i * sa] += g[i];
                           if (!gb.empty())
                             for (std::size_t i = 0; i < n; ++i) gb[i * sb] += sign_b * g[i];
                         }
                       });
  }

  auto da = a.data();
  const std::size_t n = da.size();
  std::vector<double> out(n);
  switch (kind) {
    case Elementwise::Scale:
      for (std::size_t i = 0; i < n; ++i) out[i] = factor * da[i];
      break;
    case Elementwise::Exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(da[i]);
      break;
    case Elementwise::Log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(da[i] > 0.0)) throw ValueError("log of non-positive value " + std::to_string(da[i]));
        out[i] = std::log(da[i]);
      }
      break;
    case Elementwise::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = stable_sigmoid(da[i]);
      break;
    case Elementwise::Relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = da[i] > 0.0 ? da[i] : 0.0;
      break;
    case Elementwise::Negate:
      for (std::size_t i = 0; i < n; ++i) out[i] = -da[i];
      break;
    default:
      throw ValueError("unsupported elementwise kind");
  }
  std::vector<double> saved;
  if (kind == Elementwise::Exp || kind == Elementwise::Sigmoid) saved = out;
  return make_result(a.shape(), std::move(out), {a},
                     [kind, a, factor, saved = std::move(saved)](std::span<const double> g,
                                                                 std::vector<std::span<double>>& gi) {
                       auto ga = gi[0];
                       auto va = a.data();
                       const std::size_t n = g.size();
                       switch (kind) {
                         case Elementwise::Scale:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += factor * g[i];
                           break;
                         case Elementwise::Exp:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * saved[i];
                           break;
                         case Elementwise::Log:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / va[i];
                           break;
                         case Elementwise::Sigmoid:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * saved[i] * (1.0 - saved[i]);
                           break;
                         case Elementwise::Relu:
                           for (std::size_t i = 0; i < n; ++i)
                             if (va[i] > 0.0) ga[i] += g[i];
                           break;
                         default:
                           for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i];
                           break;
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Add, a, &b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Sub, a, &b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::Mul, a, &b); }
Tensor scale(const Tensor& a, double factor) { return elementwise(Elementwise::Scale, a, nullptr, factor); }
Tensor exp(const Tensor& a) { return elementwise(Elementwise::Exp, a); }
Tensor log(const Tensor& a) { return elementwise(Elementwise::Log, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(Elementwise::Sigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(Elementwise::Relu, a); }
Tensor neg(const Tensor& a) { return elementwise(Elementwise::Negate, a); }

Tensor add_scalar(const Tensor& a, double value) {
  auto da = a.data();
  std::vector<double> out(da.begin(), da.end());
  for (double& v : out) v += value;
  return make_result(a.shape(), std::move(out), {a},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                     });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ValueError("clamp: lo > hi");
  auto da = a.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = std::clamp(da[i], lo, hi);
  return make_result(a.shape(), std::move(out), {a},
                     [a, lo, hi](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       auto va = a.data();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (va[i] > lo && va[i] < hi) gi[0][i] += g[i];
                     });
}

// Reductions and indexing -----------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result(Shape{1}, {s}, {a}, [](std::span<const double> g, std::vector<std::span<double>>& gi) {
    for (double& v : gi[0]) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result(Shape{1}, {s / n}, {a}, [n](std::span<const double> g, std::vector<std::span<double>>& gi) {
    for (double& v : gi[0]) v += g[0] / n;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape " + to_string(a.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  auto da = a.data();
  return make_result(std::move(shape), std::vector<double>(da.begin(), da.end()), {a},
                     [](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                     });
}

Tensor select(const Tensor& a, std::size_t index) {
  if (index >= a.numel()) {
    throw ShapeError("select index " + std::to_string(index) + " out of range for " + to_string(a.shape()));
  }
  return make_result(Shape{1}, {a.data()[index]}, {a},
                     [index](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       gi[0][index] += g[0];
                     });
}

Tensor gather(const Tensor& a, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("gather needs at least one index");
  auto da = a.data();
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= da.size()) throw ShapeError("gather index out of range for " + to_string(a.shape()));
    out.push_back(da[i]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Shape shape{idx.size()};
  return make_result(std::move(shape), std::move(out), {a},
                     [idx = std::move(idx)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t k = 0; k < idx.size(); ++k) gi[0][idx[k]] += g[k];
                     });
}

Tensor softmax(const Tensor& a) {
  require_rank(a, 1, "softmax");
  auto da = a.data();
  const double mx = *std::max_element(da.begin(), da.end());
  std::vector<double> out(da.size());
  double z = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) z += (out[i] = std::exp(da[i] - mx));
  for (double& v : out) v /= z;
  std::vector<double> saved = out;
  return make_result(a.shape(), std::move(out), {a},
                     [saved = std::move(saved)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       double dot = 0.0;
                       for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * saved[i];
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += saved[i] * (g[i] - dot);
                     });
}

Tensor log_softmax(const Tensor& a) {
  require_rank(a, 1, "log_softmax");
  auto da = a.data();
  const double mx = *std::max_element(da.begin(), da.end());
  double z = 0.0;
  for (double v : da) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = da[i] - lse;
  std::vector<double> probs(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) probs[i] = std::exp(out[i]);
  return make_result(a.shape(), std::move(out), {a},
                     [probs = std::move(probs)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       double total = 0.0;
                       for (double v : g) total += v;
                       for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] - probs[i] * total;
                     });
}

// Linear algebra --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner extent mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  product_into(MapMat(out.data(), m, n), ConstMapMat(a.data().data(), m, k), ConstMapMat(b.data().data(), k, n),
               false);
  return make_result(Shape{m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       ConstMapMat G(g.data(), m, n);
                       if (!gi[0].empty())
                         product_into(MapMat(gi[0].data(), m, k), G, ConstMapMat(b.data().data(), k, n).transpose(),
                                      true);
                       if (!gi[1].empty())
                         product_into(MapMat(gi[1].data(), k, n), ConstMapMat(a.data().data(), m, k).transpose(), G,
                                      true);
                     });
}

// Convolution ------------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, ho, wo, stride, dilation, padding;
  std::size_t rows() const { return cin * kh * kw; }
  std::size_t cols() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
};

// Fills cols (rows() x cols(), row-major) from x.
void im2col(const ConvGeometry& geo, const double* x, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
  for (std::size_t c = 0; c < geo.cin; ++c) {
    const double* xc = x + c * geo.h * geo.w;
    for (std::size_t ki = 0; ki < geo.kh; ++ki) {
      for (std::size_t kj = 0; kj < geo.kw; ++kj) {
        double* row = cols + ((c * geo.kh + ki) * geo.kw + kj) * geo.cols();
        for (std::size_t oh = 0; oh < geo.ho; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * geo.stride + ki * geo.dilation) - pad;
          double* dst = row + oh * geo.wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(geo.h)) {
            std::fill(dst, dst + geo.wo, 0.0);
            continue;
          }
          const double* src = xc + ih * geo.w;
          for (std::size_t ow = 0; ow < geo.wo; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * geo.stride + kj * geo.dilation) - pad;
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(geo.w)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Scatters cols back onto gx (accumulating).
void col2im(const ConvGeometry& geo, const double* cols, double* gx) {
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
  for (std::size_t c = 0; c < geo.cin; ++c) {
    double* gc = gx + c * geo.h * geo.w;
    for (std::size_t ki = 0; ki < geo.kh; ++ki) {
      for (std::size_t kj = 0; kj < geo.kw; ++kj) {
        const double* row = cols + ((c * geo.kh + ki) * geo.kw + kj) * geo.cols();
        for (std::size_t oh = 0; oh < geo.ho; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * geo.stride + ki * geo.dilation) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(geo.h)) continue;
          double* dst = gc + ih * geo.w;
          const double* src = row + oh * geo.wo;
          for (std::size_t ow = 0; ow < geo.wo; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * geo.stride + kj * geo.dilation) - pad;
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(geo.w)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions options) {
  require_rank(x, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (options.stride < 1 || options.dilation < 1) throw ValueError("conv2d: stride and dilation must be >= 1");
  ConvGeometry geo{};
  geo.cin = x.dim(0);
  geo.h = x.dim(1);
  geo.w = x.dim(2);
  geo.cout = weight.dim(0);
  geo.kh = weight.dim(2);
  geo.kw = weight.dim(3);
  geo.stride = options.stride;
  geo.dilation = options.dilation;
  geo.padding = options.padding;
  if (weight.dim(1) != geo.cin) {
    throw ShapeError("conv2d: weight " + to_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)) +
                     " input channels, input is " + to_string(x.shape()));
  }
  if (bias.defined() && (bias.numel() != geo.cout)) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match " + std::to_string(geo.cout) +
                     " output channels");
  }
  const std::size_t ekh = (geo.kh - 1) * geo.dilation + 1;
  const std::size_t ekw = (geo.kw - 1) * geo.dilation + 1;
  if (ekh > geo.h + 2 * geo.padding || ekw > geo.w + 2 * geo.padding) {
    throw ShapeError("conv2d: effective kernel " + std::to_string(ekh) + "x" + std::to_string(ekw) +
                     " exceeds padded input " + to_string(x.shape()) + " with padding " +
                     std::to_string(geo.padding));
  }
  geo.ho = (geo.h + 2 * geo.padding - ekh) / geo.stride + 1;
  geo.wo = (geo.w + 2 * geo.padding - ekw) / geo.stride + 1;

  auto cols = std::make_shared<std::vector<double>>();
  const double* col_ptr = x.data().data();
  if (!geo.pointwise()) {
    cols->resize(geo.rows() * geo.cols());
    im2col(geo, x.data().data(), cols->data());
    col_ptr = cols->data();
  }
  std::vector<double> out(geo.cout * geo.cols());
  MapMat O(out.data(), geo.cout, geo.cols());
  product_into(O, ConstMapMat(weight.data().data(), geo.cout, geo.rows()), ConstMapMat(col_ptr, geo.rows(), geo.cols()),
               false);
  if (bias.defined()) {
    auto db = bias.data();
    for (std::size_t c = 0; c < geo.cout; ++c) O.row(c).array() += db[c];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(
      Shape{geo.cout, geo.ho, geo.wo}, std::move(out), std::move(inputs),
      [geo, x, weight, cols, has_bias](std::span<const double> g, std::vector<std::span<double>>& gi) {
        ConstMapMat G(g.data(), geo.cout, geo.cols());
        const double* col_ptr = geo.pointwise() ? x.data().data() : cols->data();
        if (!gi[1].empty()) {
          product_into(MapMat(gi[1].data(), geo.cout, geo.rows()), G,
                       ConstMapMat(col_ptr, geo.rows(), geo.cols()).transpose(), true);
        }
        if (has_bias && !gi[2].empty()) {
          // Plain loop: Eigen's vectorized sum also peels by address.
          for (std::size_t c = 0; c < geo.cout; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < geo.cols(); ++i) s += g[c * geo.cols() + i];
            gi[2][c] += s;
          }
        }
        if (!gi[0].empty()) {
          ConstMapMat W(weight.data().data(), geo.cout, geo.rows());
          if (geo.pointwise()) {
            product_into(MapMat(gi[0].data(), geo.rows(), geo.cols()), W.transpose(), G, true);
          } else {
            std::vector<double> gcols(geo.rows() * geo.cols());
            product_into(MapMat(gcols.data(), geo.rows(), geo.cols()), W.transpose(), G, false);
            col2im(geo, gcols.data(), gi[0].data());
          }
        }
      });
}

// Resampling -------------------------------------------------------------------

namespace {

struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

// Align-corners-false bilinear taps for a 2x upsample of an axis of length n.
std::vector<Tap> bilinear_taps(std::size_t n) {
  std::vector<Tap> taps(2 * n);
  for (std::size_t o = 0; o < 2 * n; ++o) {
    const double src = std::max(0.0, (static_cast<double>(o) + 0.5) / 2.0 - 0.5);
    const auto i0 = std::min(static_cast<std::size_t>(src), n - 1);
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double l = src - static_cast<double>(i0);
    taps[o] = {i0, i1, 1.0 - l, l};
  }
  return taps;
}

}  // namespace

Tensor upsample2x(const Tensor& x, UpsampleMode mode) {
  require_rank(x, 3, "upsample2x");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  auto dx = x.data();
  std::vector<double> out(c * oh * ow);
  if (mode == UpsampleMode::Nearest) {
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) out[(ch * oh + i) * ow + j] = dx[(ch * h + i / 2) * w + j / 2];
    return make_result(Shape{c, oh, ow}, std::move(out), {x},
                       [c, h, w, oh, ow](std::span<const double> g, std::vector<std::span<double>>& gi) {
                         for (std::size_t ch = 0; ch < c; ++ch)
                           for (std::size_t i = 0; i < oh; ++i)
                             for (std::size_t j = 0; j < ow; ++j)
                               gi[0][(ch * h + i / 2) * w + j / 2] += g[(ch * oh + i) * ow + j];
                       });
  }
  auto ty = std::make_shared<std::vector<Tap>>(bilinear_taps(h));
  auto tx = std::make_shared<std::vector<Tap>>(bilinear_taps(w));
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = dx.data() + ch * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      const Tap& a = (*ty)[i];
      for (std::size_t j = 0; j < ow; ++j) {
        const Tap& b = (*tx)[j];
        out[(ch * oh + i) * ow + j] = a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
                                      a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]);
      }
    }
  }
  return make_result(Shape{c, oh, ow}, std::move(out), {x},
                     [c, h, w, oh, ow, ty, tx](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double* dst = gi[0].data() + ch * h * w;
                         for (std::size_t i = 0; i < oh; ++i) {
                           const Tap& a = (*ty)[i];
                           for (std::size_t j = 0; j < ow; ++j) {
                             const Tap& b = (*tx)[j];
                             const double v = g[(ch * oh + i) * ow + j];
                             dst[a.i0 * w + b.i0] += v * a.w0 * b.w0;
                             dst[a.i0 * w + b.i1] += v * a.w0 * b.w1;
                             dst[a.i1 * w + b.i0] += v * a.w1 * b.w0;
                             dst[a.i1 * w + b.i1] += v * a.w1 * b.w1;
                           }
                         }
                       }
                     });
}

Tensor downsample2x(const Tensor& x) {
  require_rank(x, 3, "downsample2x");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("downsample2x needs even extents, got " + to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  auto dx = x.data();
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const double* p = dx.data() + (ch * h + 2 * i) * w + 2 * j;
        out[(ch * oh + i) * ow + j] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return make_result(Shape{c, oh, ow}, std::move(out), {x},
                     [c, h, w, oh, ow](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t ch = 0; ch < c; ++ch)
                         for (std::size_t i = 0; i < oh; ++i)
                           for (std::size_t j = 0; j < ow; ++j) {
                             const double v = 0.25 * g[(ch * oh + i) * ow + j];
                             double* p = gi[0].data() + (ch * h + 2 * i) * w + 2 * j;
                             p[0] += v;
                             p[1] += v;
                             p[w] += v;
                             p[w + 1] += v;
                           }
                     });
}

namespace {

std::vector<double> per_channel_mean(const Tensor& x) {
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  auto dx = x.data();
  std::vector<double> out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += dx[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return out;
}

void per_channel_mean_backward(std::size_t hw, std::span<const double> g, std::span<double> gx) {
  for (std::size_t ch = 0; ch < g.size(); ++ch) {
    const double v = g[ch] / static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) gx[ch * hw + i] += v;
  }
}

}  // namespace

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t hw = x.dim(1) * x.dim(2);
  return make_result(Shape{x.dim(0), 1, 1}, per_channel_mean(x), {x},
                     [hw](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       per_channel_mean_backward(hw, g, gi[0]);
                     });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 3, "channel_mean");
  const std::size_t hw = x.dim(1) * x.dim(2);
  return make_result(Shape{x.dim(0)}, per_channel_mean(x), {x},
                     [hw](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       per_channel_mean_backward(hw, g, gi[0]);
                     });
}

Tensor concat_channels(std::span<const Tensor> xs) {
  if (xs.empty()) throw ShapeError("concat_channels needs at least one tensor");
  for (const Tensor& t : xs) require_rank(t, 3, "concat_channels");
  const std::size_t h = xs[0].dim(1), w = xs[0].dim(2);
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    if (t.dim(1) != h || t.dim(2) != w) {
      throw ShapeError("concat_channels spatial mismatch: " + to_string(xs[0].shape()) + " vs " +
                       to_string(t.shape()));
    }
    total += t.dim(0);
  }
  std::vector<double> out;
  out.reserve(total * h * w);
  std::vector<std::size_t> sizes;
  for (const Tensor& t : xs) {
    out.insert(out.end(), t.data().begin(), t.data().end());
    sizes.push_back(t.numel());
  }
  return make_result(Shape{total, h, w}, std::move(out), std::vector<Tensor>(xs.begin(), xs.end()),
                     [sizes = std::move(sizes)](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < sizes.size(); ++k) {
                         if (!gi[k].empty())
                           for (std::size_t i = 0; i < sizes[k]; ++i) gi[k][i] += g[offset + i];
                         offset += sizes[k];
                       }
                     });
}

Tensor scale_channels(const Tensor& x, const Tensor& weights) {
  require_rank(x, 3, "scale_channels");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (weights.numel() != c) {
    throw ShapeError("scale_channels: " + to_string(weights.shape()) + " weights for " + to_string(x.shape()));
  }
  auto dx = x.data();
  auto dw = weights.data();
  std::vector<double> out(c * hw);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = dx[ch * hw + i] * dw[ch];
  return make_result(x.shape(), std::move(out), {x, weights},
                     [x, weights, c, hw](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       auto dx = x.data();
                       auto dw = weights.data();
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < hw; ++i) {
                           if (!gi[0].empty()) gi[0][ch * hw + i] += g[ch * hw + i] * dw[ch];
                           acc += g[ch * hw + i] * dx[ch * hw + i];
                         }
                         if (!gi[1].empty()) gi[1][ch] += acc;
                       }
                     });
}

Tensor flip_horizontal(const Tensor& x) {
  require_rank(x, 3, "flip_horizontal");
  const std::size_t rows = x.dim(0) * x.dim(1), w = x.dim(2);
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = dx[r * w + (w - 1 - j)];
  return make_result(x.shape(), std::move(out), {x},
                     [rows, w](std::span<const double> g, std::vector<std::span<double>>& gi) {
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < w; ++j) gi[0][r * w + (w - 1 - j)] += g[r * w + j];
                     });
}

// Affine warp --------------------------------------------------------------------

Tensor warp_affine(const Tensor& x, const Tensor& affine, Interpolation mode) {
  require_rank(x, 3, "warp_affine");
  if (affine.numel() != 6) throw ShapeError("warp_affine needs a 2x3 matrix, got " + to_string(affine.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto A = affine.data();
  auto dx = x.data();
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
  std::vector<double> out(c * h * w, 0.0);

  auto sample_point = [&](std::size_t row, std::size_t col) {
    const double fx = static_cast<double>(col), fy = static_cast<double>(row);
    return std::pair{A[0] * fx + A[1] * fy + A[2], A[3] * fx + A[4] * fy + A[5]};
  };

  if (mode == Interpolation::Nearest) {
    // Source index per output pixel, -1 when outside.
    auto src = std::make_shared<std::vector<std::ptrdiff_t>>(h * w, -1);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t q = 0; q < w; ++q) {
        const auto [u, v] = sample_point(r, q);
        const auto xi = static_cast<std::ptrdiff_t>(std::floor(u + 0.5));
        const auto yi = static_cast<std::ptrdiff_t>(std::floor(v + 0.5));
        if (xi >= 0 && xi < iw && yi >= 0 && yi < ih) (*src)[r * w + q] = yi * iw + xi;
      }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < h * w; ++p)
        if ((*src)[p] >= 0) out[ch * h * w + p] = dx[ch * h * w + (*src)[p]];
    return make_result(x.shape(), std::move(out), {x, affine},
                       [src, c, h, w](std::span<const double> g, std::vector<std::span<double>>& gi) {
                         if (gi[0].empty()) return;
                         for (std::size_t ch = 0; ch < c; ++ch)
                           for (std::size_t p = 0; p < h * w; ++p)
                             if ((*src)[p] >= 0) gi[0][ch * h * w + (*src)[p]] += g[ch * h * w + p];
                       });
  }

  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t q = 0; q < w; ++q) {
      const auto [u, v] = sample_point(r, q);
      const double x0f = std::floor(u), y0f = std::floor(v);
      const double fx = u - x0f, fy = v - y0f;
      const auto x0 = static_cast<std::ptrdiff_t>(x0f), y0 = static_cast<std::ptrdiff_t>(y0f);
      if (x0 < -1 || x0 >= iw || y0 < -1 || y0 >= ih) continue;
      const bool vx0 = x0 >= 0, vx1 = x0 + 1 < iw, vy0 = y0 >= 0, vy1 = y0 + 1 < ih;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* img = dx.data() + ch * h * w;
        const double i00 = (vx0 && vy0) ? img[y0 * iw + x0] : 0.0;
        const double i10 = (vx1 && vy0) ? img[y0 * iw + x0 + 1] : 0.0;
        const double i01 = (vx0 && vy1) ? img[(y0 + 1) * iw + x0] : 0.0;
        const double i11 = (vx1 && vy1) ? img[(y0 + 1) * iw + x0 + 1] : 0.0;
        out[(ch * h + r) * w + q] =
            (1 - fy) * ((1 - fx) * i00 + fx * i10) + fy * ((1 - fx) * i01 + fx * i11);
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, affine},
      [x, affine, c, h, w](std::span<const double> g, std::vector<std::span<double>>& gi) {
        auto A = affine.data();
        auto dx = x.data();
        const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
        double gA[6] = {0, 0, 0, 0, 0, 0};
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t q = 0; q < w; ++q) {
            const double px = static_cast<double>(q), py = static_cast<double>(r);
            const double u = A[0] * px + A[1] * py + A[2];
            const double v = A[3] * px + A[4] * py + A[5];
            const double x0f = std::floor(u), y0f = std::floor(v);
            const double fx = u - x0f, fy = v - y0f;
            const auto x0 = static_cast<std::ptrdiff_t>(x0f), y0 = static_cast<std::ptrdiff_t>(y0f);
            if (x0 < -1 || x0 >= iw || y0 < -1 || y0 >= ih) continue;
            const bool vx0 = x0 >= 0, vx1 = x0 + 1 < iw, vy0 = y0 >= 0, vy1 = y0 + 1 < ih;
            double du = 0.0, dv = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double go = g[(ch * h + r) * w + q];
              if (go == 0.0) continue;
              const std::size_t base = ch * h * w;
              if (!gi[0].empty()) {
                if (vx0 && vy0) gi[0][base + y0 * iw + x0] += go * (1 - fx) * (1 - fy);
                if (vx1 && vy0) gi[0][base + y0 * iw + x0 + 1] += go * fx * (1 - fy);
                if (vx0 && vy1) gi[0][base + (y0 + 1) * iw + x0] += go * (1 - fx) * fy;
                if (vx1 && vy1) gi[0][base + (y0 + 1) * iw + x0 + 1] += go * fx * fy;
              }
              if (!gi[1].empty()) {
                const double* img = dx.data() + base;
                const double i00 = (vx0 && vy0) ? img[y0 * iw + x0] : 0.0;
                const double i10 = (vx1 && vy0) ? img[y0 * iw + x0 + 1] : 0.0;
                const double i01 = (vx0 && vy1) ? img[(y0 + 1) * iw + x0] : 0.0;
                const double i11 = (vx1 && vy1) ? img[(y0 + 1) * iw + x0 + 1] : 0.0;
                du += go * ((1 - fy) * (i10 - i00) + fy * (i11 - i01));
                dv += go * ((1 - fx) * (i01 - i00) + fx * (i11 - i10));
              }
            }
            gA[0] += du * px;
            gA[1] += du * py;
            gA[2] += du;
            gA[3] += dv * px;
            gA[4] += dv * py;
            gA[5] += dv;
          }
        }
        if (!gi[1].empty())
          for (int k = 0; k < 6; ++k) gi[1][k] += gA[k];
      });
}

}  // namespace p2aug::ad
