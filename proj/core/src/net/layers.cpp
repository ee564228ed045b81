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

#include "p2aug/net/layers.hpp"

#include <cmath>

#include "p2aug/error.hpp"

namespace p2aug::net {

ad::Tensor ParameterSet::add(std::string name, ad::Tensor tensor) {
  if (contains(name)) throw ValueError("duplicate parameter name " + name);
  tensor.set_requires_grad(true);
  entries_.emplace_back(std::move(name), tensor);
  return tensor;
}

const ad::Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ValueError("no parameter named " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

std::vector<ad::Tensor> ParameterSet::tensors() const {
  std::vector<ad::Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter sets differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [name, src] = other.entries_[i];
    auto& [dst_name, dst] = entries_[i];
    if (name != dst_name || src.shape() != dst.shape()) throw ShapeError("parameter mismatch at " + dst_name);
    std::copy(src.data().begin(), src.data().end(), dst.data_mut().begin());
  }
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, Rng& rng, ad::Conv2dOptions opts)
    : options(opts) {
  const double std = std::sqrt(2.0 / static_cast<double>(in_channels * kernel * kernel));
  std::vector<double> w(out_channels * in_channels * kernel * kernel);
  for (double& v : w) v = rng.normal(0.0, std);
  weight = params.add(name + ".weight", ad::Tensor({out_channels, in_channels, kernel, kernel}, std::move(w)));
  bias = params.add(name + ".bias", ad::Tensor({out_channels}, 0.0));
}

void Conv2d::zero() {
  for (double& v : weight.data_mut()) v = 0.0;
  for (double& v : bias.data_mut()) v = 0.0;
}

void Conv2d::scale_weights(double factor) {
  for (double& v : weight.data_mut()) v *= factor;
}

Conv2d conv3x3(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               std::size_t stride, std::size_t dilation) {
  return Conv2d(params, name, in, out, 3, rng, {stride, dilation, dilation});
}

Conv2d conv1x1(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  return Conv2d(params, name, in, out, 1, rng);
}

ad::Tensor resample_levels(const ad::Tensor& x, int from_level, int to_level) {
  ad::Tensor y = x;
  for (int l = from_level; l > to_level; --l) y = ad::upsample2x(y, ad::UpsampleMode::Bilinear);
  for (int l = from_level; l < to_level; ++l) y = ad::downsample2x(y);
  return y;
}

}  // namespace p2aug::net
