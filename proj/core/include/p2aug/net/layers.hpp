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
#include <string>
#include <utility>
#include <vector>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tensor.hpp"
#include "p2aug/rng.hpp"

namespace p2aug::net {

/// Ordered table of named learnable tensors. Names are module paths such as
/// "backbone.stage2.block0.conv1.weight"; registration order defines checkpoint order.
class ParameterSet {
 public:
  ad::Tensor add(std::string name, ad::Tensor tensor);
  const ad::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::pair<std::string, ad::Tensor>>& entries() const { return entries_; }
  std::vector<ad::Tensor> tensors() const;

  /// Copies values from `other`, matching by name and shape.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
};

/// Convolution with He (fan-in) initialized weights and zero bias.
struct Conv2d {
  ad::Tensor weight;
  ad::Tensor bias;
  ad::Conv2dOptions options;

  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, Rng& rng, ad::Conv2dOptions options = {});

  ad::Tensor operator()(const ad::Tensor& x) const { return ad::conv2d(x, weight, bias, options); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  /// Sets weight and bias to zero.
  void zero();
  /// Multiplies the initial weights by `factor`.
  void scale_weights(double factor);
};

/// 3x3, "same" padding for the given stride and dilation.
Conv2d conv3x3(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               std::size_t stride = 1, std::size_t dilation = 1);
Conv2d conv1x1(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

/// Repeated 2x resampling from `from_level` to `to_level` (level index grows as
/// resolution halves).
ad::Tensor resample_levels(const ad::Tensor& x, int from_level, int to_level);

}  // namespace p2aug::net
