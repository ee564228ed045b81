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
#include <span>
#include <vector>

#include "p2aug/ad/tensor.hpp"

namespace p2aug::ad {

/// First-order optimizer over a fixed, ordered parameter list.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update from the current gradients. Parameters without a gradient
  /// buffer are left untouched.
  virtual void step(std::span<Tensor> params) = 0;
};

/// Plain gradient descent: p -= lr * g.
class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<Tensor> params) override;
  double learning_rate() const { return lr_; }

 private:
  double lr_;
};

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // L2 term added to the gradient
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}
  void step(std::span<Tensor> params) override;
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.lr = lr; }

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

void zero_grads(std::span<Tensor> params);
double grad_norm(std::span<const Tensor> params);

}  // namespace p2aug::ad
