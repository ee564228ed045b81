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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace p2aug::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  bool is_leaf = true;
  const Tape* tape = nullptr;  // producing tape for non-leaf nodes
  std::size_t tape_index = 0;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// Tensors are shared handles: copying a Tensor aliases the same storage. Use
/// clone() or detach() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros_like(const Tensor& other);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view of the values. Only meant for leaves (parameters, inputs);
  /// mutating a tensor already saved on a tape invalidates that tape.
  std::span<double> data_mut();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  /// Element of a rank-3 tensor.
  double at(std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  /// New leaf holding a copy of the values, detached from any tape.
  Tensor detach() const;
  Tensor clone() const { return detach().set_requires_grad(requires_grad()); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(std::span<const double>, std::vector<std::span<double>>&)>);
};

/// Gradient callback of a recorded operation: receives dLoss/dOutput and one span per
/// input. Spans of inputs that do not require gradients are empty; the callback must
/// accumulate (+=) into the others.
using BackwardFn = std::function<void(std::span<const double> grad_out, std::vector<std::span<double>>& grad_in)>;

/// Creates the result of a (possibly custom) differentiable operation and records it on
/// the current tape when gradient mode is on and any input requires gradients.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace p2aug::ad
