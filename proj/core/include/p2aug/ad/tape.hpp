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
#include <memory>
#include <vector>

#include "p2aug/ad/tensor.hpp"

namespace p2aug::ad {

/// Define-by-run record of differentiable operations.
///
/// Each thread has a default tape; Tape::Scope redirects recording to another tape for
/// its lifetime. A tape and the tensors it references belong to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  static Tape& current();

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Drops every entry and its saved context.
  void clear();

  /// Reverse pass from a scalar loss produced on this tape (or a leaf). Leaf gradients
  /// accumulate across calls; intermediate gradients are recomputed each call.
  void backward(const Tensor& loss);

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);

  struct Entry {
    std::shared_ptr<detail::Node> output;
    std::vector<std::shared_ptr<detail::Node>> inputs;
    BackwardFn backward;
  };

  void record(const std::shared_ptr<detail::Node>& output, const std::vector<Tensor>& inputs, BackwardFn backward);

  std::vector<Entry> entries_;
};

/// backward() on the current thread's active tape.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables recording on this thread for its lifetime (evaluation, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace p2aug::ad
