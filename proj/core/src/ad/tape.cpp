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

#include "p2aug/ad/tape.hpp"

#include <algorithm>

#include "p2aug/error.hpp"

namespace p2aug::ad {
namespace {

thread_local Tape* active_tape = nullptr;
thread_local bool grad_mode = true;

Tape& default_tape() {
  thread_local Tape tape;
  return tape;
}

}  // namespace

Tape::~Tape() { clear(); }

Tape& Tape::current() { return active_tape ? *active_tape : default_tape(); }

void Tape::clear() {
  for (Entry& e : entries_) {
    if (e.output && e.output->tape == this) e.output->tape = nullptr;
  }
  entries_.clear();
}

void Tape::record(const std::shared_ptr<detail::Node>& output, const std::vector<Tensor>& inputs,
                  BackwardFn backward) {
  Entry e;
  e.output = output;
  e.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) e.inputs.push_back(t.node());
  e.backward = std::move(backward);
  output->tape = this;
  output->tape_index = entries_.size();
  entries_.push_back(std::move(e));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward on an undefined tensor");
  if (loss.numel() != 1) throw ShapeError("backward needs a scalar loss, got " + to_string(loss.shape()));
  const auto& root = loss.node();
  if (!root->requires_grad) return;
  if (root->is_leaf) {
    root->ensure_grad();
    root->grad[0] += 1.0;
    return;
  }
  if (root->tape != this) throw Error("loss was not produced on this tape (cleared or recorded elsewhere)");

  const std::size_t last = root->tape_index;
  for (std::size_t i = 0; i <= last; ++i) {
    auto& out = entries_[i].output;
    out->grad.assign(out->data.size(), 0.0);
  }
  root->grad[0] = 1.0;

  std::vector<std::span<double>> grad_in;
  for (std::size_t i = last + 1; i-- > 0;) {
    Entry& e = entries_[i];
    const auto& g = e.output->grad;
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    grad_in.clear();
    for (const auto& in : e.inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        grad_in.emplace_back(in->grad);
      } else {
        grad_in.emplace_back();
      }
    }
    e.backward(g, grad_in);
  }
}

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
Tape::Scope::~Scope() { active_tape = previous_; }

void backward(const Tensor& loss) { Tape::current().backward(loss); }

bool grad_enabled() { return grad_mode; }

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }

}  // namespace p2aug::ad
