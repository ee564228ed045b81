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

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace p2aug::app {

struct MetricsRow {
  std::size_t step = 0;
  std::optional<double> train_loss;
  std::optional<double> val_loss;
  std::optional<double> pck;
  std::optional<double> policy_entropy;
  std::optional<double> grad_norm;  // ||grad_omega L_val|| in search, ||grad_omega L_train|| in training
  std::optional<double> epsilon;
};

/// Append-only CSV with header
///   step,L_train,L_val,PCK,policy_entropy,grad_norm,epsilon,wall_time
/// Absent values are empty fields. Numbers use 17 significant digits. wall_time (seconds
/// since the log opened) is only filled when enabled, so default logs are reproducible.
/// Every row is flushed; steps must strictly increase.
class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& path, bool wall_time);
  void append(const MetricsRow& row);
  std::size_t rows() const { return rows_; }

  static constexpr const char* kHeader = "step,L_train,L_val,PCK,policy_entropy,grad_norm,epsilon,wall_time";

 private:
  std::ofstream out_;
  bool wall_time_;
  std::chrono::steady_clock::time_point start_;
  std::size_t rows_ = 0;
  std::optional<std::size_t> last_step_;
};

/// "%.17g", or empty when absent.
std::string format_number(std::optional<double> v);

}  // namespace p2aug::app
