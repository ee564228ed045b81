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

#include "p2aug/app/metrics.hpp"

#include <cstdio>

#include "p2aug/error.hpp"

namespace p2aug::app {

std::string format_number(std::optional<double> v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

MetricsLog::MetricsLog(const std::filesystem::path& path, bool wall_time)
    : out_(path, std::ios::binary | std::ios::trunc), wall_time_(wall_time), start_(std::chrono::steady_clock::now()) {
  if (!out_) throw Error(path.string() + ": cannot open for writing");
  out_ << kHeader << '\n' << std::flush;
}

void MetricsLog::append(const MetricsRow& row) {
  if (last_step_ && row.step <= *last_step_) throw ValueError("metrics: steps must increase");
  last_step_ = row.step;
  std::optional<double> wall;
  if (wall_time_) wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  out_ << row.step << ',' << format_number(row.train_loss) << ',' << format_number(row.val_loss) << ','
       << format_number(row.pck) << ',' << format_number(row.policy_entropy) << ',' << format_number(row.grad_norm)
       << ',' << format_number(row.epsilon) << ',' << format_number(wall) << '\n'
       << std::flush;
  ++rows_;
}

}  // namespace p2aug::app
