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
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "p2aug/app/config.hpp"
#include "p2aug/app/gradcheck_suite.hpp"

namespace p2aug::app {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeFailure = 2, kGradcheckFailure = 3 };

struct RunContext {
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
  std::ostream* out = nullptr;  // progress and reports
  std::ostream* err = nullptr;  // diagnostics
};

/// Dataset directory of `config`: data.dir, resolved against the output directory when relative.
std::filesystem::path dataset_dir(const ExperimentConfig& config, const RunContext& ctx);

/// Writes the dataset (see pose::write_dataset) to dataset_dir().
int cmd_gen_data(const ExperimentConfig& config, const RunContext& ctx);

/// Pose task: alternating bilevel search over the dataset's train/val splits. Writes
///   policy.json        best policy by periodic validation loss (initial policy for 0 steps)
///   policy_last.json   policy after the final step
///   search_metrics.csv
/// On a non-finite loss the last good policy and model are written (policy.json,
/// search_last_good.bin) and kRuntimeFailure is returned.
/// Toy task: runs the quadratic problem and writes toy_result.json.
int cmd_search(const ExperimentConfig& config, const RunContext& ctx);

struct TrainOptions {
  /// Overrides train.policy.
  std::optional<std::filesystem::path> policy;
  /// Also train a no-augmentation baseline and write summary.csv with one row per run.
  bool baseline = false;
};

/// Trains P2Net with hard-sampled augmentation from the policy (none when absent):
///   checkpoints/ckpt_<step>.bin, train_metrics.csv, report.json, report.txt
/// With `baseline` the two runs go to baseline/ and policy/ and share every random stream
/// except augmentation.
int cmd_train(const ExperimentConfig& config, const RunContext& ctx, const TrainOptions& options = {});

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::optional<std::string> split;  // overrides eval.split
  std::optional<bool> flip;          // overrides eval.flip
};

/// Evaluates a checkpoint on a split; writes report.json and report.txt. An empty split
/// writes a "no samples" report and returns kRuntimeFailure.
int cmd_eval(const ExperimentConfig& config, const RunContext& ctx, const EvalOptions& options);

/// Runs the finite-difference suite over `cases` and prints the table (also written to
/// gradcheck.txt). kGradcheckFailure when any op fails.
int cmd_gradcheck(const RunContext& ctx, const std::string& scope, std::size_t instances, std::uint64_t seed,
                  const std::vector<GradcheckCase>& cases = default_gradcheck_cases());

/// Command-line entry point:
///   p2aug <gen-data|search|train|eval|gradcheck> [--config PATH] [--seed INT] [--out DIR] [--jobs INT] ...
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace p2aug::app
