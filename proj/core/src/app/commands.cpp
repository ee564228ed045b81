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

#include "p2aug/app/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "p2aug/ad/optim.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/app/metrics.hpp"
#include "p2aug/app/pose_task.hpp"
#include "p2aug/error.hpp"
#include "p2aug/log.hpp"
#include "p2aug/search/bilevel.hpp"
#include "p2aug/search/policy_io.hpp"

namespace p2aug::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(path.string() + ": write failed");
}

std::string format(double v) { return format_number(v); }

struct LoadedData {
  std::vector<pose::SceneSample> samples;
};

std::vector<pose::SceneSample> load_split_checked(const ExperimentConfig& config, const RunContext& ctx,
                                                  pose::Split split) {
  const fs::path dir = dataset_dir(config, ctx);
  const pose::DatasetInfo info = pose::read_dataset_info(dir);
  const pose::SceneSpec& have = info.spec.scene;
  const pose::SceneSpec& want = config.data.spec.scene;
  if (have.width != want.width || have.height != want.height || have.joints != want.joints) {
    throw FormatError(dir.string() + ": dataset is " + std::to_string(have.width) + "x" + std::to_string(have.height) +
                      " with " + std::to_string(have.joints) + " joints; the config expects " +
                      std::to_string(want.width) + "x" + std::to_string(want.height) + " with " +
                      std::to_string(want.joints));
  }
  return pose::load_split(dir, split);
}

std::vector<std::vector<double>> snapshot(const net::ParameterSet& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params.entries()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(net::ParameterSet& params, const std::vector<std::vector<double>>& values) {
  std::size_t i = 0;
  for (const auto& [name, t] : params.entries()) {
    ad::Tensor handle = t;
    std::copy(values[i].begin(), values[i].end(), handle.data_mut().begin());
    ++i;
  }
}

json report_json(const std::string& split, const EvalResult& r, bool flip, const std::string& checkpoint) {
  json doc = {{"split", split},
              {"samples", r.samples},
              {"visible_keypoints", r.pck.visible},
              {"correct_keypoints", r.pck.hits},
              {"flip", flip},
              {"checkpoint", checkpoint}};
  if (const auto v = r.pck.value()) {
    doc["pck"] = *v;
  } else {
    doc["pck"] = nullptr;
  }
  if (r.samples > 0) doc["mean_val_loss"] = r.mean_val_loss;
  return doc;
}

std::string report_text(const std::string& split, const EvalResult& r, bool flip) {
  std::ostringstream s;
  if (r.samples == 0) {
    s << "split " << split << ": no samples\n";
    return s.str();
  }
  s << "split " << split << ": " << r.samples << " samples, flip averaging " << (flip ? "on" : "off") << "\n";
  if (const auto v = r.pck.value()) {
    s << "PCK " << format(*v) << " (" << r.pck.hits << "/" << r.pck.visible << " keypoints)\n";
  } else {
    s << "PCK undefined (no visible keypoints)\n";
  }
  s << "mean refined-map l2 " << format(r.mean_val_loss) << "\n";
  return s.str();
}

void write_report(const fs::path& dir, const std::string& split, const EvalResult& r, bool flip,
                  const std::string& checkpoint) {
  write_text(dir / "report.json", report_json(split, r, flip, checkpoint).dump(2) + "\n");
  write_text(dir / "report.txt", report_text(split, r, flip));
}

int search_toy(const ExperimentConfig& config, const RunContext& ctx) {
  search::QuadraticToyProblem problem(config.toy.omega, config.toy.d);
  ad::Sgd omega_opt(config.toy.omega_lr), d_opt(config.toy.d_lr);
  search::HypergradOptions opts;
  opts.zeta = config.toy.zeta;
  MetricsLog log(ctx.out_dir / "search_metrics.csv", config.wall_time);
  for (std::size_t step = 1; step <= config.search.steps; ++step) {
    const search::HypergradStats s = search::hypergrad_step(problem, omega_opt, d_opt, opts);
    MetricsRow row;
    row.step = step;
    row.train_loss = s.train_loss;
    row.val_loss = s.val_loss;
    row.grad_norm = s.val_grad_norm;
    if (!s.policy_skipped) row.epsilon = s.epsilon;
    log.append(row);
  }
  const json result = {{"task", "quadratic_toy"},
                       {"steps", config.search.steps},
                       {"omega", problem.omega()},
                       {"d", problem.d()}};
  write_text(ctx.out_dir / "toy_result.json", result.dump(2) + "\n");
  *ctx.out << "quadratic toy after " << config.search.steps << " steps: omega " << format(problem.omega()) << ", d "
           << format(problem.d()) << "\n";
  return kSuccess;
}

struct TrainResult {
  EvalResult test;
  double final_train_loss = 0.0;
  fs::path checkpoint;
};

TrainResult train_once(const ExperimentConfig& config, const RunContext& ctx, const search::Policy* policy,
                       const fs::path& dir, const std::vector<pose::SceneSample>& train,
                       const std::vector<pose::SceneSample>& test) {
  fs::create_directories(dir / "checkpoints");
  const TrainConfig& tc = config.train;
  std::vector<const pose::SceneSample*> pool;
  const std::size_t n = tc.subset == 0 ? train.size() : std::min(tc.subset, train.size());
  for (std::size_t i = 0; i < n; ++i) pool.push_back(&train[i]);
  if (pool.empty() && tc.steps > 0) throw ValueError("train split is empty");

  net::P2Net model(config.net_config(), mix_seed(config.seed, kModelStream));
  ad::AdamOptions adam;
  adam.lr = tc.lr;
  adam.weight_decay = tc.weight_decay;
  ad::Adam opt(adam);
  Rng order_rng(mix_seed(config.seed, kOrderStream));
  Rng aug_rng(mix_seed(config.seed, kAugStream));
  std::vector<std::size_t> order(pool.size());
  std::size_t cursor = order.size();
  const double entropy = policy ? policy->entropy() : 0.0;

  MetricsLog log(dir / "train_metrics.csv", config.wall_time);
  std::vector<ad::Tensor> params = model.parameters().tensors();
  TrainResult result;
  auto checkpoint = [&](std::size_t step) {
    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_%06zu.bin", step);
    result.checkpoint = dir / "checkpoints" / name;
    net::save_checkpoint(model.parameters(), result.checkpoint);
  };

  const auto drop_after = static_cast<std::size_t>(std::llround(static_cast<double>(tc.steps) * (1.0 - tc.lr_drop_fraction)));
  for (std::size_t step = 1; step <= tc.steps; ++step) {
    if (tc.lr_drop_fraction > 0.0 && step == drop_after + 1) opt.set_learning_rate(tc.lr * 0.1);
    ad::zero_grads(params);
    ad::Tape tape;
    ad::Tape::Scope scope(tape);
    ad::Tensor total;
    for (std::size_t b = 0; b < tc.batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        cursor = 0;
      }
      aug::Sample s = pool[order[cursor++]]->sample;
      if (policy) {
        const auto draw = search::GumbelDraw::sample(policy->k(), policy->n(), aug_rng);
        s = search::apply_hard(s, *policy, search::sample_hard(*policy, draw));
      }
      const ad::Tensor l = sample_training_loss(model, s, config);
      total = total.defined() ? ad::add(total, l) : l;
    }
    const ad::Tensor loss = ad::scale(total, 1.0 / static_cast<double>(tc.batch));
    if (!std::isfinite(loss.item())) throw Error("non-finite training loss at step " + std::to_string(step));
    tape.backward(loss);
    MetricsRow row;
    row.step = step;
    row.train_loss = loss.item();
    row.grad_norm = ad::grad_norm(params);
    if (policy) row.policy_entropy = entropy;
    opt.step(params);
    log.append(row);
    result.final_train_loss = loss.item();
    if ((tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0) || step == tc.steps) checkpoint(step);
  }
  if (tc.steps == 0) checkpoint(0);

  result.test = evaluate(model, test, config, config.eval.flip);
  write_report(dir, "test", result.test, config.eval.flip, fs::relative(result.checkpoint, dir).generic_string());
  *ctx.out << report_text("test", result.test, config.eval.flip);
  return result;
}

}  // namespace

fs::path dataset_dir(const ExperimentConfig& config, const RunContext& ctx) {
  const fs::path dir(config.data.dir);
  return dir.is_absolute() ? dir : ctx.out_dir / dir;
}

int cmd_gen_data(const ExperimentConfig& config, const RunContext& ctx) {
  const fs::path dir = dataset_dir(config, ctx);
  const pose::SplitCounts c = pose::write_dataset(config.data.spec, dir, ctx.jobs);
  *ctx.out << "wrote " << c.total() << " samples to " << dir.string() << " (train " << c.train << ", val " << c.val
           << ", test " << c.test << ")\n";
  return kSuccess;
}

int cmd_search(const ExperimentConfig& config, const RunContext& ctx) {
  if (config.task == Task::QuadraticToy) return search_toy(config, ctx);

  const auto train = load_split_checked(config, ctx, pose::Split::Train);
  const auto val = load_split_checked(config, ctx, pose::Split::Val);
  if (train.empty() || val.empty()) throw ValueError("search needs non-empty train and val splits");
  const SearchConfig& sc = config.search;

  search::Policy policy = initial_policy(config);
  net::P2Net model(config.net_config(), mix_seed(config.seed, kModelStream));
  ad::AdamOptions adam;
  adam.lr = sc.lr;
  adam.weight_decay = sc.weight_decay;
  ad::Adam model_opt(adam);
  ad::Sgd policy_opt(sc.policy_lr);
  search::HypergradOptions hopts;
  hopts.zeta = sc.zeta;
  PoseSearchProblem problem(model, policy, train, val, config, mix_seed(config.seed, kSearchStream));
  const std::vector<pose::SceneSample> probe(val.begin(), val.begin() + std::min(sc.eval_samples, val.size()));

  MetricsLog log(ctx.out_dir / "search_metrics.csv", config.wall_time);
  search::Policy best = policy.clone();
  double best_val = std::numeric_limits<double>::infinity();
  auto measure = [&](MetricsRow& row) {
    const EvalResult r = evaluate(model, probe, config, false);
    row.pck = r.pck.value();
    if (r.mean_val_loss < best_val) {
      best_val = r.mean_val_loss;
      best = policy.clone();
    }
    if (!row.val_loss) row.val_loss = r.mean_val_loss;
  };
  if (sc.eval_every > 0) {
    MetricsRow row;
    row.policy_entropy = policy.entropy();
    measure(row);
    log.append(row);
  }

  for (std::size_t step = 1; step <= sc.steps; ++step) {
    if (config.policy.anneal) {
      policy.set_tau1(search::annealed_temperature(config.policy.tau1, config.policy.anneal_to, step - 1, sc.steps));
      policy.set_tau2(search::annealed_temperature(config.policy.tau2, config.policy.anneal_to, step - 1, sc.steps));
    }
    const search::Policy last_good = policy.clone();
    const auto last_good_model = snapshot(model.parameters());
    search::HypergradStats s;
    bool finite = true;
    try {
      s = search::hypergrad_step(problem, model_opt, policy_opt, hopts);
      finite = std::isfinite(s.train_loss) && std::isfinite(s.val_loss);
    } catch (const Error& e) {
      if (std::string(e.what()).find("non-finite") == std::string::npos) throw;
      finite = false;
    }
    if (!finite) {
      restore(model.parameters(), last_good_model);
      search::save_policy(last_good, ctx.out_dir / "policy.json");
      net::save_checkpoint(model.parameters(), ctx.out_dir / "search_last_good.bin");
      *ctx.err << "search: non-finite loss at step " << step
               << "; wrote the last good policy and model (policy.json, search_last_good.bin)\n";
      return kRuntimeFailure;
    }
    problem.next_batch();
    MetricsRow row;
    row.step = step;
    row.train_loss = s.train_loss;
    row.val_loss = s.val_loss;
    row.policy_entropy = policy.entropy();
    row.grad_norm = s.val_grad_norm;
    if (!s.policy_skipped) row.epsilon = s.epsilon;
    if (sc.eval_every > 0 && (step % sc.eval_every == 0 || step == sc.steps)) {
      row.val_loss.reset();
      measure(row);
    }
    log.append(row);
  }
  if (sc.eval_every == 0) best = policy.clone();
  search::save_policy(best, ctx.out_dir / "policy.json");
  search::save_policy(policy, ctx.out_dir / "policy_last.json");
  *ctx.out << "search finished after " << sc.steps << " steps; policy entropy " << format(policy.entropy())
           << " nats; wrote " << (ctx.out_dir / "policy.json").string() << "\n";
  return kSuccess;
}

int cmd_train(const ExperimentConfig& config, const RunContext& ctx, const TrainOptions& options) {
  if (config.task != Task::Pose) throw ValueError("train: only the pose task has a model to train");
  std::optional<search::Policy> policy;
  const std::optional<fs::path> policy_path =
      options.policy ? options.policy
                     : (config.train.policy.empty() ? std::nullopt : std::optional<fs::path>(config.train.policy));
  if (policy_path) {
    try {
      policy = search::load_policy(*policy_path);
      check_policy_compatible(*policy, config);
    } catch (const Error& e) {
      *ctx.err << "train: " << e.what() << "\n";
      return kUsageError;
    }
  }
  if (options.baseline && !policy) {
    *ctx.err << "train: --baseline compares against a policy; pass --policy\n";
    return kUsageError;
  }
  const auto train = load_split_checked(config, ctx, pose::Split::Train);
  const auto test = load_split_checked(config, ctx, pose::Split::Test);

  if (!options.baseline) {
    const TrainResult r = train_once(config, ctx, policy ? &*policy : nullptr, ctx.out_dir, train, test);
    *ctx.out << "final checkpoint " << r.checkpoint.string() << "\n";
    return kSuccess;
  }
  *ctx.out << "[baseline]\n";
  const TrainResult base = train_once(config, ctx, nullptr, ctx.out_dir / "baseline", train, test);
  *ctx.out << "[policy]\n";
  const TrainResult searched = train_once(config, ctx, &*policy, ctx.out_dir / "policy", train, test);
  auto pck = [](const TrainResult& r) { return r.test.pck.value() ? format(*r.test.pck.value()) : std::string(); };
  const std::string summary = "run,test_pck,final_train_loss\nbaseline," + pck(base) + "," +
                              format(base.final_train_loss) + "\npolicy," + pck(searched) + "," +
                              format(searched.final_train_loss) + "\n";
  write_text(ctx.out_dir / "summary.csv", summary);
  *ctx.out << summary;
  return kSuccess;
}

int cmd_eval(const ExperimentConfig& config, const RunContext& ctx, const EvalOptions& options) {
  if (config.task != Task::Pose) throw ValueError("eval: only the pose task has a model to evaluate");
  const std::string split_name = options.split.value_or(config.eval.split);
  const bool flip = options.flip.value_or(config.eval.flip);
  pose::Split split;
  try {
    split = pose::parse_split(split_name);
  } catch (const ValueError& e) {
    *ctx.err << "eval: " << e.what() << "\n";
    return kUsageError;
  }
  net::P2Net model(config.net_config(), mix_seed(config.seed, kModelStream));
  try {
    net::load_checkpoint(model.parameters(), options.checkpoint);
  } catch (const Error& e) {
    *ctx.err << "eval: checkpoint rejected: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  const auto samples = load_split_checked(config, ctx, split);
  const EvalResult r = evaluate(model, samples, config, flip);
  write_report(ctx.out_dir, split_name, r, flip, options.checkpoint.string());
  *ctx.out << report_text(split_name, r, flip);
  if (r.samples == 0) {
    *ctx.err << "eval: no samples in split " << split_name << "\n";
    return kRuntimeFailure;
  }
  return kSuccess;
}

int cmd_gradcheck(const RunContext& ctx, const std::string& scope, std::size_t instances, std::uint64_t seed,
                  const std::vector<GradcheckCase>& cases) {
  std::vector<GradcheckRow> rows;
  try {
    rows = run_gradcheck(cases, scope, instances, seed);
  } catch (const ValueError& e) {
    *ctx.err << e.what() << "\n";
    return kUsageError;
  }
  const std::string table = format_gradcheck_table(rows);
  write_text(ctx.out_dir / "gradcheck.txt", table);
  *ctx.out << table;
  for (const GradcheckRow& r : rows)
    if (!r.passed) return kGradcheckFailure;
  return kSuccess;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"p2aug: differentiable augmentation search and pyramid pose estimation on synthetic scenes"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "p2aug_out";
  std::size_t jobs = 1;
  app.add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Experiment seed; overrides the config");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads for data generation")->check(CLI::PositiveNumber)->capture_default_str();

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic pose dataset");
  CLI::App* search = app.add_subcommand("search", "Search an augmentation policy");
  CLI::App* train = app.add_subcommand("train", "Train P2Net with a fixed policy");
  std::string policy_path;
  bool baseline = false;
  train->add_option("--policy", policy_path, "PolicyFile to augment with");
  train->add_flag("--baseline", baseline, "Also train without augmentation and write a two-row summary");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, split;
  bool no_flip = false, flip = false;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", split, "train, val or test (default from config)");
  eval->add_flag("--no-flip", no_flip, "Disable flip averaging");
  eval->add_flag("--flip", flip, "Enable flip averaging");
  CLI::App* grad = app.add_subcommand("gradcheck", "Check every differentiable op against finite differences");
  std::string scope = "all";
  std::size_t instances = 10;
  grad->add_option("scope", scope, "all or a module: autodiff, augment, policy, p2net")->capture_default_str();
  grad->add_option("--instances", instances, "Random instances per op")->check(CLI::PositiveNumber)->capture_default_str();
  for (CLI::App* sub : {gen, search, train, eval, grad}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }
  if (no_flip && flip) {
    err << "eval: --flip and --no-flip are exclusive\n";
    return kUsageError;
  }

  ExperimentConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
    if (*seed_opt) {
      config.seed = seed;
      config.data.spec.scene.seed = seed;
    }
    config.validate();
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kUsageError;
  }

  RunContext ctx{out_dir, jobs, &out, &err};
  try {
    fs::create_directories(ctx.out_dir);
    write_text(ctx.out_dir / "config.json", dump_config(config));
    if (*gen) return cmd_gen_data(config, ctx);
    if (*search) return cmd_search(config, ctx);
    if (*train) {
      TrainOptions opts;
      if (!policy_path.empty()) opts.policy = policy_path;
      opts.baseline = baseline;
      return cmd_train(config, ctx, opts);
    }
    if (*eval) {
      EvalOptions opts;
      opts.checkpoint = checkpoint;
      if (!split.empty()) opts.split = split;
      if (no_flip) opts.flip = false;
      if (flip) opts.flip = true;
      return cmd_eval(config, ctx, opts);
    }
    return cmd_gradcheck(ctx, scope, instances, config.seed);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace p2aug::app
