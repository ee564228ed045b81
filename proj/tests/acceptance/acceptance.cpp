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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "p2aug/ad/optim.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/app/commands.hpp"
#include "p2aug/app/gradcheck_suite.hpp"
#include "p2aug/net/p2net.hpp"
#include "p2aug/pose/heatmaps.hpp"
#include "p2aug/rng.hpp"
#include "p2aug/search/bilevel.hpp"
#include "p2aug/search/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using p2aug::Rng;
using p2aug::ad::Tensor;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  // Records a failed check; the first few messages are kept.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (passed || failures < 3) detail << (detail.tellp() > 0 ? "; " : "") << what;
    passed = false;
    ++failures;
  }
  int failures = 0;
};

struct Env {
  fs::path work;
  fs::path configs;
  std::size_t jobs = 1;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args, std::ostream& log) {
  std::vector<const char*> argv{"p2aug"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return p2aug::app::run_cli(static_cast<int>(argv.size()), argv.data(), log, log);
}

Tensor random_tensor(const p2aug::ad::Shape& shape, Rng& rng) {
  std::vector<double> v(p2aug::ad::numel_of(shape));
  for (double& x : v) x = rng.normal();
  return Tensor(shape, std::move(v));
}

bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

// 1 ---------------------------------------------------------------------------

void gradient_correctness(const Env&, Outcome& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = p2aug::app::default_gradcheck_cases();
  const auto rows = p2aug::app::run_gradcheck(cases, "all", 10, 0);
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  std::string worst_op;
  for (const auto& r : rows) {
    out.require(r.passed, r.module + "/" + r.op + " rel err " + fmt(r.max_rel_error));
    out.require(r.instances >= 10, r.op + " ran " + std::to_string(r.instances) + " instances");
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_op = r.op;
    }
  }
  out.require(elapsed < 120.0, "took " + fmt(elapsed) + " s");
  out.detail << (out.passed ? "" : "; ") << rows.size() << " ops x 10 instances, worst " << fmt(worst, 2) << " ("
             << worst_op << "), " << fmt(elapsed, 3) << " s";
}

// 2 ---------------------------------------------------------------------------

void relaxation_fidelity(const Env&, Outcome& out) {
  using namespace p2aug::search;
  p2aug::ad::NoGradGuard no_grad;
  Rng rng(2024);
  constexpr int kDraws = 100000;

  // Sub-policy choice: argmax of the relaxed weights follows pi.
  Policy policy(5, 1);
  std::vector<double> logits{0.3, -1.2, 0.9, 0.0, -0.4};
  std::copy(logits.begin(), logits.end(), policy.logits().data_mut().begin());
  policy.project();
  const std::vector<double> pi = policy.pi();
  std::vector<int> hits(5, 0);
  for (int t = 0; t < kDraws; ++t) {
    const Tensor c = relax_categorical(policy, GumbelDraw::sample(5, 1, rng));
    const auto d = c.data();
    ++hits[std::max_element(d.begin(), d.end()) - d.begin()];
  }
  double worst_sigma = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const double sd = std::sqrt(pi[k] * (1.0 - pi[k]) / kDraws);
    const double z = std::abs(hits[k] / static_cast<double>(kDraws) - pi[k]) / sd;
    worst_sigma = std::max(worst_sigma, z);
    out.require(z <= 4.0, "pi[" + std::to_string(k) + "] off by " + fmt(z) + " sigma");
  }

  // Gates: P(b > 0.5) = p.
  for (double p : {0.1, 0.5, 0.85}) {
    OperationSlot slot{p2aug::aug::AugOpKind::Rotate, Tensor::scalar(std::log(p / (1.0 - p))), Tensor::scalar(0.5)};
    int above = 0;
    for (int t = 0; t < kDraws; ++t) above += relax_bernoulli(slot, rng.uniform_open(), 1.0).item() > 0.5;
    const double z = std::abs(above / static_cast<double>(kDraws) - p) / std::sqrt(p * (1.0 - p) / kDraws);
    worst_sigma = std::max(worst_sigma, z);
    out.require(z <= 4.0, "gate p=" + fmt(p) + " off by " + fmt(z) + " sigma");
  }

  // tau = 1e-3 against the hard choice. Draws whose top two scores (or whose gate logit)
  // lie within 0.05 are skipped: at this temperature the softmax is within 1e-6 of
  // one-hot only once the gap exceeds about 0.014.
  double worst_gap = 0.0;
  int checked = 0;
  while (checked < 200) {
    Policy hard(6, 2, 1e-3, 1e-3);
    std::vector<double> l(6);
    for (double& x : l) x = rng.normal();
    std::copy(l.begin(), l.end(), hard.logits().data_mut().begin());
    hard.project();
    for (std::size_t k = 0; k < 6; ++k)
      for (std::size_t n = 0; n < 2; ++n) hard.slot(k, n).p_logit.data_mut()[0] = rng.normal();
    const GumbelDraw draw = GumbelDraw::sample(6, 2, rng);
    std::vector<double> score(6);
    const auto lp = hard.logits().data();
    for (std::size_t k = 0; k < 6; ++k) score[k] = lp[k] + draw.gumbel[k];
    std::vector<double> sorted = score;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 0.05) continue;
    const HardDecision decision = sample_hard(hard, draw);
    bool near_tie = false;
    for (std::size_t n = 0; n < 2; ++n) {
      const double u = draw.gate_uniforms[decision.sub_policy * 2 + n];
      near_tie |= std::abs(hard.slot(decision.sub_policy, n).p_logit.item() + std::log(u / (1.0 - u))) < 0.05;
    }
    if (near_tie) continue;
    ++checked;
    const Tensor c = relax_categorical(hard, draw);
    for (std::size_t k = 0; k < 6; ++k)
      worst_gap = std::max(worst_gap, std::abs(c[k] - (k == decision.sub_policy ? 1.0 : 0.0)));
    for (std::size_t n = 0; n < 2; ++n) {
      const double u = draw.gate_uniforms[decision.sub_policy * 2 + n];
      const double b = relax_bernoulli(hard.slot(decision.sub_policy, n), u, 1e-3).item();
      worst_gap = std::max(worst_gap, std::abs(b - (decision.gates[n] ? 1.0 : 0.0)));
    }
  }
  out.require(worst_gap <= 1e-6, "low-temperature gap " + fmt(worst_gap));
  out.detail << (out.passed ? "" : "; ") << "worst deviation " << fmt(worst_sigma, 3) << " sigma over 1e5 draws, tau=1e-3 gap "
             << fmt(worst_gap, 2);
}

// 3 ---------------------------------------------------------------------------

void bilevel_oracle(const Env& env, Outcome& out) {
  using namespace p2aug::search;
  Rng rng(3);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double omega = rng.uniform(-2.0, 2.0), d = rng.uniform(-2.0, 2.0), zeta = rng.uniform(1e-3, 0.3);
    QuadraticToyProblem toy(omega, d);
    p2aug::ad::Sgd omega_opt(zeta), d_opt(0.0);
    hypergrad_step(toy, omega_opt, d_opt, {.zeta = zeta});
    // omega_k = omega - zeta * 2 (omega - d); the mixed second derivative of (omega - d)^2
    // is -2 and grad L_val(omega_k) = 2 omega_k, so grad_d = -zeta * (-2) * 2 omega_k.
    const double omega_k = omega - zeta * 2.0 * (omega - d);
    const double exact = 4.0 * zeta * omega_k;
    const double got = toy.d_tensor().has_grad() ? toy.d_tensor().grad()[0] : 0.0;
    worst = std::max(worst, std::abs(got - exact));
  }
  out.require(worst <= 1e-6, "hypergradient error " + fmt(worst));

  const fs::path dir = env.work / "c3";
  fs::create_directories(dir);
  const fs::path cfg = dir / "toy.json";
  std::ofstream(cfg) << R"({"task": "quadratic_toy", "search": {"steps": 500}})";
  std::ofstream log(dir / "log.txt");
  const int code = cli({"search", "--config", cfg.string(), "--out", dir.string()}, log);
  out.require(code == 0, "toy search exited " + std::to_string(code));
  double final_omega = NAN;
  if (code == 0) {
    const json result = json::parse(slurp(dir / "toy_result.json"));
    final_omega = result["omega"].get<double>();
    out.require(std::abs(final_omega) < 1e-2, "|omega| = " + fmt(std::abs(final_omega)) + " after 500 steps");
  }
  out.detail << (out.passed ? "" : "; ") << "max hypergradient error " << fmt(worst, 2) << " at 20 points, omega after 500 steps "
             << fmt(final_omega, 3);
}

// 4 ---------------------------------------------------------------------------

// Sort-and-average over visible keypoints, summing the kept ones in keypoint order.
double ohkm_oracle(const Tensor& pred, const Tensor& target, const std::vector<bool>& visible, std::size_t alpha) {
  const std::size_t j = pred.dim(0), hw = pred.dim(1) * pred.dim(2);
  std::vector<std::pair<double, std::size_t>> errors;
  for (std::size_t k = 0; k < j; ++k) {
    if (!visible[k]) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      const double diff = pred[k * hw + i] - target[k * hw + i];
      s += diff * diff;
    }
    errors.emplace_back(s / static_cast<double>(hw), k);
  }
  std::stable_sort(errors.begin(), errors.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  errors.resize(std::min(alpha, errors.size()));
  std::sort(errors.begin(), errors.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  double total = 0.0;
  for (const auto& e : errors) total += e.first;
  return total / static_cast<double>(errors.size());
}

void ohkm_oracle_check(const Env&, Outcome& out) {
  using p2aug::net::l2_loss;
  using p2aug::net::ohkm_loss;
  Rng rng(4);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t j = 2 + rng.below(16);
    const std::size_t h = 2 + rng.below(6), w = 2 + rng.below(6);
    const Tensor pred = random_tensor({j, h, w}, rng), target = random_tensor({j, h, w}, rng);
    std::vector<bool> visible(j);
    for (std::size_t k = 0; k < j; ++k) visible[k] = rng.uniform() < 0.8;
    visible[rng.below(j)] = true;
    const std::size_t alpha = 1 + rng.below(j);
    mismatches += ohkm_loss(pred, target, visible, alpha).item() != ohkm_oracle(pred, target, visible, alpha);
    mismatches += ohkm_loss(pred, target, visible, j).item() != l2_loss(pred, target, visible).item();
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " mismatches against the oracle");

  // alpha = 10 of 17: exactly ten keypoints receive gradient.
  const Tensor target = random_tensor({17, 4, 4}, rng);
  Tensor pred = random_tensor({17, 4, 4}, rng);
  p2aug::ad::Tape tape;
  p2aug::ad::Tape::Scope scope(tape);
  pred.set_requires_grad(true);
  tape.backward(ohkm_loss(pred, target, std::vector<bool>(17, true), 10));
  int selected = 0;
  for (std::size_t k = 0; k < 17; ++k) {
    bool any = false;
    for (std::size_t i = 0; i < 16; ++i) any |= pred.grad()[k * 16 + i] != 0.0;
    selected += any;
  }
  out.require(selected == 10, "alpha=10 selected " + std::to_string(selected) + " of 17");
  out.detail << (out.passed ? "" : "; ") << "100 instances bit-exact, alpha=J equals l2, alpha=10 selects " << selected
             << " of 17";
}

// 5 ---------------------------------------------------------------------------

void architecture_invariants(const Env&, Outcome& out) {
  using namespace p2aug::net;
  P2NetConfig config;
  config.widths = {8, 12, 16, 16};
  Rng rng(5);

  P2Net net(config, 5);
  Pyramid p;
  for (std::size_t l = 0; l < 4; ++l) p.level[l] = random_tensor({config.widths[l], 16u >> l, 16u >> l}, rng);
  net.parallel_fusion().zero();
  const Pyramid par = net.parallel_fusion()(p);
  net.progressive_fusion().zero();
  const Pyramid prog = net.progressive_fusion()(p);
  for (std::size_t l = 0; l < 4; ++l) {
    out.require(identical(par.level[l], p.level[l]), "parallel fusion not identity at level " + std::to_string(l));
    out.require(identical(prog.level[l], p.level[l]), "progressive fusion not identity at level " + std::to_string(l));
  }

  ParameterSet params;
  DilatedBottleneck bottleneck(params, "b", 12, rng);
  bottleneck.reduce.zero();
  bottleneck.dilated.zero();
  bottleneck.expand.zero();
  const Tensor x = random_tensor({12, 7, 9}, rng);
  out.require(identical(bottleneck(x), x), "zero bottleneck is not identity");

  AttentionModule attention(params, "a", 12, rng);
  attention.fc.zero();
  const Tensor y = attention(x);
  bool half = y.shape() == x.shape();
  for (std::size_t i = 0; half && i < x.numel(); ++i) half = y[i] == 0.5 * x[i];
  out.require(half, "zero attention is not 0.5 x identity");

  // Pyramid extents: level l is the input divided by 4 * 2^l.
  P2Net full(config, 6);
  const std::vector<std::pair<std::size_t, std::size_t>> sizes{{64, 64}, {96, 64}, {128, 160}};
  for (const auto& [h, w] : sizes) {
    const Pyramid q = full.backbone()(random_tensor({1, h, w}, rng));
    for (std::size_t l = 0; l < 4; ++l) {
      const std::size_t div = 4u << l;
      const p2aug::ad::Shape want{config.widths[l], h / div, w / div};
      out.require(q.level[l].shape() == want, std::to_string(h) + "x" + std::to_string(w) + " level " +
                                                  std::to_string(l) + " is " + p2aug::ad::to_string(q.level[l].shape()));
    }
    const HeatmapPair maps = full.forward(random_tensor({1, h, w}, rng));
    const p2aug::ad::Shape heat{config.joints, h / 4, w / 4};
    out.require(maps.stage1.shape() == heat && maps.stage2.shape() == heat, "heatmap extents at " + std::to_string(h));
  }
  out.detail << (out.passed ? "" : "; ") << "zero branches are identity, zero attention halves, shapes hold for 64x64 96x64 128x160";
}

// 6 ---------------------------------------------------------------------------

void quarter_shift_decoding(const Env&, Outcome& out) {
  using namespace p2aug::pose;
  Rng rng(6);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double cx = rng.uniform(1.0, 22.0), cy = rng.uniform(1.0, 22.0);
    std::vector<double> v(24 * 24);
    for (std::size_t r = 0; r < 24; ++r)
      for (std::size_t c = 0; c < 24; ++c) {
        const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
        v[r * 24 + c] = std::exp(-(dx * dx + dy * dy) / 2.0);
      }
    const auto d = decode_cells(Tensor({1, 24, 24}, std::move(v)));
    worst = std::max({worst, std::abs(d[0].x - cx), std::abs(d[0].y - cy)});
  }
  out.require(worst <= 0.5, "recovery error " + fmt(worst) + " cells");

  std::vector<double> v(20 * 20, 0.0);
  v[10 * 20 + 10] = 1.0;
  v[10 * 20 + 11] = 0.7;
  v[10 * 20 + 9] = 0.2;
  const auto d = decode_cells(Tensor({1, 20, 20}, v));
  out.require(d[0].x == 10.25 && d[0].y == 10.0, "peak (10,10) with larger (10,11) decoded to (" + fmt(d[0].y) + "," +
                                                     fmt(d[0].x) + ")");
  out.detail << (out.passed ? "" : "; ") << "worst recovery " << fmt(worst, 3) << " cells over 100 centres, (10,10)/(10,11) -> x "
             << d[0].x;
}

// 7 ---------------------------------------------------------------------------

std::map<std::string, double> read_summary(const fs::path& csv) {
  std::map<std::string, double> pck;
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    pck[line.substr(0, a)] = std::stod(line.substr(a + 1, b - a - 1));
  }
  return pck;
}

void end_to_end(const Env& env, Outcome& out) {
  const fs::path cfg = env.configs / "end_to_end.json";
  const auto start = std::chrono::steady_clock::now();
  int wins = 0;
  std::ostringstream seeds;
  for (int seed = 0; seed < 5; ++seed) {
    const fs::path dir = env.work / "c7" / ("seed" + std::to_string(seed));
    fs::create_directories(dir);
    std::ofstream log(dir / "log.txt");
    const std::vector<std::string> common{"--config", cfg.string(), "--out", dir.string(), "--seed",
                                          std::to_string(seed), "--jobs", std::to_string(env.jobs)};
    auto step = [&](std::vector<std::string> args) {
      args.insert(args.end(), common.begin(), common.end());
      return cli(args, log);
    };
    int code = step({"gen-data"});
    if (code == 0) code = step({"search"});
    if (code == 0) code = step({"train", "--policy", (dir / "policy.json").string(), "--baseline"});
    out.require(code == 0, "seed " + std::to_string(seed) + " pipeline exited " + std::to_string(code));
    if (code != 0) continue;
    const auto pck = read_summary(dir / "summary.csv");
    const double base = pck.at("baseline"), pol = pck.at("policy");
    wins += pol > base;
    seeds << (seed ? ", " : "") << "seed " << seed << " " << fmt(base) << " -> " << fmt(pol);
  }
  const double minutes = seconds_since(start) / 60.0;
  out.require(wins >= 4, "policy ahead in " + std::to_string(wins) + " of 5 seeds");
  out.require(minutes < 30.0, "pipeline took " + fmt(minutes) + " min");
  out.detail << (out.passed ? "" : "; ") << "policy ahead in " << wins << "/5 (" << seeds.str() << "), "
             << fmt(minutes, 3) << " min";
}

// 8 ---------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "log.txt")
      files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  return files;
}

void reproducibility(const Env& env, Outcome& out) {
  const fs::path cfg = env.configs / "reproducibility.json";
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = env.work / "c8" / name;
    fs::create_directories(dir);
    std::ofstream log(dir / "log.txt");
    for (const char* command : {"gen-data", "search", "train"}) {
      const int code =
          cli({command, "--config", cfg.string(), "--out", dir.string(), "--seed", "11", "--jobs", std::to_string(env.jobs)},
              log);
      out.require(code == 0, std::string(command) + " exited " + std::to_string(code));
    }
    runs.push_back(tree(dir));
  }
  std::size_t differing = 0;
  std::set<std::string> names;
  for (const auto& run : runs)
    for (const auto& [name, bytes] : run) names.insert(name);
  for (const auto& name : names) {
    const auto a = runs[0].find(name), b = runs[1].find(name);
    const bool same = a != runs[0].end() && b != runs[1].end() && a->second == b->second;
    if (!same) ++differing;
    out.require(same, name + " differs");
  }
  out.detail << (out.passed ? "" : "; ") << names.size() - differing << "/" << names.size()
             << " files byte-identical across gen-data, search and train";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p2aug acceptance checks"};
  Env env;
  env.work = fs::temp_directory_path() / "p2aug_acceptance";
  env.configs = P2AUG_ACCEPTANCE_CONFIGS;
  std::vector<int> only;
  app.add_option("--work", env.work, "Scratch directory (recreated)");
  app.add_option("--configs", env.configs, "Directory holding end_to_end.json and reproducibility.json");
  app.add_option("--jobs", env.jobs, "Threads for data generation")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<void(const Env&, Outcome&)>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"relaxation fidelity", relaxation_fidelity},
      {"bi-level oracle", bilevel_oracle},
      {"OHKM oracle", ohkm_oracle_check},
      {"architecture invariants", architecture_invariants},
      {"quarter-shift decoding", quarter_shift_decoding},
      {"end-to-end directional result", end_to_end},
      {"reproducibility", reproducibility},
  };

  fs::remove_all(env.work);
  fs::create_directories(env.work);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    Outcome outcome;
    try {
      criteria[i].second(env, outcome);
    } catch (const std::exception& e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    failed += !outcome.passed;
    std::cout << "criterion " << number << " " << criteria[i].first << ": " << (outcome.passed ? "PASS" : "FAIL") << " ("
              << outcome.detail.str() << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
