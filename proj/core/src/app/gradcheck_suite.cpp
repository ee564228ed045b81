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

#include "p2aug/app/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "p2aug/ad/tape.hpp"
#include "p2aug/aug/ops.hpp"
#include "p2aug/error.hpp"
#include "p2aug/net/p2net.hpp"
#include "p2aug/search/policy.hpp"

namespace p2aug::app {
namespace {

using ad::Shape;
using ad::Tensor;
using Inputs = std::vector<Tensor>;

Tensor uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

// Magnitudes in [lo, hi] with a random sign; keeps relu and clamp inputs off their kinks.
Tensor signed_away(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t = uniform(shape, rng, lo, hi);
  for (double& x : t.data_mut())
    if (rng.uniform() < 0.5) x = -x;
  return t;
}

// Scalar probe sum(out * r) with fixed random weights r.
Tensor probe(const Tensor& out, const Tensor& r) { return ad::sum(ad::mul(out, r)); }

ad::GradCheckReport check(const std::function<Tensor()>& out, Inputs inputs, Rng& rng,
                          const ad::GradCheckOptions& options) {
  Tensor r;
  {
    ad::NoGradGuard guard;
    r = uniform(out().shape(), rng, 0.5, 1.5);
  }
  return ad::check_gradients([&] { return probe(out(), r); }, inputs, options);
}

using UnaryFn = Tensor (*)(const Tensor&);

GradcheckCase unary(const std::string& op, UnaryFn fn, double lo, double hi, bool signed_inputs = false) {
  return {"autodiff", op, [=](Rng& rng, const ad::GradCheckOptions& o) {
            const Shape shape{2 + rng.below(3), 3 + rng.below(3)};
            Tensor a = signed_inputs ? signed_away(shape, rng, lo, hi) : uniform(shape, rng, lo, hi);
            return check([&] { return fn(a); }, {a}, rng, o);
          }};
}

GradcheckCase binary(const std::string& op, Tensor (*fn)(const Tensor&, const Tensor&)) {
  return {"autodiff", op, [=](Rng& rng, const ad::GradCheckOptions& o) {
            const Shape shape{2 + rng.below(3), 3};
            Tensor a = uniform(shape, rng);
            // Every third instance broadcasts a scalar operand.
            Tensor b = rng.below(3) == 0 ? uniform({1}, rng) : uniform(shape, rng);
            return check([&] { return fn(a, b); }, {a, b}, rng, o);
          }};
}

// Smooth test image: a few Gaussian blobs over a mid-grey base, well inside (0, 1).
Tensor smooth_image(std::size_t c, std::size_t size, Rng& rng) {
  std::vector<double> v(c * size * size, 0.35);
  for (int b = 0; b < 3; ++b) {
    const double cx = rng.uniform(2.0, size - 3.0), cy = rng.uniform(2.0, size - 3.0);
    const double s = rng.uniform(1.5, 3.0), amp = rng.uniform(0.05, 0.12);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t col = 0; col < size; ++col) {
          const double dx = col - cx, dy = r - cy;
          v[(ch * size + r) * size + col] += amp * std::exp(-(dx * dx + dy * dy) / (2 * s * s));
        }
  }
  return Tensor({c, size, size}, std::move(v));
}

void jitter_biases(const net::ParameterSet& params, Rng& rng) {
  for (const auto& [name, t] : params.entries()) {
    if (!name.ends_with(".bias")) continue;
    Tensor b = t;
    for (double& x : b.data_mut()) x = rng.uniform(0.02, 0.1) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
}

// Module-level case: a parameter set plus inputs, judged against one shared floor.
template <typename Build>
GradcheckCase module_case(const std::string& op, Build build) {
  return {"p2net", op, [=](Rng& rng, const ad::GradCheckOptions& o) {
            auto params = std::make_shared<net::ParameterSet>();
            Inputs inputs;
            std::function<Tensor()> out = build(*params, inputs, rng);
            jitter_biases(*params, rng);
            for (const Tensor& t : params->tensors()) inputs.push_back(t);
            ad::GradCheckOptions opts = o;
            opts.shared_floor = true;
            opts.max_coords = std::min<std::size_t>(o.max_coords, 12);
            return check(out, inputs, rng, opts);
          }};
}

const std::array<std::size_t, 4> kTinyWidths{4, 6, 8, 8};

net::Pyramid random_pyramid(std::size_t c2_extent, Rng& rng, Inputs& inputs) {
  net::Pyramid p;
  for (std::size_t l = 0; l < 4; ++l) {
    p.level[l] = uniform({kTinyWidths[l], c2_extent >> l, c2_extent >> l}, rng);
    inputs.push_back(p.level[l]);
  }
  return p;
}

std::vector<GradcheckCase> augment_cases() {
  std::vector<GradcheckCase> cases;
  for (aug::AugOpKind kind : aug::kAllKinds) {
    cases.push_back({"augment", std::string(aug::name(kind)), [kind](Rng& rng, const ad::GradCheckOptions& o) {
                       aug::Sample s;
                       s.image = smooth_image(1, 12, rng);
                       Tensor m = Tensor::scalar(rng.uniform(0.1, 0.9));
                       Inputs inputs{s.image};
                       if (aug::info(kind).magnitude_differentiable) inputs.push_back(m);
                       return check([&] { return aug::apply_op(s, kind, m).image; }, inputs, rng, o);
                     }});
  }
  return cases;
}

search::Policy random_policy(std::size_t k, std::size_t n, Rng& rng) {
  search::Policy p = search::Policy::random(k, n, rng);
  for (double& l : p.logits().data_mut()) l = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      search::OperationSlot& s = p.slot(i, j);
      s.p_logit.data_mut()[0] = rng.uniform(-1.5, 1.5);
      s.magnitude.data_mut()[0] = rng.uniform(0.1, 0.9);
    }
  return p;
}

std::vector<GradcheckCase> policy_cases() {
  std::vector<GradcheckCase> cases;
  cases.push_back({"policy", "relax_categorical", [](Rng& rng, const ad::GradCheckOptions& o) {
                     const search::Policy p = random_policy(2 + rng.below(5), 1, rng);
                     const auto draw = search::GumbelDraw::sample(p.k(), 1, rng);
                     return check([&] { return search::relax_categorical(p, draw); }, {p.logits()}, rng, o);
                   }});
  cases.push_back({"policy", "relax_bernoulli", [](Rng& rng, const ad::GradCheckOptions& o) {
                     const search::Policy p = random_policy(1, 1, rng);
                     const double u = rng.uniform_open(), tau = rng.uniform(0.3, 2.0);
                     return check([&] { return search::relax_bernoulli(p.slot(0, 0), u, tau); }, {p.slot(0, 0).p_logit},
                                  rng, o);
                   }});
  cases.push_back({"policy", "apply_gated_op", [](Rng& rng, const ad::GradCheckOptions& o) {
                     const search::Policy p = random_policy(1, 1, rng);
                     const search::OperationSlot& slot = p.slot(0, 0);
                     aug::Sample s;
                     s.image = smooth_image(1, 12, rng);
                     const double u = rng.uniform_open();
                     Inputs inputs{s.image, slot.p_logit};
                     if (aug::info(slot.kind).magnitude_differentiable) inputs.push_back(slot.magnitude);
                     return check(
                         [&] { return search::apply_gated_op(s, slot, search::relax_bernoulli(slot, u, 1.0)).image; },
                         inputs, rng, o);
                   }});
  cases.push_back({"policy", "apply_policy", [](Rng& rng, const ad::GradCheckOptions& o) {
                     const search::Policy p = random_policy(3, 2, rng);
                     aug::Sample s;
                     s.image = smooth_image(1, 12, rng);
                     const auto draw = search::GumbelDraw::sample(p.k(), p.n(), rng);
                     Inputs inputs = p.parameters();
                     inputs.push_back(s.image);
                     ad::GradCheckOptions opts = o;
                     opts.shared_floor = true;
                     return check([&] { return search::apply_policy(s, p, draw).image; }, inputs, rng, opts);
                   }});
  return cases;
}

std::vector<GradcheckCase> p2net_cases() {
  std::vector<GradcheckCase> cases;
  cases.push_back(module_case("residual_block", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::ResidualBlock>(ps, "block", 3, rng);
    Tensor x = uniform({3, 6, 6}, rng);
    in.push_back(x);
    return std::function<Tensor()>([block, x] { return (*block)(x); });
  }));
  cases.push_back(module_case("dilated_bottleneck", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::DilatedBottleneck>(ps, "bottleneck", 4, rng);
    Tensor x = uniform({4, 7, 7}, rng);
    in.push_back(x);
    return std::function<Tensor()>([block, x] { return (*block)(x); });
  }));
  cases.push_back(module_case("attention_module", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::AttentionModule>(ps, "attention", 4, rng);
    Tensor x = uniform({4, 5, 5}, rng);
    in.push_back(x);
    return std::function<Tensor()>([block, x] { return (*block)(x); });
  }));
  cases.push_back(module_case("backbone", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::Backbone>(ps, "backbone", 1, kTinyWidths, 1, rng);
    Tensor x = uniform({1, 32, 32}, rng, 0.0, 1.0);
    in.push_back(x);
    return std::function<Tensor()>([block, x] {
      const net::Pyramid p = (*block)(x);
      Tensor acc = ad::sum(p.level[0]);
      for (std::size_t l = 1; l < 4; ++l) acc = ad::add(acc, ad::sum(p.level[l]));
      return acc;
    });
  }));
  cases.push_back(module_case("parallel_fusion", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::ParallelFusion>(ps, "parallel", kTinyWidths, rng);
    const net::Pyramid p = random_pyramid(8, rng, in);
    return std::function<Tensor()>([block, p] {
      const net::Pyramid f = (*block)(p);
      return ad::add(ad::add(ad::sum(ad::mul(f.level[0], f.level[0])), ad::sum(f.level[1])), ad::sum(f.level[2]));
    });
  }));
  cases.push_back(module_case("progressive_fusion", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::ProgressiveFusion>(ps, "progressive", kTinyWidths, rng);
    const net::Pyramid p = random_pyramid(8, rng, in);
    return std::function<Tensor()>([block, p] {
      const net::Pyramid f = (*block)(p);
      return ad::add(ad::sum(ad::mul(f.level[0], f.level[0])), ad::sum(f.level[1]));
    });
  }));
  cases.push_back(module_case("refinement_head", [](net::ParameterSet& ps, Inputs& in, Rng& rng) {
    auto block = std::make_shared<net::RefinementHead>(ps, "head", kTinyWidths, 3, rng);
    const net::Pyramid p = random_pyramid(8, rng, in);
    return std::function<Tensor()>([block, p] {
      const net::HeatmapPair h = (*block)(p);
      return ad::add(ad::sum(h.stage1), ad::sum(ad::mul(h.stage2, h.stage2)));
    });
  }));
  cases.push_back({"p2net", "p2net", [](Rng& rng, const ad::GradCheckOptions& o) {
                     net::P2NetConfig cfg;
                     cfg.widths = kTinyWidths;
                     cfg.joints = 3;
                     net::P2Net model(cfg, rng.next_u64());
                     jitter_biases(model.parameters(), rng);
                     Tensor x = uniform({1, 32, 32}, rng, 0.0, 1.0);
                     const Tensor target = uniform({3, 8, 8}, rng, 0.0, 1.0);
                     const std::vector<bool> vis{true, true, true};
                     Inputs inputs = model.parameters().tensors();
                     inputs.push_back(x);
                     ad::GradCheckOptions opts = o;
                     opts.shared_floor = true;
                     opts.max_coords = std::min<std::size_t>(o.max_coords, 6);
                     return ad::check_gradients(
                         [&] { return net::training_loss(model.forward(x), target, vis, 2); }, inputs, opts);
                   }});
  cases.push_back({"p2net", "l2_loss", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor pred = uniform({4, 5, 5}, rng);
                     const Tensor target = uniform({4, 5, 5}, rng);
                     const std::vector<bool> vis{true, false, true, true};
                     Inputs inputs{pred};
                     return ad::check_gradients([&] { return net::l2_loss(pred, target, vis); }, inputs, o);
                   }});
  cases.push_back({"p2net", "ohkm_loss", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor pred = uniform({6, 4, 4}, rng);
                     const Tensor target = uniform({6, 4, 4}, rng);
                     const std::vector<bool> vis{true, true, false, true, true, true};
                     const std::size_t alpha = 1 + rng.below(5);
                     Inputs inputs{pred};
                     return ad::check_gradients([&] { return net::ohkm_loss(pred, target, vis, alpha); }, inputs, o);
                   }});
  return cases;
}

}  // namespace

GradcheckCase conv2d_case(Conv2dFn conv) {
  return {"autodiff", "conv2d", [conv](Rng& rng, const ad::GradCheckOptions& o) {
            ad::Conv2dOptions opts;
            opts.stride = 1 + rng.below(2);
            opts.dilation = 1 + rng.below(2);
            const std::size_t kernel = rng.below(2) == 0 ? 1 : 3;
            opts.padding = kernel == 3 ? opts.dilation : 0;
            Tensor x = uniform({2, 7, 7}, rng);
            Tensor w = uniform({3, 2, kernel, kernel}, rng);
            Tensor b = uniform({3}, rng);
            return check([&] { return conv(x, w, b, opts); }, {x, w, b}, rng, o);
          }};
}

std::vector<GradcheckCase> default_gradcheck_cases() {
  std::vector<GradcheckCase> cases;
  cases.push_back(binary("add", &ad::add));
  cases.push_back(binary("sub", &ad::sub));
  cases.push_back(binary("mul", &ad::mul));
  cases.push_back({"autodiff", "scale", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({3, 4}, rng);
                     const double f = rng.uniform(-2.0, 2.0);
                     return check([&] { return ad::scale(a, f); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "add_scalar", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({3, 4}, rng);
                     const double v = rng.uniform(-2.0, 2.0);
                     return check([&] { return ad::add_scalar(a, v); }, {a}, rng, o);
                   }});
  cases.push_back(unary("exp", &ad::exp, -1.0, 1.0));
  cases.push_back(unary("log", &ad::log, 0.3, 2.0));
  cases.push_back(unary("sigmoid", &ad::sigmoid, -3.0, 3.0));
  cases.push_back(unary("relu", &ad::relu, 0.05, 1.0, true));
  cases.push_back(unary("negate", &ad::neg, -1.0, 1.0));
  cases.push_back({"autodiff", "clamp", [](Rng& rng, const ad::GradCheckOptions& o) {
                     // Values on both sides of both bounds, none within 0.05 of them.
                     Tensor a = uniform({4, 4}, rng, 0.05, 0.45);
                     for (double& x : a.data_mut()) x = (rng.below(2) ? 0.5 : 0.0) + x * (rng.below(2) ? 1 : -1);
                     return check([&] { return ad::clamp(a, 0.0, 0.5); }, {a}, rng, o);
                   }});
  cases.push_back(unary("sum", &ad::sum, -1.0, 1.0));
  cases.push_back(unary("mean", &ad::mean, -1.0, 1.0));
  cases.push_back({"autodiff", "reshape", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2, 6}, rng);
                     return check([&] { return ad::reshape(a, {3, 4}); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "select", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({7}, rng);
                     const std::size_t i = rng.below(7);
                     return check([&] { return ad::select(a, i); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "gather", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({6}, rng);
                     std::vector<std::size_t> idx(4);
                     for (auto& i : idx) i = rng.below(6);  // repeats accumulate
                     return check([&] { return ad::gather(a, idx); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "softmax", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2 + rng.below(6)}, rng, -2.0, 2.0);
                     return check([&] { return ad::softmax(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "log_softmax", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2 + rng.below(6)}, rng, -2.0, 2.0);
                     return check([&] { return ad::log_softmax(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "matmul", [](Rng& rng, const ad::GradCheckOptions& o) {
                     const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
                     Tensor a = uniform({m, k}, rng), b = uniform({k, n}, rng);
                     return check([&] { return ad::matmul(a, b); }, {a, b}, rng, o);
                   }});
  cases.push_back(conv2d_case());
  cases.push_back({"autodiff", "upsample2x_nearest", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2, 3, 4}, rng);
                     return check([&] { return ad::upsample2x(a, ad::UpsampleMode::Nearest); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "upsample2x_bilinear", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2, 3, 4}, rng);
                     return check([&] { return ad::upsample2x(a, ad::UpsampleMode::Bilinear); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "downsample2x", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2, 4, 6}, rng);
                     return check([&] { return ad::downsample2x(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "global_avg_pool", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({3, 4, 5}, rng);
                     return check([&] { return ad::global_avg_pool(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "channel_mean", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({3, 4, 5}, rng);
                     return check([&] { return ad::channel_mean(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "concat_channels", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({1, 3, 3}, rng), b = uniform({2, 3, 3}, rng);
                     return check([&] { return ad::concat_channels(std::vector<Tensor>{a, b, a}); }, {a, b}, rng, o);
                   }});
  cases.push_back({"autodiff", "scale_channels", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({3, 4, 4}, rng), w = uniform({3}, rng);
                     return check([&] { return ad::scale_channels(a, w); }, {a, w}, rng, o);
                   }});
  cases.push_back({"autodiff", "flip_horizontal", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor a = uniform({2, 3, 5}, rng);
                     return check([&] { return ad::flip_horizontal(a); }, {a}, rng, o);
                   }});
  cases.push_back({"autodiff", "warp_affine", [](Rng& rng, const ad::GradCheckOptions& o) {
                     Tensor x = smooth_image(2, 10, rng);
                     const double ang = rng.uniform(-0.4, 0.4), s = rng.uniform(0.8, 1.2);
                     Tensor a({2, 3}, {s * std::cos(ang), -s * std::sin(ang), rng.uniform(-1.3, 1.3),
                                       s * std::sin(ang), s * std::cos(ang), rng.uniform(-1.3, 1.3)});
                     return check([&] { return ad::warp_affine(x, a); }, {x, a}, rng, o);
                   }});
  for (auto& c : augment_cases()) cases.push_back(std::move(c));
  for (auto& c : policy_cases()) cases.push_back(std::move(c));
  for (auto& c : p2net_cases()) cases.push_back(std::move(c));
  return cases;
}

std::vector<std::string> gradcheck_modules(const std::vector<GradcheckCase>& cases) {
  std::vector<std::string> out;
  for (const GradcheckCase& c : cases)
    if (std::find(out.begin(), out.end(), c.module) == out.end()) out.push_back(c.module);
  return out;
}

std::vector<GradcheckRow> run_gradcheck(const std::vector<GradcheckCase>& cases, std::string_view scope,
                                        std::size_t instances, std::uint64_t seed,
                                        const ad::GradCheckOptions& options) {
  const auto modules = gradcheck_modules(cases);
  if (scope != "all" && std::find(modules.begin(), modules.end(), scope) == modules.end()) {
    std::string known = "all";
    for (const auto& m : modules) known += ", " + m;
    throw ValueError("gradcheck: unknown scope '" + std::string(scope) + "' (expected one of: " + known + ")");
  }
  std::vector<GradcheckRow> rows;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const GradcheckCase& gc = cases[c];
    if (scope != "all" && gc.module != scope) continue;
    GradcheckRow row{gc.module, gc.op, instances, 0.0, options.tolerance, true, ""};
    for (std::size_t i = 0; i < instances; ++i) {
      Rng rng(mix_seed(seed, c * 1000 + i));
      ad::GradCheckOptions opts = options;
      opts.seed = rng.next_u64();
      const ad::GradCheckReport r = gc.run(rng, opts);
      if (r.max_rel_error >= row.max_rel_error) {
        row.max_rel_error = r.max_rel_error;
        row.worst = "instance#" + std::to_string(i) + " " + r.worst;
      }
      row.passed = row.passed && r.passed;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-22s %9s %13s %10s  %s\n", "module", "op", "instances", "max_rel_err",
                "tolerance", "status");
  out += line;
  std::size_t failed = 0;
  for (const GradcheckRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-10s %-22s %9zu %13.3e %10.1e  %s", r.module.c_str(), r.op.c_str(),
                  r.instances, r.max_rel_error, r.tolerance, r.passed ? "PASS" : "FAIL");
    out += line;
    if (!r.passed) {
      out += "  (worst " + r.worst + ")";
      ++failed;
    }
    out += "\n";
  }
  std::snprintf(line, sizeof(line), "%zu ops, %zu failed\n", rows.size(), failed);
  out += line;
  return out;
}

}  // namespace p2aug::app
