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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "p2aug/error.hpp"
#include "p2aug/log.hpp"
#include "p2aug/net/p2net.hpp"
#include "support/fd_oracle.hpp"

namespace p2aug::net {
namespace {

using ad::Tensor;
using p2aug::testing::analytic_grad;
using p2aug::testing::max_grad_error;
using p2aug::testing::project;
using p2aug::testing::random_tensor;

P2NetConfig tiny_config(std::size_t in_channels = 1, std::size_t joints = 3) {
  P2NetConfig c;
  c.in_channels = in_channels;
  c.widths = {4, 6, 8, 8};
  c.joints = joints;
  return c;
}

Pyramid random_pyramid(const std::array<std::size_t, 4>& widths, std::size_t c2_extent, Rng& rng) {
  Pyramid p;
  for (std::size_t l = 0; l < 4; ++l) {
    const std::size_t e = c2_extent >> l;
    p.level[l] = random_tensor({widths[l], e, e}, rng);
  }
  return p;
}

// Zero-initialized biases put every all-zero (dead) patch exactly on the next relu's
// kink, where central differences straddle the corner. Small nonzero biases move them off.
void jitter_biases(ParameterSet& params, Rng& rng) {
  for (const auto& [name, t] : params.entries()) {
    if (!name.ends_with(".bias")) continue;
    ad::Tensor b = t;
    for (double& v : b.data_mut()) v = rng.uniform(0.02, 0.1) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
}

double gradient_scale(const std::function<Tensor()>& fn, const ParameterSet& params) {
  double scale = 0.0;
  for (const auto& [name, t] : params.entries()) {
    Tensor param = t;
    for (double g : analytic_grad(fn, param)) scale = std::max(scale, std::abs(g));
  }
  return scale;
}

void expect_same(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]) << i;
}

TEST(Backbone, PyramidExtentsHalve) {
  P2NetConfig cfg;
  P2Net net(cfg, 1);
  Rng rng(1);
  Pyramid p = net.backbone()(random_tensor({1, 64, 64}, rng, 0, 1));
  const std::array<std::size_t, 4> extent{16, 8, 4, 2};
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_EQ(p.level[l].shape(), (ad::Shape{cfg.widths[l], extent[l], extent[l]}));
  }
  Pyramid q = net.backbone()(random_tensor({1, 96, 64}, rng, 0, 1));
  EXPECT_EQ(q.level[3].shape(), (ad::Shape{128, 3, 2}));
  EXPECT_THROW(net.backbone()(random_tensor({1, 48, 64}, rng)), ShapeError);
}

TEST(Backbone, ZeroInputStaysFinite) {
  P2Net net(tiny_config(), 2);
  for (auto& block : net.backbone().stages[3]) {
    block.conv1.zero();
    block.conv2.zero();
  }
  Pyramid p = net.backbone()(Tensor({1, 32, 32}, 0.0));
  // Zero biases everywhere: a zero image propagates to exact zeros at every level.
  for (const Tensor& level : p.level)
    for (double v : level.data()) EXPECT_EQ(v, 0.0);
  for (auto& [name, t] : net.parameters().entries()) {
    if (name.ends_with(".bias")) std::fill(t.node()->data.begin(), t.node()->data.end(), 0.1);
  }
  Pyramid q = net.backbone()(Tensor({1, 32, 32}, 0.0));
  for (const Tensor& level : q.level)
    for (double v : level.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Backbone, GradientsMatchFiniteDifferences) {
  P2Net net(tiny_config(2), 3);
  Rng rng(3);
  jitter_biases(net.parameters(), rng);
  Tensor x = random_tensor({2, 32, 32}, rng, 0, 1);
  std::vector<Tensor> r;
  for (std::size_t l = 0; l < 4; ++l) r.push_back(random_tensor({net.config().widths[l], 8u >> l, 8u >> l}, rng));
  auto fn = [&] {
    Pyramid p = net.backbone()(x);
    Tensor acc = project(p.level[0], r[0]);
    for (std::size_t l = 1; l < 4; ++l) acc = ad::add(acc, project(p.level[l], r[l]));
    return acc;
  };
  EXPECT_LE(max_grad_error(fn, x, 1e-4, 48), 1e-4);
  const double scale = gradient_scale(fn, net.parameters());
  for (const auto& [name, t] : net.parameters().entries()) {
    if (!name.starts_with("backbone")) continue;
    Tensor param = t;
    EXPECT_LE(max_grad_error(fn, param, 1e-4, 16, 1e-5, scale), 1e-4) << name;
  }
}

TEST(ParallelFusion, ZeroBranchesAreIdentity) {
  P2Net net(tiny_config(), 4);
  net.parallel_fusion().zero();
  Rng rng(4);
  Pyramid p = random_pyramid(net.config().widths, 8, rng);
  Pyramid out = net.parallel_fusion()(p);
  for (std::size_t l = 0; l < 4; ++l) expect_same(out.level[l], p.level[l]);
}

TEST(ParallelFusion, PreservesChannelsAndPassesC5Through) {
  P2Net net(tiny_config(), 5);
  Rng rng(5);
  Pyramid p = random_pyramid(net.config().widths, 8, rng);
  Pyramid out = net.parallel_fusion()(p);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(out.level[l].shape(), p.level[l].shape());
  expect_same(out.level[3], p.level[3]);
  bool changed = false;
  for (std::size_t i = 0; i < p.level[0].numel(); ++i) changed |= out.level[0][i] != p.level[0][i];
  EXPECT_TRUE(changed);
}

TEST(ParallelFusion, GradientsMatchFiniteDifferences) {
  P2Net net(tiny_config(), 6);
  Rng rng(6);
  Pyramid p = random_pyramid(net.config().widths, 8, rng);
  std::vector<Tensor> r;
  for (std::size_t l = 0; l < 4; ++l) r.push_back(random_tensor(p.level[l].shape(), rng));
  auto fn = [&] {
    Pyramid out = net.parallel_fusion()(p);
    Tensor acc = project(out.level[0], r[0]);
    for (std::size_t l = 1; l < 4; ++l) acc = ad::add(acc, project(out.level[l], r[l]));
    return acc;
  };
  for (Tensor& level : p.level) EXPECT_LE(max_grad_error(fn, level, 1e-4, 32), 1e-4);
  for (const auto& [name, t] : net.parameters().entries()) {
    if (!name.starts_with("parallel")) continue;
    Tensor param = t;
    EXPECT_LE(max_grad_error(fn, param, 1e-4, 8), 1e-4) << name;
  }
}

TEST(ProgressiveFusion, ZeroLateralsAreIdentity) {
  P2Net net(tiny_config(), 7);
  net.progressive_fusion().zero();
  Rng rng(7);
  Pyramid p = random_pyramid(net.config().widths, 8, rng);
  Pyramid out = net.progressive_fusion()(p);
  for (std::size_t l = 0; l < 4; ++l) expect_same(out.level[l], p.level[l]);
}

TEST(ProgressiveFusion, ConstantC5PropagatesAsConstant) {
  P2NetConfig cfg = tiny_config();
  cfg.widths = {4, 4, 4, 4};
  P2Net net(cfg, 8);
  Conv2d& into_c4 = net.progressive_fusion().lateral[2];
  into_c4.zero();
  for (std::size_t c = 0; c < 4; ++c) into_c4.weight.data_mut()[c * 4 + c] = 1.0;
  Rng rng(8);
  Pyramid p = random_pyramid(cfg.widths, 8, rng);
  p.level[3] = Tensor({4, 1, 1}, 0.75);
  Pyramid out = net.progressive_fusion()(p);
  for (std::size_t i = 0; i < out.level[2].numel(); ++i) {
    EXPECT_NEAR(out.level[2][i] - p.level[2][i], 0.75, 1e-15);
  }
  expect_same(out.level[3], p.level[3]);
}

TEST(ProgressiveFusion, GradientsMatchFiniteDifferences) {
  P2Net net(tiny_config(), 9);
  Rng rng(9);
  Pyramid p = random_pyramid(net.config().widths, 8, rng);
  std::vector<Tensor> r;
  for (std::size_t l = 0; l < 4; ++l) r.push_back(random_tensor(p.level[l].shape(), rng));
  auto fn = [&] {
    Pyramid out = net.progressive_fusion()(p);
    Tensor acc = project(out.level[0], r[0]);
    for (std::size_t l = 1; l < 4; ++l) acc = ad::add(acc, project(out.level[l], r[l]));
    return acc;
  };
  for (Tensor& level : p.level) EXPECT_LE(max_grad_error(fn, level, 1e-4, 32), 1e-4);
  for (const auto& [name, t] : net.parameters().entries()) {
    if (!name.starts_with("progressive")) continue;
    Tensor param = t;
    EXPECT_LE(max_grad_error(fn, param, 1e-4, 16), 1e-4) << name;
  }
}

TEST(DilatedBottleneck, ZeroBranchIsIdentity) {
  ParameterSet params;
  Rng rng(10);
  DilatedBottleneck b(params, "b", 6, rng);
  b.reduce.zero();
  b.dilated.zero();
  b.expand.zero();
  Tensor x = random_tensor({6, 5, 7}, rng);
  expect_same(b(x), x);
  EXPECT_THROW(b(random_tensor({5, 5, 7}, rng)), ShapeError);
  EXPECT_EQ(b.reduce.out_channels(), 3u);
}

TEST(DilatedBottleneck, DilatedKernelSeesFiveByFive) {
  ParameterSet params;
  Rng rng(11);
  DilatedBottleneck b(params, "b", 2, rng);
  std::vector<double> v(11 * 11, 0.0);
  v[5 * 11 + 5] = 1.0;
  Tensor impulse({1, 11, 11}, v);
  Tensor w({1, 1, 3, 3}, 1.0);
  Tensor y = ad::conv2d(impulse, w, Tensor(), b.dilated.options);
  EXPECT_EQ(y.shape(), impulse.shape());
  int rmin = 11, rmax = -1, cmin = 11, cmax = -1;
  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 11; ++c)
      if (y.at(0, r, c) != 0.0) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
  EXPECT_EQ(rmax - rmin + 1, 5);
  EXPECT_EQ(cmax - cmin + 1, 5);
}

TEST(DilatedBottleneck, GradientsMatchFiniteDifferences) {
  ParameterSet params;
  Rng rng(12);
  DilatedBottleneck b(params, "b", 4, rng);
  Tensor x = random_tensor({4, 6, 6}, rng);
  Tensor r = random_tensor({4, 6, 6}, rng);
  auto fn = [&] { return project(b(x), r); };
  EXPECT_LE(max_grad_error(fn, x, 1e-4), 1e-4);
  for (const auto& [name, t] : params.entries()) {
    Tensor param = t;
    EXPECT_LE(max_grad_error(fn, param, 1e-4, 24), 1e-4) << name;
  }
}

TEST(AttentionModule, ZeroParametersHalveInput) {
  ParameterSet params;
  Rng rng(13);
  AttentionModule a(params, "a", 5, rng);
  a.fc.zero();
  Tensor x = random_tensor({5, 4, 3}, rng);
  Tensor w = a.weights(x);
  EXPECT_EQ(w.shape(), (ad::Shape{5, 1, 1}));
  for (double v : w.data()) EXPECT_EQ(v, 0.5);
  Tensor y = a(x);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], 0.5 * x[i]);
}

TEST(AttentionModule, GradientsIncludePoolingPath) {
  ParameterSet params;
  Rng rng(14);
  AttentionModule a(params, "a", 3, rng);
  for (int instance = 0; instance < 10; ++instance) {
    Tensor x = random_tensor({3, 4, 5}, rng);
    Tensor r = random_tensor({3, 4, 5}, rng);
    auto fn = [&] { return project(a(x), r); };
    EXPECT_LE(max_grad_error(fn, x, 1e-4), 1e-4);
    EXPECT_LE(max_grad_error(fn, a.fc.weight, 1e-4), 1e-4);
    EXPECT_LE(max_grad_error(fn, a.fc.bias, 1e-4), 1e-4);
  }
}

TEST(RefinementHead, ExtentsAndChannels) {
  P2Net net(tiny_config(1, 3), 15);
  Rng rng(15);
  HeatmapPair out = net.forward(random_tensor({1, 64, 32}, rng, 0, 1));
  EXPECT_EQ(out.stage1.shape(), (ad::Shape{3, 16, 8}));
  EXPECT_EQ(out.stage2.shape(), (ad::Shape{3, 16, 8}));
}

TEST(RefinementHead, EndToEndGradientsMatchFiniteDifferences) {
  P2Net net(tiny_config(1, 3), 16);
  Rng rng(16);
  jitter_biases(net.parameters(), rng);
  Tensor x = random_tensor({1, 32, 32}, rng, 0, 1);
  Tensor r1 = random_tensor({3, 8, 8}, rng), r2 = random_tensor({3, 8, 8}, rng);
  auto fn = [&] {
    HeatmapPair out = net.forward(x);
    return ad::add(project(out.stage1, r1), project(out.stage2, r2));
  };
  EXPECT_LE(max_grad_error(fn, x, 1e-4, 32), 1e-4);
  const double scale = gradient_scale(fn, net.parameters());
  for (const auto& [name, t] : net.parameters().entries()) {
    Tensor param = t;
    EXPECT_LE(max_grad_error(fn, param, 1e-4, 8, 1e-5, scale), 1e-4) << name;
  }
}

TEST(P2Net, ParametersAreNamedAndLive) {
  P2Net net(tiny_config(1, 3), 17);
  const auto& entries = net.parameters().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_TRUE(entries[i].second.requires_grad()) << entries[i].first;
    for (std::size_t j = i + 1; j < entries.size(); ++j) EXPECT_NE(entries[i].first, entries[j].first);
  }
  // Every parameter gets a nonzero gradient from a small random batch.
  Rng rng(17);
  std::vector<double> mass(entries.size(), 0.0);
  for (int sample = 0; sample < 3; ++sample) {
    Tensor x = random_tensor({1, 32, 32}, rng, 0, 1);
    Tensor target = random_tensor({3, 8, 8}, rng, 0, 1);
    ad::Tape tape;
    ad::Tape::Scope scope(tape);
    for (Tensor t : net.parameters().tensors()) t.zero_grad();
    tape.backward(training_loss(net.forward(x), target, {true, true, true}, 2));
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].second.has_grad())
        for (double g : entries[i].second.grad()) mass[i] += std::abs(g);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) EXPECT_GT(mass[i], 0.0) << entries[i].first;
}

TEST(L2Loss, Examples) {
  Rng rng(18);
  Tensor a = random_tensor({3, 4, 4}, rng);
  EXPECT_EQ(l2_loss(a, a, {true, true, true}).item(), 0.0);
  Tensor p({1, 3, 3}, 0.7), g({1, 3, 3}, 0.4);
  EXPECT_NEAR(l2_loss(p, g, {true}).item(), 0.09, 1e-15);
  EXPECT_THROW(l2_loss(a, random_tensor({3, 4, 5}, rng), {true, true, true}), ShapeError);
  EXPECT_THROW(l2_loss(a, a, {true, true}), ShapeError);
}

TEST(L2Loss, MatchesDirectSummation) {
  Rng rng(19);
  for (int instance = 0; instance < 10; ++instance) {
    const std::size_t j = 2 + rng.below(6);
    Tensor p = random_tensor({j, 5, 6}, rng), g = random_tensor({j, 5, 6}, rng);
    std::vector<bool> vis(j);
    for (std::size_t k = 0; k < j; ++k) vis[k] = rng.uniform() < 0.7;
    vis[0] = true;
    double total = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < j; ++k) {
      if (!vis[k]) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < 30; ++i) s += (p[k * 30 + i] - g[k * 30 + i]) * (p[k * 30 + i] - g[k * 30 + i]);
      total += s / 30.0;
      ++count;
    }
    EXPECT_NEAR(l2_loss(p, g, vis).item(), total / count, 1e-12);
  }
}

TEST(L2Loss, NothingVisibleWarnsAndReturnsZero) {
  int warnings = 0;
  log::set_sink([&](std::string_view level, std::string_view) { warnings += level == "warn"; });
  Rng rng(20);
  Tensor p = random_tensor({2, 3, 3}, rng), g = random_tensor({2, 3, 3}, rng);
  EXPECT_EQ(l2_loss(p, g, {false, false}).item(), 0.0);
  log::set_sink(nullptr);
  EXPECT_EQ(warnings, 1);
}

TEST(OhkmLoss, TiesReduceToMean) {
  Tensor p({4, 2, 2}, 0.5), g({4, 2, 2}, 0.2);
  const std::vector<bool> vis(4, true);
  EXPECT_EQ(ohkm_loss(p, g, vis, 2).item(), l2_loss(p, g, vis).item());
}

TEST(OhkmLoss, SelectsAlphaKeypoints) {
  Rng rng(21);
  Tensor p = random_tensor({17, 4, 4}, rng), g = random_tensor({17, 4, 4}, rng);
  ad::Tape tape;
  ad::Tape::Scope scope(tape);
  p.set_requires_grad(true);
  tape.backward(ohkm_loss(p, g, std::vector<bool>(17, true), 10));
  int selected = 0;
  for (std::size_t k = 0; k < 17; ++k) {
    bool any = false;
    for (std::size_t i = 0; i < 16; ++i) any |= p.grad()[k * 16 + i] != 0.0;
    selected += any;
  }
  EXPECT_EQ(selected, 10);
  EXPECT_THROW(ohkm_loss(p, g, std::vector<bool>(17, true), 0), ValueError);
}

TEST(OhkmLoss, MatchesSortAndAverageOracle) {
  Rng rng(22);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t j = 3 + rng.below(15);
    Tensor p = random_tensor({j, 3, 4}, rng), g = random_tensor({j, 3, 4}, rng);
    std::vector<bool> vis(j);
    for (std::size_t k = 0; k < j; ++k) vis[k] = rng.uniform() < 0.8;
    vis[1] = true;
    const std::size_t alpha = 1 + rng.below(j);
    std::vector<double> per;
    for (std::size_t k = 0; k < j; ++k) {
      if (!vis[k]) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < 12; ++i) s += (p[k * 12 + i] - g[k * 12 + i]) * (p[k * 12 + i] - g[k * 12 + i]);
      per.push_back(s / 12.0);
    }
    std::sort(per.rbegin(), per.rend());
    const std::size_t take = std::min(alpha, per.size());
    double total = 0.0;
    for (std::size_t i = 0; i < take; ++i) total += per[i];
    EXPECT_NEAR(ohkm_loss(p, g, vis, alpha).item(), total / take, 1e-12);
  }
}

TEST(OhkmLoss, FullAlphaEqualsL2Exactly) {
  Rng rng(23);
  for (int instance = 0; instance < 10; ++instance) {
    Tensor p = random_tensor({7, 4, 4}, rng), g = random_tensor({7, 4, 4}, rng);
    std::vector<bool> vis(7);
    for (std::size_t k = 0; k < 7; ++k) vis[k] = rng.uniform() < 0.6;
    vis[3] = true;
    EXPECT_EQ(ohkm_loss(p, g, vis, 7).item(), l2_loss(p, g, vis).item());
    EXPECT_EQ(ohkm_loss(p, g, vis, 50).item(), l2_loss(p, g, vis).item());
  }
}

TEST(Checkpoint, RoundTripAndMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "p2aug_ckpt_test";
  std::filesystem::create_directories(dir);
  P2Net a(tiny_config(), 24), b(tiny_config(), 25);
  save_checkpoint(a.parameters(), dir / "a.bin");
  load_checkpoint(b.parameters(), dir / "a.bin");
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    expect_same(a.parameters().entries()[i].second, b.parameters().entries()[i].second);
  }
  P2Net other(tiny_config(1, 4), 26);
  EXPECT_THROW(load_checkpoint(other.parameters(), dir / "a.bin"), FormatError);
  {
    std::ofstream junk(dir / "junk.bin", std::ios::binary);
    junk << "not a checkpoint";
  }
  EXPECT_THROW(load_checkpoint(b.parameters(), dir / "junk.bin"), FormatError);
  std::filesystem::resize_file(dir / "a.bin", 200);
  EXPECT_THROW(load_checkpoint(b.parameters(), dir / "a.bin"), FormatError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace p2aug::net
