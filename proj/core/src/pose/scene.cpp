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

#include "p2aug/pose/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "p2aug/error.hpp"

namespace p2aug::pose {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Point = std::pair<double, double>;

Point add(Point a, Point b) { return {a.first + b.first, a.second + b.second}; }

// Offset of length `len` at `angle` degrees from straight down, positive toward +x.
Point limb(double angle, double len) { return {len * std::sin(angle * kDeg), len * std::cos(angle * kDeg)}; }

Point rotate(Point v, double angle) {
  const double c = std::cos(angle * kDeg), s = std::sin(angle * kDeg);
  return {c * v.first - s * v.second, s * v.first + c * v.second};
}

double reach(const SceneSpec& s) {
  return std::max({1.0 + s.head_length, 1.0 + s.upper_arm_length + s.forearm_length, s.thigh_length + s.shin_length});
}

double margin(const SceneSpec& s) { return 1.0 + s.limb_thickness; }

double segment_distance(double px, double py, Point a, Point b) {
  const double dx = b.first - a.first, dy = b.second - a.second;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a.first) * dx + (py - a.second) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.first + t * dx - px, ey = a.second + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h) : w_(w), h_(h), v_(w * h, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return v_[r * w_ + c]; }

  // Anti-aliased stroke composited over the current content.
  void segment(Point a, Point b, double thickness, double intensity) {
    const double pad = thickness / 2.0 + 1.0;
    const auto [c0, c1] = span(std::min(a.first, b.first) - pad, std::max(a.first, b.first) + pad, w_);
    const auto [r0, r1] = span(std::min(a.second, b.second) - pad, std::max(a.second, b.second) + pad, h_);
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c) {
        const double d = segment_distance(static_cast<double>(c), static_cast<double>(r), a, b);
        const double alpha = std::clamp(thickness / 2.0 + 0.5 - d, 0.0, 1.0);
        double& p = at(r, c);
        p = p * (1.0 - alpha) + intensity * alpha;
      }
  }

  void disk(Point centre, double radius, double intensity) { segment(centre, centre, 2.0 * radius, intensity); }

  void blob(Point centre, double sigma, double amplitude) {
    const double pad = 3.0 * sigma;
    const auto [c0, c1] = span(centre.first - pad, centre.first + pad, w_);
    const auto [r0, r1] = span(centre.second - pad, centre.second + pad, h_);
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c) {
        const double dx = static_cast<double>(c) - centre.first, dy = static_cast<double>(r) - centre.second;
        at(r, c) += amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
  }

  std::vector<double> take() { return std::move(v_); }

 private:
  static std::pair<std::size_t, std::size_t> span(double lo, double hi, std::size_t n) {
    const double a = std::clamp(std::floor(lo), 0.0, static_cast<double>(n));
    const double b = std::clamp(std::ceil(hi) + 1.0, 0.0, static_cast<double>(n));
    return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
  }

  std::size_t w_, h_;
  std::vector<double> v_;
};

std::size_t poisson(double lambda, Rng& rng) {
  const double limit = std::exp(-lambda);
  std::size_t k = 0;
  double p = rng.uniform();
  while (p > limit) {
    ++k;
    p *= rng.uniform();
  }
  return k;
}

}  // namespace

void SceneSpec::validate() const {
  if (width == 0 || height == 0) throw ValueError("scene: image extents must be positive");
  if (width % 32 != 0 || height % 32 != 0) throw ValueError("scene: image extents must be multiples of 32");
  if (joints == 0 || joints > kJointCount) {
    throw ValueError("scene: joints must be in [1, " + std::to_string(kJointCount) + "]");
  }
  for (const Range* r : {&torso_fraction, &torso_tilt, &head_angle, &arm_angle, &elbow_bend, &leg_angle, &knee_bend}) {
    if (!(r->lo <= r->hi)) throw ValueError("scene: range with lo > hi");
  }
  if (!(torso_fraction.lo > 0.0)) throw ValueError("scene: torso fraction must be positive");
  if (!(noise_sigma >= 0.0) || !(clutter_density >= 0.0) || !(limb_thickness > 0.0)) {
    throw ValueError("scene: noise, clutter and thickness must be non-negative");
  }
  const double extent = static_cast<double>(std::min(width, height));
  if (torso_fraction.hi * extent * reach(*this) + margin(*this) > (extent - 1.0) / 2.0) {
    throw ValueError("scene: figure does not fit the frame; lower torso_fraction");
  }
}

std::vector<std::size_t> flip_permutation(std::size_t joints) {
  std::vector<std::size_t> perm(joints);
  for (std::size_t j = 0; j < joints; ++j) perm[j] = j;
  for (const auto& [a, b] : flip_pairs(joints)) {
    perm[a] = b;
    perm[b] = a;
  }
  return perm;
}

std::vector<std::pair<std::size_t, std::size_t>> flip_pairs(std::size_t joints) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a : {kLeftHand, kLeftFoot, kLeftElbow, kLeftKnee})
    if (a + 1 < joints) out.emplace_back(a, a + 1);
  return out;
}

Figure sample_figure(const SceneSpec& spec, Rng& rng) {
  Figure f;
  const double extent = static_cast<double>(std::min(spec.width, spec.height));
  const double lt = spec.torso_fraction.sample(rng) * extent;
  f.torso_length = lt;
  f.torso_tilt = spec.torso_tilt.sample(rng);
  f.head_angle = spec.head_angle.sample(rng);
  for (int side = 0; side < 2; ++side) {
    f.arm_angle[side] = spec.arm_angle.sample(rng);
    f.elbow_bend[side] = spec.elbow_bend.sample(rng);
    f.leg_angle[side] = spec.leg_angle.sample(rng);
    f.knee_bend[side] = spec.knee_bend.sample(rng);
  }
  // Pelvis range keeps the whole reach disc inside the frame.
  const double r = lt * reach(spec) + margin(spec);
  const double px = rng.uniform(r, static_cast<double>(spec.width) - 1.0 - r);
  const double py = rng.uniform(r, static_cast<double>(spec.height) - 1.0 - r);

  // Body frame: pelvis at the origin, +y down, left limbs toward +x.
  std::array<Point, kJointCount> b{};
  b[kPelvis] = {0.0, 0.0};
  b[kNeck] = {0.0, -lt};
  b[kHead] = add(b[kNeck], limb(180.0 - f.head_angle, spec.head_length * lt));
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    const std::size_t elbow = side == 0 ? kLeftElbow : kRightElbow;
    const std::size_t hand = side == 0 ? kLeftHand : kRightHand;
    const std::size_t knee = side == 0 ? kLeftKnee : kRightKnee;
    const std::size_t foot = side == 0 ? kLeftFoot : kRightFoot;
    b[elbow] = add(b[kNeck], limb(sign * f.arm_angle[side], spec.upper_arm_length * lt));
    b[hand] = add(b[elbow], limb(sign * (f.arm_angle[side] + f.elbow_bend[side]), spec.forearm_length * lt));
    b[knee] = add(b[kPelvis], limb(sign * f.leg_angle[side], spec.thigh_length * lt));
    b[foot] = add(b[knee], limb(sign * (f.leg_angle[side] + f.knee_bend[side]), spec.shin_length * lt));
  }
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const Point p = rotate(b[j], f.torso_tilt);
    f.joint[j] = {px + p.first, py + p.second};
  }
  return f;
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

SceneSample generate_sample(const SceneSpec& spec, std::size_t index) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, index));
  const Figure fig = sample_figure(spec, rng);
  const double w = static_cast<double>(spec.width), h = static_cast<double>(spec.height);

  Canvas canvas(spec.width, spec.height);
  const double base = rng.uniform(0.05, 0.25);
  const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double grad_amp = rng.uniform(0.0, 0.1);
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c) {
      const double u = (static_cast<double>(c) / w - 0.5) * std::cos(grad_angle) +
                       (static_cast<double>(r) / h - 0.5) * std::sin(grad_angle);
      canvas.at(r, c) = base + grad_amp * u;
    }

  const std::size_t clutter = poisson(spec.clutter_density, rng);
  for (std::size_t i = 0; i < clutter; ++i) {
    const Point centre{rng.uniform(0.0, w - 1.0), rng.uniform(0.0, h - 1.0)};
    if (rng.uniform() < 0.5) {
      const double sigma = rng.uniform(1.5, 3.5);
      canvas.blob(centre, sigma, rng.uniform(0.2, 0.6));
    } else {
      const double len = rng.uniform(4.0, 14.0), ang = rng.uniform(0.0, 360.0);
      canvas.segment(centre, add(centre, limb(ang, len)), 1.5, rng.uniform(0.3, 0.7));
    }
  }

  const double ink = rng.uniform(0.7, 1.0);
  const auto& j = fig.joint;
  const std::pair<std::size_t, std::size_t> bones[] = {
      {kPelvis, kNeck},     {kNeck, kLeftElbow},  {kLeftElbow, kLeftHand},  {kNeck, kRightElbow},
      {kRightElbow, kRightHand}, {kPelvis, kLeftKnee}, {kLeftKnee, kLeftFoot}, {kPelvis, kRightKnee},
      {kRightKnee, kRightFoot}};
  for (const auto& [a, b] : bones) canvas.segment(j[a], j[b], spec.limb_thickness, ink);
  canvas.disk(j[kHead], 0.25 * fig.torso_length, ink);
  for (std::size_t e : {kLeftHand, kRightHand, kLeftFoot, kRightFoot}) canvas.disk(j[e], 1.2, ink);

  std::vector<double> pixels = canvas.take();
  for (double& v : pixels) {
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
    // Stored on the same 16-bit grid the dataset files use, so files round-trip exactly.
    v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
  }

  SceneSample out;
  out.scale = fig.torso_length;
  out.sample.image = ad::Tensor({1, spec.height, spec.width}, std::move(pixels));
  out.sample.id = sample_id(index);
  out.sample.flip_permutation = flip_permutation(spec.joints);
  out.sample.keypoints.resize(spec.joints);
  for (std::size_t k = 0; k < spec.joints; ++k) out.sample.keypoints[k] = {j[k].first, j[k].second, true};
  return out;
}

std::vector<SceneSample> generate_samples(const SceneSpec& spec, std::size_t first, std::size_t count,
                                          std::size_t jobs) {
  spec.validate();
  std::vector<SceneSample> out(count);
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = generate_sample(spec, first + i);
    return out;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += jobs) out[i] = generate_sample(spec, first + i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace p2aug::pose
