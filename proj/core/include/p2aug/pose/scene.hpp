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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "p2aug/aug/ops.hpp"
#include "p2aug/rng.hpp"

namespace p2aug::pose {

/// Stick-figure joints. The first J of these are the keypoints of a task.
enum Joint : std::size_t {
  kHead,
  kLeftHand,
  kRightHand,
  kLeftFoot,
  kRightFoot,
  kLeftElbow,
  kRightElbow,
  kLeftKnee,
  kRightKnee,
  kNeck,
  kPelvis,
  kJointCount
};

inline constexpr std::array<const char*, kJointCount> kJointNames = {
    "head", "l_hand", "r_hand", "l_foot", "r_foot", "l_elbow", "r_elbow", "l_knee", "r_knee", "neck", "pelvis"};

/// Uniform range [lo, hi].
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

/// Procedural scene parameters. Angles in degrees; limb lengths are fractions of the
/// torso length, which itself is a fraction of the smaller image extent.
struct SceneSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t joints = 5;
  Range torso_fraction{0.16, 0.20};
  Range torso_tilt{-15.0, 15.0};     // from vertical
  Range head_angle{-20.0, 20.0};     // relative to the torso
  Range arm_angle{10.0, 150.0};      // upper arm, away from the body, 0 = hanging down
  Range elbow_bend{-60.0, 60.0};
  Range leg_angle{5.0, 35.0};        // thigh, away from the body
  Range knee_bend{-30.0, 30.0};
  double head_length = 0.35;
  double upper_arm_length = 0.60;
  double forearm_length = 0.55;
  double thigh_length = 0.75;
  double shin_length = 0.70;
  double limb_thickness = 2.0;       // pixels
  double clutter_density = 3.0;      // expected distractors per image
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;

  /// Throws ValueError for degenerate specs.
  void validate() const;
};

/// Left/right partner of each of the first J keypoints (identity for unpaired joints).
std::vector<std::size_t> flip_permutation(std::size_t joints);
/// Unordered left/right index pairs among the first J keypoints.
std::vector<std::pair<std::size_t, std::size_t>> flip_pairs(std::size_t joints);

/// Geometry of one figure in image pixel coordinates (col, row).
struct Figure {
  std::array<std::pair<double, double>, kJointCount> joint;
  double torso_length = 0.0;
  // Sampled angles in degrees, kept for analysis.
  double torso_tilt = 0.0, head_angle = 0.0;
  std::array<double, 2> arm_angle{}, elbow_bend{}, leg_angle{}, knee_bend{};  // [left, right]
};

/// Samples a figure that lies entirely inside the frame; no rejection needed.
Figure sample_figure(const SceneSpec& spec, Rng& rng);

/// One generated record: augmentation-ready sample plus its PCK normalization scale.
struct SceneSample {
  aug::Sample sample;  // 1 x H x W image in [0, 1] on a 16-bit grid
  double scale = 0.0;  // torso length in pixels
};

/// Renders sample `index` of the dataset defined by spec.seed. Deterministic.
SceneSample generate_sample(const SceneSpec& spec, std::size_t index);

/// Samples [first, first + count), generated on up to `jobs` threads.
std::vector<SceneSample> generate_samples(const SceneSpec& spec, std::size_t first, std::size_t count,
                                          std::size_t jobs = 1);

std::string sample_id(std::size_t index);

}  // namespace p2aug::pose
