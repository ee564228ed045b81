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

#include "scene_json.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "p2aug/error.hpp"

namespace p2aug::pose {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw FormatError(where + ": " + what); }

double finite(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "not finite");
  return x;
}

std::uint64_t unsigned_int(const json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(where, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

Range range(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) fail(where, "expected [lo, hi]");
  return {finite(v[0], where + "[0]"), finite(v[1], where + "[1]")};
}

}  // namespace

json scene_to_json(const SceneSpec& s) {
  auto r = [](const Range& x) { return json::array({x.lo, x.hi}); };
  return {{"width", s.width},
          {"height", s.height},
          {"joints", s.joints},
          {"torso_fraction", r(s.torso_fraction)},
          {"torso_tilt", r(s.torso_tilt)},
          {"head_angle", r(s.head_angle)},
          {"arm_angle", r(s.arm_angle)},
          {"elbow_bend", r(s.elbow_bend)},
          {"leg_angle", r(s.leg_angle)},
          {"knee_bend", r(s.knee_bend)},
          {"head_length", s.head_length},
          {"upper_arm_length", s.upper_arm_length},
          {"forearm_length", s.forearm_length},
          {"thigh_length", s.thigh_length},
          {"shin_length", s.shin_length},
          {"limb_thickness", s.limb_thickness},
          {"clutter_density", s.clutter_density},
          {"noise_sigma", s.noise_sigma},
          {"seed", s.seed}};
}

SceneSpec scene_from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) fail(where, "expected an object");
  SceneSpec s;
  using Setter = std::function<void(const json&, const std::string&)>;
  auto size = [](std::size_t& dst) -> Setter {
    return [&dst](const json& v, const std::string& w) { dst = unsigned_int(v, w); };
  };
  auto num = [](double& dst) -> Setter { return [&dst](const json& v, const std::string& w) { dst = finite(v, w); }; };
  auto rng = [](Range& dst) -> Setter { return [&dst](const json& v, const std::string& w) { dst = range(v, w); }; };
  const std::map<std::string, Setter> fields = {
      {"width", size(s.width)},
      {"height", size(s.height)},
      {"joints", size(s.joints)},
      {"torso_fraction", rng(s.torso_fraction)},
      {"torso_tilt", rng(s.torso_tilt)},
      {"head_angle", rng(s.head_angle)},
      {"arm_angle", rng(s.arm_angle)},
      {"elbow_bend", rng(s.elbow_bend)},
      {"leg_angle", rng(s.leg_angle)},
      {"knee_bend", rng(s.knee_bend)},
      {"head_length", num(s.head_length)},
      {"upper_arm_length", num(s.upper_arm_length)},
      {"forearm_length", num(s.forearm_length)},
      {"thigh_length", num(s.thigh_length)},
      {"shin_length", num(s.shin_length)},
      {"limb_thickness", num(s.limb_thickness)},
      {"clutter_density", num(s.clutter_density)},
      {"noise_sigma", num(s.noise_sigma)},
      {"seed", [&s](const json& v, const std::string& w) { s.seed = unsigned_int(v, w); }},
  };
  for (const auto& [key, value] : doc.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) fail(where + "." + key, "unknown key");
    it->second(value, where + "." + key);
  }
  try {
    s.validate();
  } catch (const ValueError& e) {
    fail(where, e.what());
  }
  return s;
}

}  // namespace p2aug::pose
