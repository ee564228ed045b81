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

#include <filesystem>
#include <string>
#include <string_view>

#include "p2aug/search/policy.hpp"

namespace p2aug::search {

inline constexpr int kPolicyFileVersion = 1;

/// JSON document:
///   {"version": 1, "K": .., "N": .., "tau1": .., "tau2": ..,
///    "logits": [K], "pi": [K],
///    "slots": [[{"kind": "ShearX", "p": 0.7, "m": 0.5, "p_logit": ..}, ..], ..]}
/// "pi" and "p" are in natural units for reading; "logits" and "p_logit" carry the exact
/// parameters so a round trip is bit-exact. On import "logits" wins over "pi" and
/// "p_logit" over "p". Probabilities that do not sum to 1 are renormalized with a warning.
std::string export_policy(const Policy& policy);
Policy import_policy(std::string_view text);

void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

}  // namespace p2aug::search
