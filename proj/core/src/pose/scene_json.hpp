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

#include <json.hpp>
#include <string>

#include "p2aug/pose/scene.hpp"

namespace p2aug::pose {

/// Every SceneSpec field, ranges as [lo, hi].
nlohmann::json scene_to_json(const SceneSpec& spec);

/// Missing keys keep their defaults; unknown keys and wrong types throw FormatError naming
/// `where`.key. The result is validated.
SceneSpec scene_from_json(const nlohmann::json& doc, const std::string& where);

}  // namespace p2aug::pose
