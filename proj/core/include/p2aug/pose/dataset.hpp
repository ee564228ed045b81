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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "p2aug/ad/tensor.hpp"
#include "p2aug/pose/scene.hpp"

namespace p2aug::pose {

enum class Split { Train, Val, Test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);  // throws ValueError

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
  /// First sample index of a split; splits are consecutive index ranges.
  std::size_t first(Split split) const;
  std::size_t size(Split split) const;
};

struct DatasetSpec {
  SceneSpec scene;
  std::size_t count = 1500;
  std::array<double, 3> fractions{0.6667, 0.1333, 0.2};  // train, val, test

  void validate() const;
  /// train = round(count * f0), val = round(count * f1), test takes the rest.
  SplitCounts counts() const;
};

/// 16-bit binary portable graymap (P5, maxval 65535, big-endian). The image is 1 x H x W
/// with values in [0, 1]; they are rounded to the nearest 1/65535.
void write_pgm(const std::filesystem::path& path, const ad::Tensor& image);
ad::Tensor read_pgm(const std::filesystem::path& path);

/// Label sidecar: {"id", "scale", "width", "height",
///                 "keypoints": [{"name", "x", "y", "visible"}, ..]}.
std::string label_json(const SceneSample& sample);

/// Layout under `dir`:
///   dataset.json                 scene parameters, counts, joint names, flip pairs
///   images/<id>.pgm, labels/<id>.json
///   train.txt, val.txt, test.txt one id per line
/// Output bytes depend only on the spec, not on `jobs`.
SplitCounts write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, std::size_t jobs = 1);

struct DatasetInfo {
  DatasetSpec spec;
  SplitCounts counts;
};

/// Reads dataset.json. Throws FormatError on a missing or malformed file.
DatasetInfo read_dataset_info(const std::filesystem::path& dir);

/// Loads every sample listed in <split>.txt.
std::vector<SceneSample> load_split(const std::filesystem::path& dir, Split split);

}  // namespace p2aug::pose
