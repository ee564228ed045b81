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

#include "p2aug/pose/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "p2aug/error.hpp"
#include "scene_json.hpp"

namespace p2aug::pose {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kDatasetVersion = 1;
constexpr std::size_t kChunk = 128;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(path.string() + ": write failed");
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": malformed JSON: " + e.what());
  }
}

const json& need(const json& obj, const char* key, const fs::path& path) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(path.string() + ": " + key + ": missing");
  return obj[key];
}

// Skips whitespace and '#' comments in a PNM header.
void skip_space(std::istream& in) {
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

std::size_t header_value(std::istream& in, const fs::path& path) {
  skip_space(in);
  long long v = -1;
  in >> v;
  if (!in || v < 0) throw FormatError(path.string() + ": malformed PGM header");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::Train, Split::Val, Split::Test})
    if (split_name(s) == name) return s;
  throw ValueError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::size_t SplitCounts::first(Split split) const {
  switch (split) {
    case Split::Train:
      return 0;
    case Split::Val:
      return train;
    case Split::Test:
      return train + val;
  }
  return 0;
}

std::size_t SplitCounts::size(Split split) const {
  return split == Split::Train ? train : split == Split::Val ? val : test;
}

void DatasetSpec::validate() const {
  scene.validate();
  if (count == 0) throw ValueError("dataset: count must be at least 1");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValueError("dataset: split fractions must lie in [0, 1]");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ValueError("dataset: split fractions must sum to 1");
}

SplitCounts DatasetSpec::counts() const {
  validate();
  const double n = static_cast<double>(count);
  SplitCounts c;
  c.train = std::min(count, static_cast<std::size_t>(std::llround(n * fractions[0])));
  c.val = std::min(count - c.train, static_cast<std::size_t>(std::llround(n * fractions[1])));
  c.test = count - c.train - c.val;
  return c;
}

void write_pgm(const fs::path& path, const ad::Tensor& image) {
  if (!image.defined() || image.rank() != 3 || image.dim(0) != 1) throw ShapeError("write_pgm: expected 1 x H x W");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  bytes.reserve(bytes.size() + 2 * w * h);
  for (double v : image.data()) {
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  write_file(path, bytes);
}

ad::Tensor read_pgm(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw FormatError(path.string() + ": not a binary PGM");
  const std::size_t w = header_value(in, path), h = header_value(in, path), maxval = header_value(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": bad PGM extents");
  in.get();  // the single whitespace byte before the raster
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::string raster(w * h * bytes_per, '\0');
  in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) throw FormatError(path.string() + ": truncated");
  std::vector<double> v(w * h);
  for (std::size_t i = 0; i < v.size(); ++i) {
    unsigned q = static_cast<unsigned char>(raster[i * bytes_per]);
    if (bytes_per == 2) q = (q << 8) | static_cast<unsigned char>(raster[i * 2 + 1]);
    v[i] = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return ad::Tensor({1, h, w}, std::move(v));
}

std::string label_json(const SceneSample& s) {
  json kps = json::array();
  for (std::size_t j = 0; j < s.sample.keypoints.size(); ++j) {
    const aug::Keypoint& k = s.sample.keypoints[j];
    kps.push_back({{"name", kJointNames[j]}, {"x", k.x}, {"y", k.y}, {"visible", k.visible}});
  }
  json doc = {{"id", s.sample.id},
              {"scale", s.scale},
              {"width", s.sample.width()},
              {"height", s.sample.height()},
              {"keypoints", std::move(kps)}};
  return doc.dump(2) + "\n";
}

SplitCounts write_dataset(const DatasetSpec& spec, const fs::path& dir, std::size_t jobs) {
  const SplitCounts counts = spec.counts();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");

  json pairs = json::array();
  for (const auto& [a, b] : flip_pairs(spec.scene.joints)) pairs.push_back({a, b});
  json names = json::array();
  for (std::size_t j = 0; j < spec.scene.joints; ++j) names.push_back(kJointNames[j]);
  const json info = {{"version", kDatasetVersion},
                     {"scene", scene_to_json(spec.scene)},
                     {"count", spec.count},
                     {"fractions", spec.fractions},
                     {"splits", {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}}},
                     {"joint_names", std::move(names)},
                     {"flip_pairs", std::move(pairs)}};
  write_file(dir / "dataset.json", info.dump(2) + "\n");

  for (Split split : {Split::Train, Split::Val, Split::Test}) {
    std::string list;
    for (std::size_t i = 0; i < counts.size(split); ++i) list += sample_id(counts.first(split) + i) + "\n";
    write_file(dir / (std::string(split_name(split)) + ".txt"), list);
  }

  for (std::size_t first = 0; first < spec.count; first += kChunk) {
    const std::size_t n = std::min(kChunk, spec.count - first);
    for (const SceneSample& s : generate_samples(spec.scene, first, n, jobs)) {
      write_pgm(dir / "images" / (s.sample.id + ".pgm"), s.sample.image);
      write_file(dir / "labels" / (s.sample.id + ".json"), label_json(s));
    }
  }
  return counts;
}

DatasetInfo read_dataset_info(const fs::path& dir) {
  const fs::path path = dir / "dataset.json";
  if (!fs::exists(path)) throw FormatError(path.string() + ": dataset not found (run gen-data first)");
  const json doc = parse_json(path);
  const json& version = need(doc, "version", path);
  if (!version.is_number_integer() || version.get<int>() != kDatasetVersion) {
    throw FormatError(path.string() + ": unsupported version");
  }
  DatasetInfo info;
  try {
    info.spec.scene = scene_from_json(need(doc, "scene", path), "scene");
    info.spec.count = need(doc, "count", path).get<std::size_t>();
    info.spec.fractions = need(doc, "fractions", path).get<std::array<double, 3>>();
    const json& splits = need(doc, "splits", path);
    info.counts.train = need(splits, "train", path).get<std::size_t>();
    info.counts.val = need(splits, "val", path).get<std::size_t>();
    info.counts.test = need(splits, "test", path).get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (info.counts.total() != info.spec.count) throw FormatError(path.string() + ": split counts do not sum to count");
  return info;
}

std::vector<SceneSample> load_split(const fs::path& dir, Split split) {
  const DatasetInfo info = read_dataset_info(dir);
  const std::size_t joints = info.spec.scene.joints;
  const fs::path list_path = dir / (std::string(split_name(split)) + ".txt");
  std::istringstream list(read_file(list_path));
  std::vector<SceneSample> out;
  std::string id;
  while (std::getline(list, id)) {
    if (id.empty()) continue;
    SceneSample s;
    s.sample.id = id;
    s.sample.image = read_pgm(dir / "images" / (id + ".pgm"));
    s.sample.flip_permutation = flip_permutation(joints);
    const fs::path label_path = dir / "labels" / (id + ".json");
    const json label = parse_json(label_path);
    try {
      s.scale = need(label, "scale", label_path).get<double>();
      const json& kps = need(label, "keypoints", label_path);
      if (!kps.is_array() || kps.size() != joints) {
        throw FormatError(label_path.string() + ": expected " + std::to_string(joints) + " keypoints");
      }
      for (const json& k : kps) {
        s.sample.keypoints.push_back({need(k, "x", label_path).get<double>(), need(k, "y", label_path).get<double>(),
                                      need(k, "visible", label_path).get<bool>()});
      }
    } catch (const json::exception& e) {
      throw FormatError(label_path.string() + ": " + e.what());
    }
    if (s.sample.width() != info.spec.scene.width || s.sample.height() != info.spec.scene.height) {
      throw FormatError(id + ": image extents differ from dataset.json");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace p2aug::pose
