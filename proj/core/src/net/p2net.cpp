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

#include "p2aug/net/p2net.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "p2aug/error.hpp"
#include "p2aug/log.hpp"

namespace p2aug::net {
namespace {

constexpr char kMagic[8] = {'P', '2', 'A', 'U', 'G', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

void check_pair(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& visible) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("heatmap shapes differ: " + ad::to_string(pred.shape()) + " vs " + ad::to_string(target.shape()));
  }
  if (pred.rank() != 3 || visible.size() != pred.dim(0)) {
    throw ShapeError("visibility has " + std::to_string(visible.size()) + " flags for heatmaps " +
                     ad::to_string(pred.shape()));
  }
}

ad::Tensor per_keypoint_error(const ad::Tensor& pred, const ad::Tensor& target) {
  ad::Tensor diff = ad::sub(pred, target);
  return ad::channel_mean(ad::mul(diff, diff));
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
  return v;
}

}  // namespace

P2Net::P2Net(const P2NetConfig& config, std::uint64_t seed) : config_(config) {
  if (config.in_channels == 0 || config.joints == 0 || config.blocks_per_stage == 0) {
    throw ValueError("P2Net needs at least one input channel, joint and block per stage");
  }
  for (std::size_t w : config.widths)
    if (w < 2) throw ValueError("P2Net stage widths must be at least 2");
  Rng rng(seed);
  backbone_ = std::make_unique<Backbone>(params_, "backbone", config.in_channels, config.widths,
                                         config.blocks_per_stage, rng);
  preparation_ = std::make_unique<Preparation>(params_, "prep", config.widths, rng);
  parallel_ = std::make_unique<ParallelFusion>(params_, "parallel", config.widths, rng);
  progressive_ = std::make_unique<ProgressiveFusion>(params_, "progressive", config.widths, rng);
  head_ = std::make_unique<RefinementHead>(params_, "head", config.widths, config.joints, rng);
}

Pyramid P2Net::features(const ad::Tensor& image) const {
  return (*progressive_)((*parallel_)((*preparation_)((*backbone_)(image))));
}

HeatmapPair P2Net::forward(const ad::Tensor& image) const { return (*head_)(features(image)); }

ad::Tensor l2_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& visible) {
  return ohkm_loss(pred, target, visible, visible.size());
}

ad::Tensor ohkm_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& visible,
                     std::size_t alpha) {
  if (alpha < 1) throw ValueError("ohkm alpha must be at least 1");
  check_pair(pred, target, visible);
  ad::Tensor per = per_keypoint_error(pred, target);
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < visible.size(); ++j)
    if (visible[j]) idx.push_back(j);
  if (idx.empty()) {
    log::warn("heatmap loss: no visible keypoints, loss is 0");
    return ad::mul(ad::sum(per), ad::Tensor::scalar(0.0));
  }
  if (alpha < idx.size()) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return per[a] > per[b]; });
    idx.resize(alpha);
    std::sort(idx.begin(), idx.end());
  }
  return ad::mean(ad::gather(per, idx));
}

ad::Tensor training_loss(const HeatmapPair& out, const ad::Tensor& target, const std::vector<bool>& visible,
                         std::size_t alpha) {
  return ad::add(l2_loss(out.stage1, target, visible), ohkm_loss(out.stage2, target, visible, alpha));
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kCheckpointVersion);
  write_raw(out, static_cast<std::uint64_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_raw(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

void load_checkpoint(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError(path.string() + " is not a checkpoint");
  if (const auto v = read_raw<std::uint32_t>(in, path); v != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(v) + " is not supported");
  }
  const auto count = read_raw<std::uint64_t>(in, path);
  if (count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  // Stage everything first so a bad file leaves the model untouched.
  std::vector<std::vector<double>> staged;
  for (const auto& [name, t] : params.entries()) {
    const auto len = read_raw<std::uint32_t>(in, path);
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
    if (stored != name) throw FormatError("checkpoint parameter '" + stored + "' where '" + name + "' was expected");
    const auto rank = read_raw<std::uint32_t>(in, path);
    ad::Shape shape(rank);
    for (auto& d : shape) d = read_raw<std::uint64_t>(in, path);
    if (shape != t.shape()) {
      throw FormatError("checkpoint shape " + ad::to_string(shape) + " for " + name + ", model has " +
                        ad::to_string(t.shape()));
    }
    std::vector<double> values(t.numel());
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint " + path.string() + " is truncated");
    staged.push_back(std::move(values));
  }
  for (std::size_t i = 0; i < staged.size(); ++i) {
    ad::Tensor t = params.entries()[i].second;
    std::copy(staged[i].begin(), staged[i].end(), t.data_mut().begin());
  }
}

}  // namespace p2aug::net
