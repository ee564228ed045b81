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

#include "p2aug/app/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <json.hpp>
#include <map>

#include "../pose/scene_json.hpp"
#include "p2aug/error.hpp"

namespace p2aug::app {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw FormatError("config: " + where + ": " + what);
}

// Binds the keys of one JSON object to fields; anything else is an error.
class Section {
 public:
  using Setter = std::function<void(const json&, const std::string&)>;

  Section& size(const std::string& key, std::size_t& dst, std::size_t min = 0) {
    setters_[key] = [&dst, min](const json& v, const std::string& w) {
      if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
        fail(w, "expected an integer >= " + std::to_string(min));
      }
      dst = v.get<std::size_t>();
    };
    return *this;
  }
  Section& number(const std::string& key, double& dst) {
    setters_[key] = [&dst](const json& v, const std::string& w) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) fail(w, "expected a finite number");
      dst = v.get<double>();
    };
    return *this;
  }
  Section& flag(const std::string& key, bool& dst) {
    setters_[key] = [&dst](const json& v, const std::string& w) {
      if (!v.is_boolean()) fail(w, "expected true or false");
      dst = v.get<bool>();
    };
    return *this;
  }
  Section& text(const std::string& key, std::string& dst) {
    setters_[key] = [&dst](const json& v, const std::string& w) {
      if (!v.is_string()) fail(w, "expected a string");
      dst = v.get<std::string>();
    };
    return *this;
  }
  Section& custom(const std::string& key, Setter s) {
    setters_[key] = std::move(s);
    return *this;
  }

  void apply(const json& doc, const std::string& where) const {
    if (!doc.is_object()) fail(where.empty() ? "<document>" : where, "expected an object");
    for (const auto& [key, value] : doc.items()) {
      const std::string path = where.empty() ? key : where + "." + key;
      auto it = setters_.find(key);
      if (it == setters_.end()) fail(path, "unknown key");
      it->second(value, path);
    }
  }

 private:
  std::map<std::string, Setter> setters_;
};

Section::Setter nested(const std::function<Section()>& make) {
  return [make](const json& v, const std::string& w) { make().apply(v, w); };
}

json op_names(const std::vector<aug::AugOpKind>& ops) {
  json a = json::array();
  for (aug::AugOpKind k : ops) a.push_back(std::string(aug::name(k)));
  return a;
}

}  // namespace

std::string_view task_name(Task task) { return task == Task::Pose ? "pose" : "quadratic_toy"; }

net::P2NetConfig ExperimentConfig::net_config() const {
  net::P2NetConfig c;
  c.in_channels = 1;
  c.widths = model.widths;
  c.blocks_per_stage = model.blocks_per_stage;
  c.joints = data.spec.scene.joints;
  return c;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValueError(what);
  };
  data.spec.validate();
  for (std::size_t w : model.widths) require(w >= 1, "model.widths: every width must be at least 1");
  require(model.blocks_per_stage >= 1, "model.blocks_per_stage must be at least 1");
  require(model.ohkm_alpha >= 1, "model.ohkm_alpha must be at least 1");
  require(model.target_sigma > 0.0, "model.target_sigma must be positive");
  require(policy.k >= 1 && policy.n >= 1, "policy.K and policy.N must be at least 1");
  require(policy.tau1 > 0.0 && policy.tau2 > 0.0, "policy temperatures must be positive");
  require(policy.anneal_to > 0.0, "policy.anneal_to must be positive");
  require(!policy.ops.empty(), "policy.ops must list at least one operation");
  require(search.train_batch >= 1 && search.val_batch >= 1, "search batch sizes must be at least 1");
  require(search.lr > 0.0 && search.policy_lr > 0.0 && search.zeta >= 0.0, "search rates must be positive");
  require(search.weight_decay >= 0.0, "search.weight_decay must be non-negative");
  require(search.val_loss == "l2" || search.val_loss == "ohkm", "search.val_loss must be \"l2\" or \"ohkm\"");
  require(train.batch >= 1, "train.batch must be at least 1");
  require(train.lr > 0.0 && train.weight_decay >= 0.0, "train rates must be positive");
  require(train.lr_drop_fraction >= 0.0 && train.lr_drop_fraction < 1.0, "train.lr_drop_fraction must be in [0, 1)");
  pose::parse_split(eval.split);
  require(eval.blur_sigma >= 0.0, "eval.blur_sigma must be non-negative");
  require(eval.pck_threshold > 0.0, "eval.pck_threshold must be positive");
  require(toy.omega_lr > 0.0 && toy.d_lr > 0.0 && toy.zeta >= 0.0, "toy rates must be positive");
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("<document>", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  auto& spec = c.data.spec;

  Section data;
  data.text("dir", c.data.dir)
      .size("count", spec.count, 1)
      .custom("fractions",
              [&spec](const json& v, const std::string& w) {
                if (!v.is_array() || v.size() != 3) fail(w, "expected [train, val, test]");
                for (std::size_t i = 0; i < 3; ++i) {
                  if (!v[i].is_number()) fail(w, "expected numbers");
                  spec.fractions[i] = v[i].get<double>();
                }
              })
      .custom("scene", [&spec](const json& v, const std::string& w) {
        if (v.is_object() && v.contains("seed")) fail(w + ".seed", "set the top-level seed instead");
        try {
          spec.scene = pose::scene_from_json(v, w);
        } catch (const FormatError& e) {
          throw FormatError(std::string("config: ") + e.what());
        }
      });

  Section model;
  model
      .custom("widths",
              [&c](const json& v, const std::string& w) {
                if (!v.is_array() || v.size() != 4) fail(w, "expected 4 stage widths");
                for (std::size_t i = 0; i < 4; ++i) {
                  if (!v[i].is_number_integer() || v[i].get<long long>() < 1) fail(w, "expected positive integers");
                  c.model.widths[i] = v[i].get<std::size_t>();
                }
              })
      .size("blocks_per_stage", c.model.blocks_per_stage, 1)
      .size("ohkm_alpha", c.model.ohkm_alpha, 1)
      .number("target_sigma", c.model.target_sigma);

  Section policy;
  policy.size("K", c.policy.k, 1)
      .size("N", c.policy.n, 1)
      .number("tau1", c.policy.tau1)
      .number("tau2", c.policy.tau2)
      .flag("anneal", c.policy.anneal)
      .number("anneal_to", c.policy.anneal_to)
      .flag("hard_forward", c.policy.hard_forward)
      .custom("ops", [&c](const json& v, const std::string& w) {
        if (!v.is_array()) fail(w, "expected a list of operation names");
        c.policy.ops.clear();
        for (const json& e : v) {
          if (!e.is_string()) fail(w, "expected operation names");
          const auto kind = aug::parse_kind(e.get<std::string>());
          if (!kind) fail(w, "unknown operation '" + e.get<std::string>() + "'");
          if (std::find(c.policy.ops.begin(), c.policy.ops.end(), *kind) != c.policy.ops.end()) {
            fail(w, "duplicate operation '" + e.get<std::string>() + "'");
          }
          c.policy.ops.push_back(*kind);
        }
      });

  Section search;
  search.size("steps", c.search.steps)
      .size("train_batch", c.search.train_batch, 1)
      .size("val_batch", c.search.val_batch, 1)
      .number("zeta", c.search.zeta)
      .number("lr", c.search.lr)
      .number("weight_decay", c.search.weight_decay)
      .number("policy_lr", c.search.policy_lr)
      .text("val_loss", c.search.val_loss)
      .size("eval_every", c.search.eval_every)
      .size("eval_samples", c.search.eval_samples, 1);

  Section train;
  train.size("steps", c.train.steps)
      .size("batch", c.train.batch, 1)
      .number("lr", c.train.lr)
      .number("weight_decay", c.train.weight_decay)
      .size("checkpoint_every", c.train.checkpoint_every)
      .size("subset", c.train.subset)
      .text("policy", c.train.policy)
      .number("lr_drop_fraction", c.train.lr_drop_fraction);

  Section eval;
  eval.text("split", c.eval.split)
      .flag("flip", c.eval.flip)
      .number("blur_sigma", c.eval.blur_sigma)
      .number("pck_threshold", c.eval.pck_threshold);

  Section toy;
  toy.number("omega", c.toy.omega)
      .number("d", c.toy.d)
      .number("omega_lr", c.toy.omega_lr)
      .number("d_lr", c.toy.d_lr)
      .number("zeta", c.toy.zeta);

  Section root;
  root.custom("task",
              [&c](const json& v, const std::string& w) {
                if (v == "pose") {
                  c.task = Task::Pose;
                } else if (v == "quadratic_toy") {
                  c.task = Task::QuadraticToy;
                } else {
                  fail(w, "expected \"pose\" or \"quadratic_toy\"");
                }
              })
      .custom("seed",
              [&c](const json& v, const std::string& w) {
                if (!v.is_number_integer() || v.get<long long>() < 0) fail(w, "expected a non-negative integer");
                c.seed = v.get<std::uint64_t>();
              })
      .flag("wall_time", c.wall_time)
      .custom("data", nested([&] { return data; }))
      .custom("model", nested([&] { return model; }))
      .custom("policy", nested([&] { return policy; }))
      .custom("search", nested([&] { return search; }))
      .custom("train", nested([&] { return train; }))
      .custom("eval", nested([&] { return eval; }))
      .custom("toy", nested([&] { return toy; }));
  root.apply(doc, "");

  c.data.spec.scene.seed = c.seed;
  try {
    c.validate();
  } catch (const ValueError& e) {
    fail("<document>", e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("config: " + path.string() + ": cannot open");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_config(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& c) {
  json scene = pose::scene_to_json(c.data.spec.scene);
  scene.erase("seed");
  const json doc = {
      {"task", std::string(task_name(c.task))},
      {"seed", c.seed},
      {"wall_time", c.wall_time},
      {"data",
       {{"dir", c.data.dir}, {"count", c.data.spec.count}, {"fractions", c.data.spec.fractions}, {"scene", scene}}},
      {"model",
       {{"widths", c.model.widths},
        {"blocks_per_stage", c.model.blocks_per_stage},
        {"ohkm_alpha", c.model.ohkm_alpha},
        {"target_sigma", c.model.target_sigma}}},
      {"policy",
       {{"K", c.policy.k},
        {"N", c.policy.n},
        {"tau1", c.policy.tau1},
        {"tau2", c.policy.tau2},
        {"anneal", c.policy.anneal},
        {"anneal_to", c.policy.anneal_to},
        {"hard_forward", c.policy.hard_forward},
        {"ops", op_names(c.policy.ops)}}},
      {"search",
       {{"steps", c.search.steps},
        {"train_batch", c.search.train_batch},
        {"val_batch", c.search.val_batch},
        {"zeta", c.search.zeta},
        {"lr", c.search.lr},
        {"weight_decay", c.search.weight_decay},
        {"policy_lr", c.search.policy_lr},
        {"val_loss", c.search.val_loss},
        {"eval_every", c.search.eval_every},
        {"eval_samples", c.search.eval_samples}}},
      {"train",
       {{"steps", c.train.steps},
        {"batch", c.train.batch},
        {"lr", c.train.lr},
        {"weight_decay", c.train.weight_decay},
        {"checkpoint_every", c.train.checkpoint_every},
        {"subset", c.train.subset},
        {"policy", c.train.policy},
        {"lr_drop_fraction", c.train.lr_drop_fraction}}},
      {"eval",
       {{"split", c.eval.split},
        {"flip", c.eval.flip},
        {"blur_sigma", c.eval.blur_sigma},
        {"pck_threshold", c.eval.pck_threshold}}},
      {"toy",
       {{"omega", c.toy.omega},
        {"d", c.toy.d},
        {"omega_lr", c.toy.omega_lr},
        {"d_lr", c.toy.d_lr},
        {"zeta", c.toy.zeta}}}};
  return doc.dump(2) + "\n";
}

}  // namespace p2aug::app
