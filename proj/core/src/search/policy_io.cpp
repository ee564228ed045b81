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

#include "p2aug/search/policy_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "p2aug/error.hpp"
#include "p2aug/log.hpp"

namespace p2aug::search {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw FormatError("policy file: " + path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "not finite");
  return x;
}

std::size_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 1) fail(path, "expected a positive integer");
  return v.get<std::size_t>();
}

const json& array_of(const json& v, std::size_t size, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  if (v.size() != size) fail(path, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
  return v;
}

std::vector<double> logits_from(const json& doc, std::size_t k) {
  std::vector<double> l(k);
  if (doc.contains("logits")) {
    const json& a = array_of(doc["logits"], k, "logits");
    for (std::size_t i = 0; i < k; ++i) l[i] = number(a[i], "logits[" + std::to_string(i) + "]");
    return l;
  }
  const json& a = array_of(field(doc, "pi", ""), k, "pi");
  for (std::size_t i = 0; i < k; ++i) {
    const double p = number(a[i], "pi[" + std::to_string(i) + "]");
    if (!(p > 0.0)) fail("pi[" + std::to_string(i) + "]", "probabilities must be positive");
    l[i] = std::log(p);
  }
  return l;
}

}  // namespace

std::string export_policy(const Policy& policy) {
  json doc;
  doc["version"] = kPolicyFileVersion;
  doc["K"] = policy.k();
  doc["N"] = policy.n();
  doc["tau1"] = policy.tau1();
  doc["tau2"] = policy.tau2();
  doc["logits"] = std::vector<double>(policy.logits().data().begin(), policy.logits().data().end());
  doc["pi"] = policy.pi();
  json slots = json::array();
  for (std::size_t k = 0; k < policy.k(); ++k) {
    json row = json::array();
    for (std::size_t n = 0; n < policy.n(); ++n) {
      const OperationSlot& s = policy.slot(k, n);
      row.push_back({{"kind", std::string(aug::name(s.kind))},
                     {"p", s.probability()},
                     {"m", s.magnitude.item()},
                     {"p_logit", s.p_logit.item()}});
    }
    slots.push_back(std::move(row));
  }
  doc["slots"] = std::move(slots);
  return doc.dump(2) + "\n";
}

Policy import_policy(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("<document>", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("<document>", "expected an object");
  const json& version = field(doc, "version", "");
  if (!version.is_number_integer() || version.get<int>() != kPolicyFileVersion) {
    fail("version", "unsupported version (expected " + std::to_string(kPolicyFileVersion) + ")");
  }
  const std::size_t k = count(field(doc, "K", ""), "K");
  const std::size_t n = count(field(doc, "N", ""), "N");
  const double tau1 = number(field(doc, "tau1", ""), "tau1");
  const double tau2 = number(field(doc, "tau2", ""), "tau2");
  if (!(tau1 > 0.0)) fail("tau1", "must be positive");
  if (!(tau2 > 0.0)) fail("tau2", "must be positive");
  Policy policy(k, n, tau1, tau2);

  std::vector<double> logits = logits_from(doc, k);
  double total = 0.0;
  for (double l : logits) total += std::exp(l);
  if (std::abs(total - 1.0) > 1e-9) {
    log::warn("policy file: sub-policy probabilities sum to " + std::to_string(total) + "; renormalizing");
    const double shift = std::log(total);
    for (double& l : logits) l -= shift;
  }
  std::copy(logits.begin(), logits.end(), policy.logits().data_mut().begin());

  const json& slots = array_of(field(doc, "slots", ""), k, "slots");
  for (std::size_t i = 0; i < k; ++i) {
    const std::string row_path = "slots[" + std::to_string(i) + "]";
    const json& row = array_of(slots[i], n, row_path);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string path = row_path + "[" + std::to_string(j) + "]";
      const json& entry = row[j];
      if (!entry.is_object()) fail(path, "expected an object");
      const json& kind = field(entry, "kind", path);
      if (!kind.is_string()) fail(path + ".kind", "expected a string");
      auto parsed = aug::parse_kind(kind.get<std::string>());
      if (!parsed) fail(path + ".kind", "unknown operation '" + kind.get<std::string>() + "'");
      OperationSlot& slot = policy.slot(i, j);
      slot.kind = *parsed;
      if (entry.contains("p_logit")) {
        slot.p_logit.data_mut()[0] = number(entry["p_logit"], path + ".p_logit");
      } else {
        const double p = number(field(entry, "p", path), path + ".p");
        if (!(p > 0.0 && p < 1.0)) fail(path + ".p", "must lie strictly inside (0, 1)");
        slot.p_logit.data_mut()[0] = std::log(p / (1.0 - p));
      }
      const double m = number(field(entry, "m", path), path + ".m");
      if (!(m >= 0.0 && m <= 1.0)) fail(path + ".m", "must lie inside [0, 1]");
      slot.magnitude.data_mut()[0] = m;
    }
  }
  return policy;
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << export_policy(policy);
  if (!out) throw Error("failed writing " + path.string());
}

Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return import_policy(buf.str());
}

}  // namespace p2aug::search
