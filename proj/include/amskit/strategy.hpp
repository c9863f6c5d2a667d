// Copyright 2026 The amskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Design strategies from a text-completion model, and what to do with them.
//
// The model is shown worked examples (spec, then analysis, then strategy)
// and asked to answer a new spec in the same shape:
//
//   ANALYSIS:
//   free reasoning ...
//   STRATEGY:
//   [stage-1]
//   input: differential input pair
//   load: PMOS current mirror
//   [stage-2]
//   type: common source amplifier
//
// Each block is then turned into relation query triplets by a second prompt
// and looked up in the knowledge graph. A failed attempt becomes a new worked
// example whose spec is what the attempt achieved.
//
// Providers are plain text in, text out. ScriptedProvider replays a
// transcript file so everything here runs offline.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amskit/common.hpp"
#include "amskit/kg.hpp"
#include "amskit/measure.hpp"

namespace amskit::strategy {

using nlohmann::json;

class StrategyError : public Error {
 public:
  using Error::Error;
};

/// Unparseable model output. Keeps the raw text so the caller can re-prompt.
class StrategyParseError : public StrategyError {
 public:
  StrategyParseError(const std::string& what, std::string raw)
      : StrategyError(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }
  std::string hint() const {
    return std::string(what()) +
           ". Answer with an ANALYSIS: section followed by a STRATEGY: section of [role] blocks, one "
           "'key: value' line per property.";
  }

 private:
  std::string raw_;
};

class ProviderError : public StrategyError {
 public:
  using StrategyError::StrategyError;
};

// ---------------------------------------------------------------------------
// Specs

/// Multiplier for an SI-prefixed unit ("MHz" -> 1e6, "uV" -> 1e-6). Units
/// that are not a prefix plus a base unit scale by 1.
inline double unit_scale(std::string_view unit) {
  static const std::set<std::string> bases = {"Hz", "V", "s", "W", "F", "A", "Ohm", "ohm"};
  static const std::map<char, double> prefixes = {{'f', 1e-15}, {'p', 1e-12}, {'n', 1e-9}, {'u', 1e-6},
                                                  {'m', 1e-3},  {'k', 1e3},   {'M', 1e6},  {'G', 1e9}};
  if (unit.size() < 2 || bases.count(std::string(unit))) return 1.0;
  auto p = prefixes.find(unit[0]);
  if (p == prefixes.end() || !bases.count(std::string(unit.substr(1)))) return 1.0;
  return p->second;
}

struct Target {
  std::string metric;
  /// One of > >= < <= =.
  std::string op;
  double value = 0.0;
  std::string unit;

  std::string key() const { return kg::metric_key(metric); }
  /// Value in base units, comparable with simulator output.
  double base_value() const { return value * unit_scale(unit); }
  /// Area is reported, never checked.
  bool checked() const { return key() != "area"; }
  bool operator==(const Target&) const = default;
};

inline std::string canonical_op(std::string op) {
  op = std::string(str::trim(op));
  if (op == "≥" || op == "=>") return ">=";
  if (op == "≤" || op == "=<") return "<=";
  if (op == "==") return "=";
  if (op == ">" || op == ">=" || op == "<" || op == "<=" || op == "=") return op;
  throw StrategyError("unknown comparison '" + op + "'");
}

struct DesignSpec {
  std::string circuit;
  std::vector<Target> targets;
  /// Load, supply, sampling rate and similar context, in file order.
  std::vector<std::pair<std::string, std::string>> environment;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& t : targets) {
      if (t.key().empty()) throw StrategyError("target without a metric name");
      if (!seen.insert(t.key()).second) throw StrategyError("metric " + t.metric + " targeted twice");
      if (!std::isfinite(t.value)) throw StrategyError("target for " + t.metric + " is not finite");
      canonical_op(t.op);
    }
  }

  /// Metric keys the spec needs measured, in target order.
  std::vector<std::string> metric_keys() const {
    std::vector<std::string> out;
    for (const auto& t : targets)
      if (t.checked()) out.push_back(t.key());
    return out;
  }

  bool operator==(const DesignSpec&) const = default;
};

inline json to_json(const DesignSpec& s) {
  json j;
  j["circuit"] = s.circuit;
  j["targets"] = json::array();
  for (const auto& t : s.targets)
    j["targets"].push_back({{"metric", t.metric}, {"op", t.op}, {"value", t.value}, {"unit", t.unit}});
  j["environment"] = json::array();
  for (const auto& [k, v] : s.environment) j["environment"].push_back({k, v});
  return j;
}

inline DesignSpec spec_from_json(const json& j) {
  DesignSpec s;
  s.circuit = j.value("circuit", "");
  for (const auto& t : j.value("targets", json::array()))
    s.targets.push_back({t.at("metric").get<std::string>(), canonical_op(t.at("op").get<std::string>()),
                         t.at("value").get<double>(), t.value("unit", "")});
  if (j.contains("environment")) {
    const auto& env = j["environment"];
    if (env.is_object()) {
      for (const auto& [k, v] : env.items()) s.environment.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      for (const auto& kv : env) s.environment.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    }
  }
  s.validate();
  return s;
}

/// Four significant digits, as achieved values are quoted back to the model.
inline double round_sig4(double v) { return std::stod(str::general(v, 4)); }

/// Text form used inside prompts. Distinct specs render differently.
inline std::string render_spec(const DesignSpec& s) {
  std::string out = "circuit: " + s.circuit + "\n";
  out += "targets:\n";
  for (const auto& t : s.targets) {
    out += "- " + t.metric + " " + t.op + " " + str::shortest(t.value);
    if (!t.unit.empty()) out += " " + t.unit;
    out += "\n";
  }
  if (!s.environment.empty()) {
    out += "environment:\n";
    for (const auto& [k, v] : s.environment) out += "- " + k + " = " + v + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strategies

struct StrategyBlock {
  std::string role;
  std::vector<std::pair<std::string, std::string>> description;
  /// Description keys outside the relation vocabulary given to the parser.
  std::vector<std::string> novel;
  bool operator==(const StrategyBlock&) const = default;
};

struct DesignStrategy {
  std::vector<StrategyBlock> blocks;
  std::string rationale;
  bool operator==(const DesignStrategy&) const = default;

  const StrategyBlock* block(const std::string& role) const {
    for (const auto& b : blocks)
      if (b.role == role) return &b;
    return nullptr;
  }
};

inline std::string render_strategy(const DesignStrategy& s) {
  std::string out = "ANALYSIS:\n" + s.rationale;
  if (!s.rationale.empty() && s.rationale.back() != '\n') out += "\n";
  out += "STRATEGY:\n";
  for (const auto& b : s.blocks) {
    out += "[" + b.role + "]\n";
    for (const auto& [k, v] : b.description) out += k + ": " + v + "\n";
  }
  return out;
}

namespace detail {

inline bool is_marker(std::string_view line, std::string_view marker) {
  line = str::trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#')) line = str::trim(line.substr(1));
  while (!line.empty() && line.back() == '*') line = str::trim(line.substr(0, line.size() - 1));
  return str::iequals(line, marker);
}

inline std::optional<std::string> block_header(std::string_view line) {
  line = str::trim(line);
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return std::nullopt;
  std::string role = str::lower(str::trim(line.substr(1, line.size() - 2)));
  if (role.empty()) return std::nullopt;
  return role;
}

inline std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
  std::size_t a = from, b = to;
  while (a < b && str::trim(lines[a]).empty()) ++a;
  while (b > a && str::trim(lines[b - 1]).empty()) --b;
  std::string out;
  for (std::size_t i = a; i < b; ++i) out += lines[i] + "\n";
  return out;
}

}  // namespace detail

/// Reads the ANALYSIS:/STRATEGY: answer format. Keys not in `vocabulary`
/// (normalized relation names) are listed as novel; an empty vocabulary
/// flags nothing.
inline DesignStrategy parse_strategy(const std::string& text, const std::set<std::string>& vocabulary = {}) {
  std::vector<std::string> lines = str::split(text, '\n');
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  std::optional<std::size_t> analysis, strategy;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!analysis && !strategy && detail::is_marker(lines[i], "ANALYSIS:")) analysis = i;
    if (!strategy && detail::is_marker(lines[i], "STRATEGY:")) strategy = i;
  }
  if (!strategy) throw StrategyParseError("response has no STRATEGY: section", text);

  DesignStrategy s;
  s.rationale = detail::join_lines(lines, analysis ? *analysis + 1 : 0, *strategy);
  StrategyBlock* current = nullptr;
  for (std::size_t i = *strategy + 1; i < lines.size(); ++i) {
    std::string_view line = str::trim(lines[i]);
    if (line.empty()) continue;
    if (auto role = detail::block_header(line)) {
      s.blocks.push_back({*role, {}, {}});
      current = &s.blocks.back();
      continue;
    }
    if (line.front() == '-' || line.front() == '*') line = str::trim(line.substr(1));
    auto colon = line.find(':');
    if (!current || colon == std::string_view::npos || colon == 0)
      throw StrategyParseError("strategy line " + std::to_string(i + 1) + " is not a [role] header or key: value pair",
                               text);
    std::string key(str::trim(line.substr(0, colon)));
    std::string value(str::trim(line.substr(colon + 1)));
    current->description.emplace_back(key, value);
    if (!vocabulary.empty() && !vocabulary.count(str::normalize(key))) current->novel.push_back(key);
  }
  if (s.blocks.empty()) throw StrategyParseError("STRATEGY: section has no [role] blocks", text);
  return s;
}

// ---------------------------------------------------------------------------
// History

struct DesignHistoryEntry {
  DesignSpec spec;
  DesignStrategy strategy;
  std::string topology;
  /// Present once sizing ran; keyed by metric key.
  std::optional<std::map<std::string, double>> achieved;
  std::map<std::string, std::string> units;
  bool met = false;
  bool operator==(const DesignHistoryEntry&) const = default;
};

inline json to_json(const DesignStrategy& s) {
  json j;
  j["rationale"] = s.rationale;
  j["blocks"] = json::array();
  for (const auto& b : s.blocks) {
    json d = json::array();
    for (const auto& [k, v] : b.description) d.push_back({k, v});
    j["blocks"].push_back({{"role", b.role}, {"description", d}, {"novel", b.novel}});
  }
  return j;
}

inline DesignStrategy strategy_from_json(const json& j) {
  DesignStrategy s;
  s.rationale = j.value("rationale", "");
  for (const auto& b : j.at("blocks")) {
    StrategyBlock blk{b.at("role").get<std::string>(), {}, b.value("novel", std::vector<std::string>{})};
    for (const auto& kv : b.at("description")) blk.description.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    s.blocks.push_back(std::move(blk));
  }
  return s;
}

inline json to_json(const DesignHistoryEntry& e) {
  json j;
  j["spec"] = to_json(e.spec);
  j["strategy"] = to_json(e.strategy);
  j["topology"] = e.topology;
  j["achieved"] = e.achieved ? json(*e.achieved) : json(nullptr);
  j["units"] = e.units;
  j["met"] = e.met;
  return j;
}

inline DesignHistoryEntry history_from_json(const json& j) {
  DesignHistoryEntry e;
  e.spec = spec_from_json(j.at("spec"));
  e.strategy = strategy_from_json(j.at("strategy"));
  e.topology = j.value("topology", "");
  if (j.contains("achieved") && !j["achieved"].is_null()) e.achieved = j["achieved"].get<std::map<std::string, double>>();
  e.units = j.value("units", std::map<std::string, std::string>{});
  e.met = j.value("met", false);
  return e;
}

// ---------------------------------------------------------------------------
// Prompts

inline constexpr const char* kStrategyInstructions =
    "You are an experienced analog and mixed-signal circuit designer. Given a performance specification, "
    "first analyze the requirements qualitatively and explain your thought process step by step, then "
    "describe a circuit architecture as a list of circuit components.\n"
    "Answer in exactly the format of the examples: an ANALYSIS: section with your reasoning, then a "
    "STRATEGY: section with one [role] header per component (roles such as stage-1, stage-2, bias, "
    "compensation, latch) followed by 'key: value' lines describing it.\n";

inline std::string render_fewshot(const DesignHistoryEntry& e) {
  return "SPEC:\n" + render_spec(e.spec) + "ANSWER:\n" + render_strategy(e.strategy);
}

/// Instructions, then every fewshot, then the target spec last.
inline std::string build_strategy_prompt(const DesignSpec& spec, const std::vector<DesignHistoryEntry>& fewshots) {
  if (fewshots.empty()) throw StrategyError("a strategy prompt needs at least one fewshot example");
  std::string p = kStrategyInstructions;
  for (std::size_t i = 0; i < fewshots.size(); ++i)
    p += "\n### Example " + std::to_string(i + 1) + "\n" + render_fewshot(fewshots[i]);
  p += "\n### Request\nSPEC:\n" + render_spec(spec) + "Let's think step by step.\nANSWER:\n";
  return p;
}

/// Reverses cause and effect: the spec becomes what the attempt achieved, as
/// if that had been the goal, and the answer is the strategy that got there.
/// Only the targeted metrics are quoted, in target order and units, rounded
/// to four significant digits.
inline DesignHistoryEntry build_regeneration_fewshot(const DesignHistoryEntry& entry) {
  if (!entry.achieved) throw StrategyError("regeneration needs an attempt with achieved measurements");
  DesignHistoryEntry out;
  out.spec.circuit = entry.spec.circuit;
  out.spec.environment = entry.spec.environment;
  for (const auto& t : entry.spec.targets) {
    auto it = entry.achieved->find(t.key());
    if (it == entry.achieved->end()) continue;
    double scale = unit_scale(t.unit);
    out.spec.targets.push_back({t.metric, "=", round_sig4(it->second / scale), t.unit});
  }
  out.strategy = entry.strategy;
  out.topology = entry.topology;
  out.achieved = entry.achieved;
  out.units = entry.units;
  out.met = true;
  return out;
}

// ---------------------------------------------------------------------------
// Providers

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

inline std::string prompt_hash(const std::string& prompt) { return hex64(fnv1a64(prompt)); }

/// Replays a transcript: an ordered list of {prompt_hash, response}. Each
/// call consumes the next record, whose hash must match the prompt ("*"
/// matches anything, for hand-written transcripts).
class ScriptedProvider : public TextProvider {
 public:
  struct Record {
    std::string prompt_hash;
    std::string response;
    std::string note;
  };

  explicit ScriptedProvider(std::vector<Record> records, std::string label = "scripted")
      : records_(std::move(records)), label_(std::move(label)) {}

  static ScriptedProvider from_json(const json& j, std::string label = "scripted") {
    std::vector<Record> recs;
    for (const auto& r : j.at("records"))
      recs.push_back({r.at("prompt_hash").get<std::string>(), r.at("response").get<std::string>(), r.value("note", "")});
    return ScriptedProvider(std::move(recs), std::move(label));
  }

  static ScriptedProvider load(const std::string& path) {
    try {
      return from_json(json::parse(read_file(path)), path);
    } catch (const json::exception& e) {
      throw ProviderError("transcript " + path + ": " + e.what());
    }
  }

  std::string complete(const std::string& prompt) override {
    std::string h = prompt_hash(prompt);
    seen_.push_back(h);
    if (next_ >= records_.size())
      throw ProviderError(label_ + ": transcript exhausted after " + std::to_string(records_.size()) +
                          " records (prompt hash " + h + ")");
    const auto& r = records_[next_];
    if (r.prompt_hash != "*" && r.prompt_hash != h)
      throw ProviderError(label_ + ": record " + std::to_string(next_) + " expects prompt hash " + r.prompt_hash +
                          ", got " + h);
    ++next_;
    return r.response;
  }

  std::string name() const override { return label_; }
  std::size_t calls() const { return seen_.size(); }
  /// Hashes of every prompt received, in order.
  const std::vector<std::string>& seen() const { return seen_; }
  bool exhausted() const { return next_ == records_.size(); }

 private:
  std::vector<Record> records_;
  std::string label_;
  std::size_t next_ = 0;
  std::vector<std::string> seen_;
};

struct ProviderConfig {
  enum class Kind { Remote, Scripted };
  Kind kind = Kind::Scripted;
  /// Chat-completions URL, e.g. http://localhost:8080/v1/chat/completions.
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  std::string transcript;
  std::string api_key_env = "AMSKIT_API_KEY";
  double timeout_s = 120.0;
};

inline ProviderConfig provider_from_json(const json& j) {
  ProviderConfig c;
  std::string kind = j.value("kind", "scripted");
  if (kind == "remote") c.kind = ProviderConfig::Kind::Remote;
  else if (kind == "scripted") c.kind = ProviderConfig::Kind::Scripted;
  else throw ProviderError("provider kind must be remote or scripted, got " + kind);
  c.endpoint = j.value("endpoint", "");
  c.model = j.value("model", "");
  c.temperature = j.value("temperature", 0.0);
  c.transcript = j.value("transcript", "");
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  if (c.kind == ProviderConfig::Kind::Scripted && c.transcript.empty())
    throw ProviderError("scripted provider needs a transcript path");
  if (c.kind == ProviderConfig::Kind::Remote && (c.endpoint.empty() || c.model.empty()))
    throw ProviderError("remote provider needs endpoint and model");
  if (!(c.timeout_s > 0)) throw ProviderError("provider timeout must be positive");
  return c;
}

/// Chat-completions over HTTP. The bearer token comes from the environment
/// variable named in the config, if set.
class RemoteProvider : public TextProvider {
 public:
  explicit RemoteProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    auto scheme = cfg_.endpoint.find("://");
    if (scheme == std::string::npos) throw ProviderError("endpoint " + cfg_.endpoint + " has no scheme");
    auto slash = cfg_.endpoint.find('/', scheme + 3);
    base_ = cfg_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (str::starts_with(base_, "https")) throw ProviderError("this build has no TLS support; use an http endpoint");
#endif
  }

  std::string complete(const std::string& prompt) override {
    httplib::Client cli(base_);
    auto secs = static_cast<time_t>(std::ceil(cfg_.timeout_s));
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
    json body = {{"model", cfg_.model},
                 {"temperature", cfg_.temperature},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      auto j = json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw ProviderError(std::string("unexpected provider reply: ") + e.what());
    }
  }

  std::string name() const override { return cfg_.model + "@" + cfg_.endpoint; }

 private:
  ProviderConfig cfg_;
  std::string base_;
  std::string path_;
};

inline std::unique_ptr<TextProvider> make_provider(const ProviderConfig& c) {
  if (c.kind == ProviderConfig::Kind::Scripted)
    return std::make_unique<ScriptedProvider>(ScriptedProvider::load(c.transcript));
  return std::make_unique<RemoteProvider>(c);
}

// ---------------------------------------------------------------------------
// Requests

/// Prompts for a strategy and parses it, re-prompting up to `retries` times
/// with the parse error appended.
inline DesignStrategy request_strategy(const DesignSpec& spec, const std::vector<DesignHistoryEntry>& fewshots,
                                       TextProvider& provider, const std::set<std::string>& vocabulary = {},
                                       int retries = 2) {
  const std::string base = build_strategy_prompt(spec, fewshots);
  std::string prompt = base;
  for (int attempt = 0;; ++attempt) {
    std::string reply = provider.complete(prompt);
    try {
      return parse_strategy(reply, vocabulary);
    } catch (const StrategyParseError& e) {
      if (attempt >= retries) throw;
      spdlog::warn("strategy reply unparseable ({}); asking again", e.what());
      prompt = base + "\nYour previous answer could not be used: " + e.hint() + "\nANSWER:\n";
    }
  }
}

struct TripletSet {
  /// Per block, in strategy order.
  std::vector<std::pair<std::string, std::vector<kg::Triplet>>> by_role;
  std::vector<std::string> warnings;

  const std::vector<kg::Triplet>* find(const std::string& role) const {
    for (const auto& [r, t] : by_role)
      if (r == role) return &t;
    return nullptr;
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [r, t] : by_role) n += t.size();
    return n;
  }
};

inline constexpr const char* kTripletInstructions =
    "Convert each block of the design strategy into relation query triplets of the form "
    "<_, relation, object>, where _ stands for the circuit being looked up. Keep the [role] headers and "
    "write one triplet per line.\n";

inline constexpr const char* kTripletExample =
    "STRATEGY:\n"
    "[latch]\n"
    "type: latch comparator\n"
    "clocking: single phase\n"
    "TRIPLETS:\n"
    "[latch]\n"
    "<_, type, latch comparator>\n"
    "<_, clocking, single phase>\n";

inline std::string build_triplet_prompt(const DesignStrategy& s, const std::set<std::string>& relations) {
  std::string p = kTripletInstructions;
  if (!relations.empty()) {
    std::vector<std::string> rel(relations.begin(), relations.end());
    p += "Use only these relations: " + str::join(rel, ", ") + ".\n";
  }
  p += "\n### Example\n";
  p += kTripletExample;
  std::string strat;
  for (const auto& b : s.blocks) {
    strat += "[" + b.role + "]\n";
    for (const auto& [k, v] : b.description) strat += k + ": " + v + "\n";
  }
  p += "\n### Request\nSTRATEGY:\n" + strat + "TRIPLETS:\n";
  return p;
}

inline std::optional<kg::Triplet> parse_triplet(std::string_view line) {
  line = str::trim(line);
  if (line.size() < 2 || line.front() != '<' || line.back() != '>') return std::nullopt;
  auto parts = str::split(line.substr(1, line.size() - 2), ',');
  if (parts.size() < 3) return std::nullopt;
  std::string object;
  for (std::size_t i = 2; i < parts.size(); ++i) object += (i > 2 ? "," : "") + parts[i];
  kg::Triplet t{std::string(str::trim(parts[0])), std::string(str::trim(parts[1])), std::string(str::trim(object))};
  if (t.relation.empty() || t.object.empty()) return std::nullopt;
  if (t.wildcard()) t.subject = "_";
  return t;
}

/// Asks the provider for triplets, then keeps the ones whose relation is in
/// `relations` (normalized). Blocks with no description get no triplets and
/// a warning. Throws when nothing usable remains.
inline TripletSet strategy_to_triplets(const DesignStrategy& s, TextProvider& provider,
                                       const std::set<std::string>& relations) {
  TripletSet out;
  for (const auto& b : s.blocks) {
    out.by_role.emplace_back(b.role, std::vector<kg::Triplet>{});
    if (b.description.empty()) out.warnings.push_back("block [" + b.role + "] has no description");
  }
  std::string reply = provider.complete(build_triplet_prompt(s, relations));
  std::vector<kg::Triplet>* current = nullptr;
  const StrategyBlock* block = nullptr;
  std::set<std::string> reported;
  for (const auto& raw : str::split(reply, '\n')) {
    std::string_view line = str::trim(raw);
    if (line.empty() || detail::is_marker(line, "TRIPLETS:")) continue;
    if (auto role = detail::block_header(line)) {
      current = nullptr;
      block = s.block(*role);
      for (auto& [r, t] : out.by_role)
        if (r == *role) current = &t;
      if (!current) out.warnings.push_back("triplets for unknown block [" + *role + "] ignored");
      continue;
    }
    auto t = parse_triplet(line);
    if (!t) {
      out.warnings.push_back("unreadable triplet line: " + std::string(line));
      continue;
    }
    if (!current || block->description.empty()) continue;
    if (!relations.empty() && !relations.count(str::normalize(t->relation))) {
      if (reported.insert(t->relation).second) out.warnings.push_back("unknown relation '" + t->relation + "' dropped");
      continue;
    }
    if (std::find(current->begin(), current->end(), *t) == current->end()) current->push_back(*t);
  }
  for (auto& w : out.warnings) spdlog::warn("{}", w);
  if (out.size() == 0) throw StrategyError("no usable triplets in the provider reply");
  return out;
}

struct TieBreak {
  std::string selected;
  std::size_t index = 0;
  bool asked = false;
  std::optional<std::string> warning;
};

inline std::string build_tie_break_prompt(const std::vector<std::string>& candidates, const std::string& context) {
  std::string p;
  if (!context.empty()) p += context + "\n";
  p += "Several stored circuits match this part of the design:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) p += std::to_string(i + 1) + ". " + candidates[i] + "\n";
  p += "Which one should be used? Reply with its name only.\n";
  return p;
}

/// Lets the provider choose among equally ranked candidates (in rank
/// order). The reply must name exactly one candidate; otherwise rank 1 is
/// taken with a warning. Never fails.
inline TieBreak tie_break(const std::vector<std::string>& candidates, TextProvider& provider,
                          const std::string& context = {}) {
  if (candidates.empty()) throw StrategyError("tie_break needs candidates");
  TieBreak out{candidates.front(), 0, false, std::nullopt};
  if (candidates.size() == 1) return out;
  out.asked = true;
  std::string reply;
  try {
    reply = provider.complete(build_tie_break_prompt(candidates, context));
  } catch (const std::exception& e) {
    out.warning = std::string("tie-break provider failed (") + e.what() + "); using " + candidates.front();
    spdlog::warn("{}", *out.warning);
    return out;
  }
  std::string r = str::normalize(reply);
  std::vector<std::size_t> exact, contained;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::string c = str::normalize(candidates[i]);
    if (r == c) exact.push_back(i);
    else if (!c.empty() && (" " + r + " ").find(" " + c + " ") != std::string::npos) contained.push_back(i);
  }
  const auto& hits = exact.size() == 1 ? exact : contained;
  if (exact.size() == 1 || (exact.empty() && contained.size() == 1)) {
    out.index = hits.front();
    out.selected = candidates[out.index];
    return out;
  }
  out.warning = "tie-break reply '" + std::string(str::trim(reply)) + "' names no single candidate; using " +
                candidates.front();
  spdlog::warn("{}", *out.warning);
  return out;
}

}  // namespace amskit::strategy
