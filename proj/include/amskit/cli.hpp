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

// Command implementations behind the amskit tool: run manifests, per-run
// output directories and the spec-to-netlist design loop.

#pragma once

#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "amskit/assembly.hpp"
#include "amskit/common.hpp"
#include "amskit/deck.hpp"
#include "amskit/kg.hpp"
#include "amskit/schem_trace.hpp"
#include "amskit/simbridge.hpp"
#include "amskit/sizing.hpp"
#include "amskit/strategy.hpp"

namespace amskit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kTraceExceptions = 2, kInfeasible = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Run directories

/// Fresh directory under `out`. Without a run id the name is a UTC
/// timestamp, suffixed when taken; an explicit id must be new.
inline fs::path make_run_dir(const fs::path& out, const std::string& run_id = {}) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory " + out.string() + ": " + ec.message());
  if (!run_id.empty()) {
    if (run_id.find('/') != std::string::npos || run_id == "." || run_id == "..")
      throw UsageError("run id '" + run_id + "' is not a plain name");
    fs::path dir = out / run_id;
    if (!fs::create_directory(dir, ec)) throw UsageError("run directory " + dir.string() + " already exists");
    return dir;
  }
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  for (int n = 1;; ++n) {
    fs::path dir = out / (n == 1 ? std::string(stamp) : std::string(stamp) + "-" + std::to_string(n));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  }
}

inline void write_json(const fs::path& p, const json& j) { write_file(p.string(), j.dump(2) + "\n"); }

inline json read_json(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("file not found: " + p.string());
  try {
    return json::parse(read_file(p.string()));
  } catch (const json::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

/// Annotation directory or saved store, told apart by index.json.
inline kg::Store load_kg(const fs::path& p) {
  if (!fs::is_directory(p)) throw UsageError("knowledge graph directory not found: " + p.string());
  if (fs::exists(p / "index.json")) return kg::Store::load(p);
  return kg::build_from_directory(p);
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  fs::path spec;
  fs::path kg;
  fs::path rules;
  simbridge::BackendConfig backend;
  strategy::ProviderConfig provider;
  sizing::BOConfig bo;
  sizing::FoMConfig fom;
  std::vector<fs::path> fewshots;
  std::map<std::string, sizing::Range> ranges = sizing::default_ranges();
  bool use_ties = true;
  fs::path output = "runs";
  std::size_t max_attempts = 3;

  void validate() const {
    auto need = [](const fs::path& p, const char* what) {
      if (p.empty()) throw UsageError(std::string("manifest names no ") + what);
      if (!fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
    };
    need(spec, "spec");
    need(kg, "knowledge graph");
    need(rules, "wiring rules");
    for (const auto& f : fewshots) need(f, "fewshot");
    if (fewshots.empty()) throw UsageError("manifest needs at least one fewshot");
    if (provider.kind == strategy::ProviderConfig::Kind::Scripted) need(provider.transcript, "transcript");
    if (max_attempts < 1) throw UsageError("max_attempts must be at least 1");
    if (fom.terms.empty()) throw UsageError("manifest figure of merit has no terms");
    backend.validate();
  }
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : (base / q).lexically_normal();
}

/// Inline object, or a path to a JSON file; `dir` becomes that file's folder.
inline json section(const json& j, const fs::path& base, fs::path& dir) {
  dir = base;
  if (j.is_string()) {
    fs::path p = resolve(base, j.get<std::string>());
    dir = p.parent_path();
    return read_json(p);
  }
  if (!j.is_object()) throw UsageError("manifest section must be an object or a file path");
  return j;
}

}  // namespace detail

inline RunManifest manifest_from_json(const json& j, const fs::path& base) {
  RunManifest m;
  try {
    m.spec = detail::resolve(base, j.at("spec").get<std::string>());
    m.kg = detail::resolve(base, j.at("kg").get<std::string>());
    m.rules = detail::resolve(base, j.at("rules").get<std::string>());
    fs::path dir;
    m.backend = simbridge::backend_from_json(detail::section(j.at("backend"), base, dir));
    if (!m.backend.workdir.empty()) m.backend.workdir = detail::resolve(dir, m.backend.workdir).string();
    m.provider = strategy::provider_from_json(detail::section(j.at("provider"), base, dir));
    if (!m.provider.transcript.empty()) m.provider.transcript = detail::resolve(dir, m.provider.transcript).string();
    m.bo = sizing::bo_config_from_json(j.contains("bo") ? detail::section(j.at("bo"), base, dir) : json::object());
    m.fom = sizing::fom_from_json(detail::section(j.at("fom"), base, dir));
    for (const auto& f : j.value("fewshots", json::array())) m.fewshots.push_back(detail::resolve(base, f.get<std::string>()));
    if (j.contains("ranges")) {
      auto extra = sizing::ranges_from_json(detail::section(j.at("ranges"), base, dir));
      for (auto& [k, r] : extra) m.ranges[k] = r;
    }
    m.use_ties = j.value("use_ties", true);
    m.output = detail::resolve(base, j.value("output", std::string("runs")));
    auto attempts = j.value("max_attempts", 3);
    if (attempts < 1) throw UsageError("max_attempts must be at least 1");
    m.max_attempts = static_cast<std::size_t>(attempts);
  } catch (const json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

inline RunManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_json(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Metrics

/// Metrics computed from others: CMRR and PSRR as gain differences in dB.
inline const std::map<std::string, std::pair<std::string, std::string>>& derived_metrics() {
  static const std::map<std::string, std::pair<std::string, std::string>> table = {
      {"cmrr", {"dm_gain", "cm_gain"}}, {"psrr", {"dm_gain", "ps_gain"}}};
  return table;
}

/// Metrics to simulate for the wanted ones: derivable metrics that no
/// testbench measures are replaced by their operands.
inline std::vector<std::string> measured_metrics(const std::vector<std::string>& wanted, const kg::Store& store) {
  std::vector<std::string> out;
  auto add = [&](const std::string& m) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  };
  for (const auto& w : wanted) {
    auto key = kg::metric_key(w);
    auto it = derived_metrics().find(key);
    if (it != derived_metrics().end() && !store.get_testbenches({key}).missing.empty()) {
      add(it->second.first);
      add(it->second.second);
    } else {
      add(key);
    }
  }
  return out;
}

inline void add_derived(MeasurementSet& m) {
  for (const auto& [name, ops] : derived_metrics()) {
    if (m.has(name) || !m.has(ops.first) || !m.has(ops.second)) continue;
    m.values[name] = m.at(ops.first) - m.at(ops.second);
    m.units[name] = "dB";
  }
}

/// Gate area estimate in square metres: sum of W * L * nf over transistors.
inline double gate_area(const netlist::Netlist& n) {
  double a = 0.0;
  for (const auto& c : n.components) {
    if (!netlist::is_mos(c.kind)) continue;
    auto get = [&](const char* k, double d) {
      auto it = c.params.find(k);
      return it == c.params.end() ? d : it->second;
    };
    a += get("W", 0.0) * get("L", 0.0) * get("nf", 1.0);
  }
  for (const auto& s : n.subcircuits) a += gate_area(s.body);
  return a;
}

inline sizing::FoMConfig with_spec_constraints(sizing::FoMConfig fom, const strategy::DesignSpec& spec) {
  for (const auto& t : spec.targets)
    if (t.checked()) fom.constraints.push_back({t.key(), t.op, t.base_value(), false});
  return fom;
}

/// Space over the deck slots; matched groups tie every parameter their
/// members share.
inline sizing::ParameterSpace space_for_deck(const deck::SimulationDeck& d, bool use_ties,
                                             const std::map<std::string, sizing::Range>& ranges,
                                             const std::vector<kg::TieGroup>& groups = {}) {
  std::vector<kg::TieGroup> ties = groups;
  if (ties.empty()) {
    for (const auto& g : d.matched) {
      std::set<std::string> params;
      for (const auto& s : d.slots) {
        auto dot = s.rfind('.');
        if (s.substr(0, dot) == g.front()) params.insert(s.substr(dot + 1));
      }
      ties.push_back({g, {params.begin(), params.end()}, kg::TieMode::Equal, 1.0});
    }
  }
  return sizing::space_from_paths(d.slots, ties, use_ties, ranges);
}

/// Evaluates every deck at the same sizing and merges the measurements,
/// then adds the derived rejection metrics. The decks and backend must
/// outlive the evaluator.
inline sizing::Evaluator deck_evaluator(const std::vector<deck::SimulationDeck>& decks,
                                        const simbridge::Backend& backend) {
  return [&decks, &backend](const Assignment& a) {
    MeasurementSet all;
    for (const auto& d : decks) {
      auto r = backend.evaluate(d, a);
      if (!r.ok) return MeasurementSet::failed(d.name + ": " + r.reason);
      for (auto& [n, v] : r.values) all.values[n] = v;
      for (auto& [n, u] : r.units) all.units[n] = u;
    }
    add_derived(all);
    return all;
  };
}

// ---------------------------------------------------------------------------
// Conversation log

/// Passes prompts through and appends every exchange to a JSON-lines file.
class LoggedProvider : public strategy::TextProvider {
 public:
  LoggedProvider(strategy::TextProvider& inner, const fs::path& log) : inner_(inner), log_(log, std::ios::binary) {
    if (!log_) throw Error("cannot open " + log.string());
  }

  std::string complete(const std::string& prompt) override {
    json rec = {{"seq", ++seq_}, {"prompt_hash", strategy::prompt_hash(prompt)}, {"prompt", prompt}};
    try {
      auto reply = inner_.complete(prompt);
      rec["response"] = reply;
      log_ << rec.dump() << "\n" << std::flush;
      return reply;
    } catch (const std::exception& e) {
      rec["error"] = e.what();
      log_ << rec.dump() << "\n" << std::flush;
      throw;
    }
  }
  std::string name() const override { return inner_.name(); }

 private:
  strategy::TextProvider& inner_;
  std::ofstream log_;
  std::size_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// Design loop

struct AttemptReport {
  std::size_t index = 0;
  std::string topology;
  std::vector<std::pair<std::string, std::string>> parts;
  std::vector<std::string> testbenches;
  std::size_t free_params = 0;
  std::size_t params = 0;
  std::size_t evaluations = 0;
  std::size_t chosen = 0;
  double fom = 0.0;
  bool met = false;
  std::map<std::string, double> achieved;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  double area_um2 = 0.0;
};

struct DesignReport {
  /// "met" or "infeasible".
  std::string status;
  std::string reason;
  std::vector<AttemptReport> attempts;
  std::optional<std::size_t> final_attempt;
  fs::path run_dir;

  int exit_code() const { return status == "met" ? kOk : kInfeasible; }
};

inline json to_json(const AttemptReport& a) {
  json parts = json::array();
  for (const auto& [role, id] : a.parts) parts.push_back({{"role", role}, {"entity", id}});
  return {{"attempt", a.index},       {"topology", a.topology},       {"parts", parts},
          {"testbenches", a.testbenches}, {"params", a.params},       {"free_params", a.free_params},
          {"evaluations", a.evaluations}, {"chosen_eval", a.chosen},  {"fom", a.fom},
          {"met", a.met},             {"achieved", a.achieved},       {"violations", a.violations},
          {"warnings", a.warnings},   {"area_um2", a.area_um2}};
}

inline json to_json(const DesignReport& r) {
  json attempts = json::array();
  for (const auto& a : r.attempts) attempts.push_back(to_json(a));
  json j = {{"status", r.status}, {"reason", r.reason}, {"attempts", attempts}};
  j["final_attempt"] = r.final_attempt ? json(*r.final_attempt) : json(nullptr);
  return j;
}

namespace detail {

inline std::string block_context(const strategy::StrategyBlock& b) {
  std::string s = "Design block [" + b.role + "]:";
  for (const auto& [k, v] : b.description) s += "\n" + k + ": " + v;
  return s;
}

inline bool worse(const AttemptReport& a, const AttemptReport& b) {
  if (a.met != b.met) return !a.met;
  if (a.violations.size() != b.violations.size()) return a.violations.size() > b.violations.size();
  return a.fom < b.fom;
}

}  // namespace detail

/// Strategy, retrieval, assembly and sizing, repeated with reversed
/// cause-effect fewshots until the spec is met or no new topology comes up.
/// Writes everything under `run_dir`. `provider` overrides the manifest's.
inline DesignReport run_design(const RunManifest& m, const fs::path& run_dir,
                               strategy::TextProvider* provider = nullptr) {
  DesignReport report;
  report.run_dir = run_dir;
  auto spec = strategy::spec_from_json(read_json(m.spec));
  const kg::Store store = load_kg(m.kg);
  const auto rules = assembly::load_rules(m.rules.string());
  std::vector<strategy::DesignHistoryEntry> base_shots;
  for (const auto& f : m.fewshots) base_shots.push_back(strategy::history_from_json(read_json(f)));
  const simbridge::Backend backend(m.backend);

  std::unique_ptr<strategy::TextProvider> owned;
  if (!provider) {
    owned = strategy::make_provider(m.provider);
    provider = owned.get();
  }
  LoggedProvider llm(*provider, run_dir / "conversation.jsonl");
  std::ofstream history(run_dir / "history.jsonl", std::ios::binary);
  write_json(run_dir / "spec.json", strategy::to_json(spec));

  auto finish = [&](std::string status, std::string reason) {
    report.status = std::move(status);
    report.reason = std::move(reason);
    if (!report.attempts.empty()) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < report.attempts.size(); ++i)
        if (detail::worse(report.attempts[best], report.attempts[i])) best = i;
      report.final_attempt = best + 1;
      fs::copy_file(run_dir / ("attempt-" + std::to_string(best + 1)) / "netlist.sp", run_dir / "final.sp",
                    fs::copy_options::overwrite_existing);
    }
    write_json(run_dir / "report.json", to_json(report));
    return report;
  };

  const auto ids = store.ids();
  if (std::none_of(ids.begin(), ids.end(),
                   [&](const std::string& id) { return store.get(id)->cls == kg::EntityClass::Circuit; }))
    return finish("infeasible", "no candidates: the knowledge graph holds no circuits");

  std::vector<strategy::DesignHistoryEntry> entries;
  std::set<std::string> tried;
  const auto relations = store.relations();
  const auto fom_cfg = with_spec_constraints(m.fom, spec);

  for (std::size_t k = 1; k <= m.max_attempts; ++k) {
    spdlog::info("attempt {}: requesting a design strategy", k);
    auto shots = base_shots;
    for (const auto& e : entries)
      if (e.achieved) shots.push_back(strategy::build_regeneration_fewshot(e));
    auto strat = strategy::request_strategy(spec, shots, llm, relations);
    auto triplets = strategy::strategy_to_triplets(strat, llm, relations);

    AttemptReport att;
    att.index = k;
    att.warnings = triplets.warnings;
    std::vector<assembly::Part> parts;
    std::string missing;
    for (const auto& block : strat.blocks) {
      const auto* ts = triplets.find(block.role);
      if (!ts || ts->empty()) continue;
      auto hits = store.query(*ts);
      if (hits.empty()) {
        missing = block.role;
        break;
      }
      std::vector<std::string> names;
      for (const auto& h : hits)
        if (h.matched == hits.front().matched) names.push_back(h.entity->display_name());
      auto pick = strategy::tie_break(names, llm, detail::block_context(block));
      if (pick.warning) att.warnings.push_back(*pick.warning);
      parts.push_back({*hits[pick.index].entity, block.role});
    }
    if (!missing.empty()) return finish("infeasible", "no candidates for block [" + missing + "]");
    if (parts.empty()) return finish("infeasible", "no candidates: no block produced a usable query");
    for (const auto& added : assembly::add_support_parts(parts, rules, store))
      att.warnings.push_back("added " + added + " part " + parts.back().entity.id);
    for (const auto& p : parts) {
      att.parts.emplace_back(p.role, p.entity.id);
      att.topology += (att.topology.empty() ? "" : ";") + p.role + "=" + p.entity.id;
    }
    if (!tried.insert(att.topology).second)
      return finish("infeasible", "candidates exhausted: topology " + att.topology + " was already tried");

    fs::path dir = run_dir / ("attempt-" + std::to_string(k));
    fs::create_directories(dir);
    write_file((dir / "strategy.txt").string(), strategy::render_strategy(strat));

    auto plan = assembly::plan_connections(parts, rules);
    auto circuit = assembly::assemble(parts, plan);
    write_json(dir / "plan.json", assembly::to_json(plan));
    std::vector<std::string> wanted = spec.metric_keys();
    for (const auto& t : fom_cfg.terms) wanted.push_back(t.metric);
    auto sel = store.get_testbenches(measured_metrics(wanted, store));
    if (!sel.missing.empty())
      throw Error("no testbench measures " + str::join(sel.missing, ", "));
    std::vector<deck::SimulationDeck> decks;
    for (const auto& tb : sel.testbenches) {
      decks.push_back(assembly::attach_testbench(circuit, *tb));
      att.testbenches.push_back(tb->id);
    }
    auto space = sizing::space_from_paths(decks.front().slots, circuit.tie_groups, m.use_ties, m.ranges);
    att.params = space.size();
    att.free_params = space.dim();
    spdlog::info("attempt {}: {} ({} parameters, {} free)", k, att.topology, att.params, att.free_params);

    auto res = sizing::run_bo(space, deck_evaluator(decks, backend), fom_cfg, m.bo);
    write_file((dir / "trajectory.csv").string(), sizing::trajectory_csv(res));

    std::optional<std::size_t> feasible;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
      const auto& r = res.records[i];
      if (!r.ok || !sizing::violations(r.measurements, res.fom).empty()) continue;
      if (!feasible || r.fom > res.records[*feasible].fom) feasible = i;
    }
    att.chosen = feasible ? *feasible : res.best_index;
    const auto& rec = res.records[att.chosen];
    att.evaluations = res.evaluations;
    att.fom = rec.fom;
    att.met = feasible.has_value();
    att.achieved = rec.measurements.values;
    att.violations = sizing::violations(rec.measurements, res.fom);
    auto sized = netlist::apply_sizing(circuit.netlist, rec.x);
    att.area_um2 = gate_area(sized) * 1e12;
    write_file((dir / "netlist.sp").string(), netlist::emit_netlist(sized));

    strategy::DesignHistoryEntry entry;
    entry.spec = spec;
    entry.strategy = strat;
    entry.topology = att.topology;
    if (rec.measurements.ok) entry.achieved = rec.measurements.values;
    entry.units = rec.measurements.units;
    entry.met = att.met;
    history << strategy::to_json(entry).dump() << "\n" << std::flush;
    entries.push_back(entry);
    report.attempts.push_back(att);
    spdlog::info("attempt {}: {} (fom {})", k, att.met ? "spec met" : "spec not met", str::shortest(att.fom));
    if (att.met) return finish("met", "");
    if (!entry.achieved) return finish("infeasible", "attempt " + std::to_string(k) + " produced no usable measurements");
  }
  return finish("infeasible", "spec not met after " + std::to_string(m.max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Other commands

struct TraceOutcome {
  netlist::Netlist netlist;
  trace::TraceResult result;
  int exit_code = kOk;
};

inline TraceOutcome run_trace(const fs::path& image, const fs::path& boxes, const fs::path& run_dir,
                              bool allow_exceptions, const trace::TraceConfig& cfg = {}) {
  if (!fs::exists(image)) throw UsageError("image not found: " + image.string());
  if (!fs::exists(boxes)) throw UsageError("box file not found: " + boxes.string());
  auto img = trace::read_pgm_file(image.string());
  auto bx = trace::parse_boxes(read_file(boxes.string()));
  TraceOutcome out;
  std::tie(out.netlist, out.result) = trace::trace_to_netlist(img, bx, cfg);
  write_file((run_dir / "netlist.sp").string(), netlist::emit_netlist(out.netlist));
  write_json(run_dir / "report.json", trace::report_json(out.result));
  if (!out.result.exceptions.empty() && !allow_exceptions) out.exit_code = kTraceExceptions;
  return out;
}

/// "relation=object", "<subject, relation, object>" or "subject,relation,object".
inline kg::Triplet parse_pattern(const std::string& text) {
  if (auto t = strategy::parse_triplet(text)) return *t;
  auto eq = text.find('=');
  if (eq != std::string::npos)
    return {"_", std::string(str::trim(text.substr(0, eq))), std::string(str::trim(text.substr(eq + 1)))};
  auto parts = str::split(text, ',');
  if (parts.size() == 3)
    return {std::string(str::trim(parts[0])), std::string(str::trim(parts[1])), std::string(str::trim(parts[2]))};
  throw UsageError("cannot read triplet pattern '" + text + "'");
}

inline std::string format_matches(const std::vector<kg::Match>& hits) {
  std::string out;
  for (std::size_t i = 0; i < hits.size(); ++i)
    out += std::to_string(i + 1) + "\t" + hits[i].entity->id + "\t" + std::to_string(hits[i].matched) + "\t" +
           hits[i].entity->display_name() + "\n";
  return out;
}

/// "role=entity" part list, assembled with support parts added.
inline assembly::AssembledCircuit run_assemble(const kg::Store& store, const assembly::WiringRules& rules,
                                               const std::vector<std::string>& specs, bool support,
                                               std::vector<assembly::Part>* parts_out = nullptr,
                                               assembly::ConnectionPlan* plan_out = nullptr) {
  std::vector<assembly::Part> parts;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("part '" + s + "' is not role=entity");
    auto id = s.substr(eq + 1);
    auto e = store.get(id);
    if (!e) throw UsageError("no entity " + id + " in the knowledge graph");
    parts.push_back({*e, s.substr(0, eq)});
  }
  if (parts.empty()) throw UsageError("no parts given");
  if (support) assembly::add_support_parts(parts, rules, store);
  auto plan = assembly::plan_connections(parts, rules);
  auto circuit = assembly::assemble(parts, plan);
  if (parts_out) *parts_out = parts;
  if (plan_out) *plan_out = plan;
  return circuit;
}

struct SizeOutcome {
  sizing::BOResult result;
  sizing::ParameterSpace space;
};

/// Standalone sizing of one deck. Writes trajectory.csv, best.sp,
/// result.json and snapshot.json into `run_dir`.
inline SizeOutcome run_size(const deck::SimulationDeck& d, const sizing::ParameterSpace& space,
                            const sizing::FoMConfig& fom, const simbridge::Backend& backend,
                            const sizing::BOConfig& cfg, const fs::path& run_dir,
                            const std::vector<sizing::EvaluationRecord>& resume = {}) {
  sizing::Evaluator eval = [&](const Assignment& a) {
    auto r = backend.evaluate(d, a);
    add_derived(r);
    return r;
  };
  SizeOutcome out{sizing::run_bo(space, eval, fom, cfg, resume), space};
  const auto& best = out.result.best();
  write_file((run_dir / "trajectory.csv").string(), sizing::trajectory_csv(out.result));
  write_file((run_dir / "best.sp").string(), d.render(best.x));
  write_json(run_dir / "result.json", {{"best", sizing::to_json(best)},
                                      {"evaluations", out.result.evaluations},
                                      {"fom", sizing::to_json(out.result.fom)},
                                      {"params", space.size()},
                                      {"free_params", space.dim()}});
  write_json(run_dir / "snapshot.json", sizing::snapshot(out.result, space, cfg));
  return out;
}

}  // namespace amskit::cli
