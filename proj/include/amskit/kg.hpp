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

// Annotated circuit store. Circuits and testbenches are entities; every
// global annotation {key: value} becomes an edge (entity, key, value) to a
// value node shared by all entities carrying the same normalized value.
//
// On disk a store is a directory:
//
//   index.json            schema version, entity ids, value nodes, edge count
//   entities/<id>.json    one record per entity

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "amskit/common.hpp"
#include "amskit/netlist.hpp"
#include "amskit/schem_trace.hpp"

namespace amskit::kg {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class KgError : public Error {
 public:
  using Error::Error;
};

/// Raised by load_store for anything that does not match the schema.
class SchemaError : public KgError {
 public:
  using KgError::KgError;
};

// ---------------------------------------------------------------------------
// Triplets

struct Triplet {
  /// Entity id, or "_" / "" for the query wildcard.
  std::string subject;
  std::string relation;
  std::string object;

  bool wildcard() const { return subject.empty() || subject == "_" || subject == "{}"; }
  bool operator==(const Triplet&) const = default;
};

inline std::string to_string(const Triplet& t) {
  return "<" + (t.wildcard() ? std::string("_") : t.subject) + ", " + t.relation + ", " + t.object + ">";
}

/// Metric names compare in annotation normal form: "DM gain" == "dm_gain".
inline std::string metric_key(std::string_view name) {
  std::string n = str::normalize(name);
  std::replace(n.begin(), n.end(), ' ', '_');
  return n;
}

// ---------------------------------------------------------------------------
// Entities

inline const std::set<std::string>& pin_role_vocabulary() {
  static const std::set<std::string> roles = {"input",   "input+",  "input-", "output",
                                              "output+", "output-", "bias",   "supply",
                                              "ground",  "clock"};
  return roles;
}

enum class EntityClass { Circuit, Testbench };

inline std::string_view to_string(EntityClass c) {
  return c == EntityClass::Circuit ? "circuit" : "testbench";
}

inline EntityClass entity_class_from_string(std::string_view s) {
  if (str::iequals(s, "circuit")) return EntityClass::Circuit;
  if (str::iequals(s, "testbench")) return EntityClass::Testbench;
  throw KgError("unknown entity class '" + std::string(s) + "'");
}

struct BuildingBlock {
  std::string name;
  std::vector<std::string> components;
  bool operator==(const BuildingBlock&) const = default;
};

enum class TieMode { Equal, Ratio };

struct TieGroup {
  /// First component leads; the rest follow.
  std::vector<std::string> components;
  std::vector<std::string> params;
  TieMode mode = TieMode::Equal;
  /// Follower = leader * factor (ratio mode only).
  double factor = 1.0;
  bool operator==(const TieGroup&) const = default;
};

struct LocalAnnotation {
  /// net -> role
  std::map<std::string, std::string> pin_functions;
  std::vector<BuildingBlock> building_blocks;
  std::vector<TieGroup> tie_groups;
  std::string notes;
  bool operator==(const LocalAnnotation&) const = default;
};

struct GlobalAnnotation {
  std::string key;
  std::string value;
  bool operator==(const GlobalAnnotation&) const = default;
};

struct NetMark {
  std::string net;
  int x = 0;
  int y = 0;
  bool operator==(const NetMark&) const = default;
};

struct ImageAttrs {
  std::vector<trace::LabeledBox> boxes;
  std::vector<NetMark> net_marks;
};

inline bool operator==(const ImageAttrs& a, const ImageAttrs& b) {
  return trace::emit_boxes(a.boxes) == trace::emit_boxes(b.boxes) && a.net_marks == b.net_marks;
}

struct Measure {
  std::string name;
  std::string unit;
  /// Analysis that produces it (ac, dc, tran, ...).
  std::string kind;
  bool operator==(const Measure&) const = default;
};

struct CircuitEntity {
  std::string id;
  EntityClass cls = EntityClass::Circuit;
  std::string name;
  netlist::Netlist netlist;
  std::optional<std::string> schematic;
  std::optional<ImageAttrs> image;
  LocalAnnotation local;
  std::vector<GlobalAnnotation> globals;
  /// Testbenches only.
  std::vector<Measure> measures;
  /// Raw analysis statements appended to simulation decks (testbenches only).
  std::string control;

  std::string display_name() const { return name.empty() ? id : name; }

  /// pin_functions inverted: role -> nets carrying it.
  std::map<std::string, std::vector<std::string>> nets_by_role() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [net, role] : local.pin_functions) out[role].push_back(net);
    return out;
  }

  std::vector<std::string> metric_keys() const {
    std::vector<std::string> out;
    for (const auto& m : measures) out.push_back(metric_key(m.name));
    return out;
  }
};

inline bool operator==(const CircuitEntity& a, const CircuitEntity& b) {
  return a.id == b.id && a.cls == b.cls && a.name == b.name &&
         netlist::emit_netlist(a.netlist) == netlist::emit_netlist(b.netlist) &&
         a.netlist.net_roles == b.netlist.net_roles && a.schematic == b.schematic &&
         a.image == b.image && a.local == b.local && a.globals == b.globals &&
         a.measures == b.measures && a.control == b.control;
}

/// Every problem with the entity; empty means it may be stored.
inline std::vector<std::string> check_entity(const CircuitEntity& e) {
  std::vector<std::string> out;
  if (e.id.empty()) out.push_back("empty id");
  for (char c : e.id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      out.push_back("id '" + e.id + "' must be [A-Za-z0-9_.-]");
  if (!e.id.empty() && e.id[0] == '.') out.push_back("id may not start with '.'");

  // Annotated pins are ports of the entity, so they count as anchored.
  netlist::Netlist anchored = e.netlist;
  for (const auto& [net, role] : e.local.pin_functions) anchored.net_roles[net].insert("pin:" + role);
  for (const auto& d : netlist::validate(anchored))
    out.push_back("netlist: " + std::string(netlist::to_string(d.kind)) + " " + d.subject);

  auto nets = e.netlist.nets();
  nets.insert(std::string(netlist::kGround));
  for (const auto& [net, role] : e.local.pin_functions) {
    if (!nets.count(net)) out.push_back("pin function on unknown net " + net);
    if (!pin_role_vocabulary().count(role)) out.push_back("unknown pin role '" + role + "' on " + net);
  }
  auto has_component = [&](const std::string& name) { return e.netlist.find(name) != nullptr; };
  for (const auto& b : e.local.building_blocks)
    for (const auto& c : b.components)
      if (!has_component(c)) out.push_back("building block '" + b.name + "' names unknown component " + c);
  for (const auto& t : e.local.tie_groups) {
    if (t.components.size() < 2) out.push_back("tie group needs at least two components");
    if (t.params.empty()) out.push_back("tie group without parameters");
    if (t.mode == TieMode::Ratio && !(t.factor > 0.0 && std::isfinite(t.factor)))
      out.push_back("tie ratio factor must be positive");
    for (const auto& c : t.components) {
      const auto* comp = e.netlist.find(c);
      if (!comp) {
        out.push_back("tie group names unknown component " + c);
        continue;
      }
      for (const auto& p : t.params)
        if (!netlist::is_legal_param(comp->kind, p))
          out.push_back("tie parameter " + p + " is not legal on " + c);
    }
  }
  for (const auto& g : e.globals) {
    if (str::normalize(g.key).empty()) out.push_back("global annotation with empty key");
    if (str::normalize(g.value).empty()) out.push_back("global annotation '" + g.key + "' has empty value");
  }
  if (e.cls == EntityClass::Testbench) {
    if (e.measures.empty()) out.push_back("testbench declares no measurements");
    if (e.local.pin_functions.empty()) out.push_back("testbench declares no DUT pins");
  } else if (!e.measures.empty()) {
    out.push_back("only testbenches declare measurements");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record (de)serialization

inline json to_json(const TieGroup& t) {
  json j{{"components", t.components}, {"params", t.params},
         {"mode", t.mode == TieMode::Equal ? "equal" : "ratio"}};
  if (t.mode == TieMode::Ratio) j["factor"] = t.factor;
  return j;
}

inline TieGroup tie_group_from_json(const json& j) {
  TieGroup t;
  t.components = j.at("components").get<std::vector<std::string>>();
  t.params = j.at("params").get<std::vector<std::string>>();
  std::string mode = j.value("mode", "equal");
  if (mode == "equal") {
    t.mode = TieMode::Equal;
  } else if (mode == "ratio") {
    t.mode = TieMode::Ratio;
    t.factor = j.at("factor").get<double>();
  } else {
    throw KgError("unknown tie mode '" + mode + "'");
  }
  return t;
}

inline json to_json(const LocalAnnotation& a) {
  json blocks = json::array();
  for (const auto& b : a.building_blocks) blocks.push_back({{"name", b.name}, {"components", b.components}});
  json ties = json::array();
  for (const auto& t : a.tie_groups) ties.push_back(to_json(t));
  return {{"pin_functions", a.pin_functions},
          {"building_blocks", blocks},
          {"tie_groups", ties},
          {"notes", a.notes}};
}

inline LocalAnnotation local_from_json(const json& j) {
  LocalAnnotation a;
  if (j.contains("pin_functions"))
    a.pin_functions = j.at("pin_functions").get<std::map<std::string, std::string>>();
  for (const auto& b : j.value("building_blocks", json::array()))
    a.building_blocks.push_back({b.at("name").get<std::string>(),
                                 b.at("components").get<std::vector<std::string>>()});
  for (const auto& t : j.value("tie_groups", json::array())) a.tie_groups.push_back(tie_group_from_json(t));
  a.notes = j.value("notes", "");
  return a;
}

/// Accepts either {"key": "value" | ["v1", "v2"]} or [{"key":..,"value":..}].
inline std::vector<GlobalAnnotation> globals_from_json(const json& j) {
  std::vector<GlobalAnnotation> out;
  if (j.is_array()) {
    for (const auto& g : j) out.push_back({g.at("key").get<std::string>(), g.at("value").get<std::string>()});
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (v.is_array())
        for (const auto& x : v) out.push_back({k, x.get<std::string>()});
      else
        out.push_back({k, v.get<std::string>()});
    }
  } else if (!j.is_null()) {
    throw KgError("global annotations must be an object or array");
  }
  return out;
}

inline json to_json(const CircuitEntity& e) {
  json globals = json::array();
  for (const auto& g : e.globals) globals.push_back({{"key", g.key}, {"value", g.value}});
  json j{{"id", e.id},
         {"class", std::string(to_string(e.cls))},
         {"name", e.name},
         {"netlist", netlist::emit_netlist(e.netlist)},
         {"net_roles", e.netlist.net_roles},
         {"local", to_json(e.local)},
         {"global", globals}};
  if (e.schematic) j["schematic"] = *e.schematic;
  if (e.image) {
    json marks = json::array();
    for (const auto& m : e.image->net_marks) marks.push_back({{"net", m.net}, {"x", m.x}, {"y", m.y}});
    j["image"] = {{"boxes", trace::emit_boxes(e.image->boxes)}, {"net_marks", marks}};
  }
  if (e.cls == EntityClass::Testbench) {
    json ms = json::array();
    for (const auto& m : e.measures) ms.push_back({{"name", m.name}, {"unit", m.unit}, {"kind", m.kind}});
    j["measures"] = ms;
    j["control"] = e.control;
  }
  return j;
}

inline std::vector<Measure> measures_from_json(const json& j) {
  std::vector<Measure> out;
  for (const auto& m : j) {
    if (m.is_string())
      out.push_back({m.get<std::string>(), "", ""});
    else
      out.push_back({m.at("name").get<std::string>(), m.value("unit", ""), m.value("kind", "")});
  }
  return out;
}

inline CircuitEntity entity_from_json(const json& j) {
  CircuitEntity e;
  e.id = j.at("id").get<std::string>();
  e.cls = entity_class_from_string(j.value("class", "circuit"));
  e.name = j.value("name", "");
  e.netlist = netlist::parse_netlist(j.at("netlist").get<std::string>());
  if (j.contains("net_roles"))
    e.netlist.net_roles = j.at("net_roles").get<std::map<std::string, std::set<std::string>>>();
  if (j.contains("local")) e.local = local_from_json(j.at("local"));
  if (j.contains("global")) e.globals = globals_from_json(j.at("global"));
  if (j.contains("schematic")) e.schematic = j.at("schematic").get<std::string>();
  if (j.contains("image")) {
    ImageAttrs img;
    img.boxes = trace::parse_boxes(j.at("image").value("boxes", ""));
    for (const auto& m : j.at("image").value("net_marks", json::array()))
      img.net_marks.push_back({m.at("net").get<std::string>(), m.at("x").get<int>(), m.at("y").get<int>()});
    e.image = std::move(img);
  }
  if (j.contains("measures")) e.measures = measures_from_json(j.at("measures"));
  e.control = j.value("control", "");
  return e;
}

// ---------------------------------------------------------------------------
// Store

struct Match {
  std::shared_ptr<const CircuitEntity> entity;
  int matched = 0;
};

struct TestbenchSelection {
  std::vector<std::shared_ptr<const CircuitEntity>> testbenches;
  /// Requested metrics no stored testbench measures.
  std::vector<std::string> missing;
};

struct Edge {
  std::string subject;
  /// Normalized relation key.
  std::string relation;
  std::size_t object = 0;
  bool operator<(const Edge& o) const {
    return std::tie(subject, relation, object) < std::tie(o.subject, o.relation, o.object);
  }
  bool operator==(const Edge&) const = default;
};

class Store {
 public:
  Store() = default;
  Store(const Store& other) {
    std::shared_lock lock(other.mu_);
    entities_ = other.entities_;
    node_of_ = other.node_of_;
    nodes_ = other.nodes_;
    edges_ = other.edges_;
  }
  Store& operator=(Store other) {
    std::unique_lock lock(mu_);
    entities_ = std::move(other.entities_);
    node_of_ = std::move(other.node_of_);
    nodes_ = std::move(other.nodes_);
    edges_ = std::move(other.edges_);
    return *this;
  }

  std::string add_circuit(CircuitEntity e) {
    auto problems = check_entity(e);
    if (!problems.empty()) throw KgError("invalid entity '" + e.id + "': " + str::join(problems, "; "));
    std::unique_lock lock(mu_);
    if (entities_.count(e.id)) throw KgError("duplicate entity id " + e.id);
    std::string id = e.id;
    for (const auto& g : e.globals) {
      std::string value = str::normalize(g.value);
      auto [it, inserted] = node_of_.emplace(value, nodes_.size());
      if (inserted) nodes_.push_back(value);
      edges_.insert({id, str::normalize(g.key), it->second});
    }
    entities_.emplace(id, std::make_shared<const CircuitEntity>(std::move(e)));
    return id;
  }

  std::shared_ptr<const CircuitEntity> get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : it->second;
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, e] : entities_) out.push_back(id);
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entities_.size();
  }
  std::size_t triplet_count() const {
    std::shared_lock lock(mu_);
    return edges_.size();
  }
  std::size_t node_count() const {
    std::shared_lock lock(mu_);
    return nodes_.size();
  }

  std::vector<Triplet> triplets() const {
    std::shared_lock lock(mu_);
    std::vector<Triplet> out;
    for (const auto& e : edges_) out.push_back({e.subject, e.relation, nodes_[e.object]});
    return out;
  }

  /// Normalized relation names in use.
  std::set<std::string> relations() const {
    std::shared_lock lock(mu_);
    std::set<std::string> out;
    for (const auto& e : edges_) out.insert(e.relation);
    return out;
  }

  /// Circuits ranked by number of matched patterns, then id. Testbenches are
  /// reached through get_testbenches instead.
  std::vector<Match> query(const std::vector<Triplet>& patterns) const {
    std::shared_lock lock(mu_);
    std::map<std::string, int> counts;
    for (const auto& p : patterns) {
      if (str::trim(p.relation).empty()) continue;
      std::string rel = str::normalize(p.relation);
      auto node = node_of_.find(str::normalize(p.object));
      if (node == node_of_.end()) continue;
      for (const auto& [id, ent] : entities_) {
        if (ent->cls != EntityClass::Circuit) continue;
        if (!p.wildcard() && p.subject != id) continue;
        if (edges_.count({id, rel, node->second})) ++counts[id];
      }
    }
    std::vector<Match> out;
    for (const auto& [id, n] : counts) out.push_back({entities_.at(id), n});
    std::stable_sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
      if (a.matched != b.matched) return a.matched > b.matched;
      return a.entity->id < b.entity->id;
    });
    return out;
  }

  /// Greedy cover: repeatedly takes the testbench measuring the most
  /// still-uncovered metrics (ties by id).
  TestbenchSelection get_testbenches(const std::vector<std::string>& metrics) const {
    std::shared_lock lock(mu_);
    TestbenchSelection sel;
    std::vector<std::string> wanted;
    for (const auto& m : metrics) {
      std::string k = metric_key(m);
      if (!k.empty() && std::find(wanted.begin(), wanted.end(), k) == wanted.end()) wanted.push_back(k);
    }
    std::set<std::string> open(wanted.begin(), wanted.end());
    std::set<std::string> taken;
    while (!open.empty()) {
      std::shared_ptr<const CircuitEntity> best;
      std::size_t best_gain = 0;
      for (const auto& [id, ent] : entities_) {
        if (ent->cls != EntityClass::Testbench || taken.count(id)) continue;
        auto keys = ent->metric_keys();
        std::size_t gain = 0;
        for (const auto& k : std::set<std::string>(keys.begin(), keys.end())) gain += open.count(k);
        if (gain > best_gain) {
          best = ent;
          best_gain = gain;
        }
      }
      if (!best) break;
      taken.insert(best->id);
      for (const auto& k : best->metric_keys()) open.erase(k);
      sel.testbenches.push_back(best);
    }
    for (const auto& k : wanted)
      if (open.count(k)) sel.missing.push_back(k);
    return sel;
  }

  /// Graph statements (Cypher dialect) for external visualization.
  std::string export_cypher() const {
    std::shared_lock lock(mu_);
    auto quote = [](const std::string& s) {
      std::string out = "'";
      for (char c : s) {
        if (c == '\'' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      return out + "'";
    };
    auto label = [](const std::string& rel) {
      std::string out = "`";
      for (char c : rel) out.push_back(c == '`' ? '_' : c);
      return out + "`";
    };
    std::ostringstream os;
    for (const auto& [id, ent] : entities_)
      os << "CREATE (:" << to_string(ent->cls) << " {id: " << quote(id)
         << ", name: " << quote(ent->display_name()) << "});\n";
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      os << "CREATE (:value {id: " << quote("v" + std::to_string(i)) << ", value: " << quote(nodes_[i])
         << "});\n";
    for (const auto& e : edges_)
      os << "MATCH (a {id: " << quote(e.subject) << "}), (b:value {id: "
         << quote("v" + std::to_string(e.object)) << "}) CREATE (a)-[:" << label(e.relation)
         << "]->(b);\n";
    return os.str();
  }

  void save(const std::filesystem::path& dir) const {
    std::shared_lock lock(mu_);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "entities", ec);
    if (ec) throw KgError("cannot create store directory " + dir.string() + ": " + ec.message());
    for (const auto& entry : fs::directory_iterator(dir / "entities"))
      if (entry.path().extension() == ".json") fs::remove(entry.path());
    json ids = json::array();
    for (const auto& [id, ent] : entities_) {
      ids.push_back(id);
      write_file((dir / "entities" / (id + ".json")).string(), to_json(*ent).dump(2) + "\n");
    }
    json index{{"schema_version", kSchemaVersion},
               {"entities", ids},
               {"nodes", nodes_},
               {"triplet_count", edges_.size()}};
    write_file((dir / "index.json").string(), index.dump(2) + "\n");
  }

  /// All-or-nothing: any malformed record fails the whole load.
  static Store load(const std::filesystem::path& dir) {
    json index;
    try {
      index = json::parse(read_file((dir / "index.json").string()));
    } catch (const json::exception& ex) {
      throw SchemaError("index.json: " + std::string(ex.what()));
    }
    if (!index.is_object() || !index.contains("schema_version"))
      throw SchemaError("index.json: missing schema_version");
    if (index.at("schema_version") != kSchemaVersion)
      throw SchemaError("index.json: schema version " + index.at("schema_version").dump() +
                        " (expected " + std::to_string(kSchemaVersion) + ")");
    Store s;
    try {
      for (const auto& id : index.at("entities")) {
        auto path = dir / "entities" / (id.get<std::string>() + ".json");
        auto rec = json::parse(read_file(path.string()));
        auto e = entity_from_json(rec);
        if (e.id != id.get<std::string>()) throw SchemaError(path.string() + ": id mismatch");
        s.add_circuit(std::move(e));
      }
      // Value nodes are numbered by first appearance; keep the saved order.
      auto nodes = index.at("nodes").get<std::vector<std::string>>();
      if (std::set<std::string>(nodes.begin(), nodes.end()) !=
          std::set<std::string>(s.nodes_.begin(), s.nodes_.end()))
        throw SchemaError("index.json: value nodes do not match entity records");
      if (index.at("triplet_count").get<std::size_t>() != s.edges_.size())
        throw SchemaError("index.json: triplet count does not match entity records");
      s.renumber(nodes);
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception& ex) {
      throw SchemaError(std::string("store load failed: ") + ex.what());
    }
    return s;
  }

 private:
  void renumber(const std::vector<std::string>& order) {
    std::map<std::size_t, std::size_t> remap;
    std::map<std::string, std::size_t> fresh;
    for (std::size_t i = 0; i < order.size(); ++i) fresh[order[i]] = i;
    for (std::size_t i = 0; i < nodes_.size(); ++i) remap[i] = fresh.at(nodes_[i]);
    std::set<Edge> edges;
    for (auto e : edges_) {
      e.object = remap.at(e.object);
      edges.insert(e);
    }
    edges_ = std::move(edges);
    nodes_ = order;
    node_of_ = std::move(fresh);
  }

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const CircuitEntity>> entities_;
  std::map<std::string, std::size_t> node_of_;
  std::vector<std::string> nodes_;
  std::set<Edge> edges_;

  friend bool operator==(const Store& a, const Store& b);
};

inline bool operator==(const Store& a, const Store& b) {
  std::shared_lock la(a.mu_);
  std::shared_lock lb(b.mu_);
  if (a.entities_.size() != b.entities_.size() || a.nodes_ != b.nodes_ || a.edges_ != b.edges_) return false;
  for (const auto& [id, e] : a.entities_) {
    auto it = b.entities_.find(id);
    if (it == b.entities_.end() || !(*e == *it->second)) return false;
  }
  return true;
}

inline void save_store(const Store& s, const std::filesystem::path& dir) { s.save(dir); }
inline Store load_store(const std::filesystem::path& dir) { return Store::load(dir); }

// ---------------------------------------------------------------------------
// Fixture directories: <id>.json annotation records next to netlist files.

/// Reads one annotation record; "netlist" and "roles" name files relative to
/// the record, "schematic" is kept as a path, "boxes" is read inline.
inline CircuitEntity read_annotation_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path.string()));
  } catch (const json::exception& ex) {
    throw KgError(path.string() + ": " + ex.what());
  }
  auto base = path.parent_path();
  json rec = j;
  rec["netlist"] = read_file((base / j.at("netlist").get<std::string>()).string());
  CircuitEntity e = entity_from_json(rec);
  if (j.contains("roles"))
    e.netlist.net_roles = netlist::parse_net_roles(read_file((base / j.at("roles").get<std::string>()).string()));
  if (j.contains("boxes")) {
    ImageAttrs img = e.image.value_or(ImageAttrs{});
    img.boxes = trace::parse_boxes(read_file((base / j.at("boxes").get<std::string>()).string()));
    e.image = std::move(img);
  }
  return e;
}

/// Builds a store from every *.json record in `dir` (sorted by file name).
inline Store build_from_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  Store s;
  for (const auto& f : files) s.add_circuit(read_annotation_file(f));
  return s;
}

}  // namespace amskit::kg
