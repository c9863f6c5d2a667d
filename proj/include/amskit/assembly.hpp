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

// Stitches retrieved circuits into one netlist. Parts carry an architectural
// role (stage-1, stage-2, bias, compensation, latch, ...); a wiring table
// says which pin roles of which parts are joined and which become ports.
//
// Rules file:
//
//   {
//     "supply_port": "vdd",
//     "bindings":  [{"from": ["stage-1", "output"], "to": ["stage-2", "input"]}, ...],
//     "exposures": [{"port": "out", "role": "output", "from": ["$last-stage", "output"]}, ...],
//     "support":   [{"role": "bias", "when": "bias", "query": [["type", "bias circuitry"]]}]
//   }
//
// A binding applies when both named parts are present. "$last-stage" names
// the highest-numbered stage-N part.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "amskit/common.hpp"
#include "amskit/deck.hpp"
#include "amskit/kg.hpp"
#include "amskit/netlist.hpp"

namespace amskit::assembly {

using nlohmann::json;

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class MissingRoleError : public AssemblyError {
 public:
  using AssemblyError::AssemblyError;
};

class AmbiguousRoleError : public AssemblyError {
 public:
  using AssemblyError::AssemblyError;
};

class UnmatchedRoleError : public AssemblyError {
 public:
  using AssemblyError::AssemblyError;
};

struct Part {
  kg::CircuitEntity entity;
  std::string role;
};

// ---------------------------------------------------------------------------
// Rules

struct RuleEndpoint {
  std::string part;
  std::string role;
};

struct BindingRule {
  RuleEndpoint from;
  RuleEndpoint to;
  bool required = true;
};

struct ExposureRule {
  std::string port;
  std::string role;
  RuleEndpoint from;
};

/// Part added by the design loop when a chosen part carries `when` and no
/// part with `role` is present.
struct SupportRule {
  std::string role;
  std::string when;
  std::vector<kg::Triplet> query;
};

struct WiringRules {
  std::vector<BindingRule> bindings;
  std::vector<ExposureRule> exposures;
  std::vector<SupportRule> support;
  std::string supply_port = "vdd";
};

namespace detail {

inline RuleEndpoint endpoint_from_json(const json& j) {
  if (j.is_array() && j.size() == 2) return {j[0].get<std::string>(), j[1].get<std::string>()};
  if (j.is_object()) return {j.at("part").get<std::string>(), j.at("role").get<std::string>()};
  throw AssemblyError("rule endpoint must be [part, role] or {part, role}");
}

inline json endpoint_to_json(const RuleEndpoint& e) { return json::array({e.part, e.role}); }

}  // namespace detail

inline WiringRules rules_from_json(const json& j) {
  WiringRules r;
  r.supply_port = j.value("supply_port", "vdd");
  for (const auto& b : j.value("bindings", json::array()))
    r.bindings.push_back({detail::endpoint_from_json(b.at("from")), detail::endpoint_from_json(b.at("to")),
                          b.value("required", true)});
  for (const auto& e : j.value("exposures", json::array()))
    r.exposures.push_back({e.at("port").get<std::string>(), e.at("role").get<std::string>(),
                           detail::endpoint_from_json(e.at("from"))});
  for (const auto& s : j.value("support", json::array())) {
    SupportRule rule{s.at("role").get<std::string>(), s.value("when", s.at("role").get<std::string>()), {}};
    for (const auto& q : s.at("query")) rule.query.push_back({"_", q.at(0).get<std::string>(), q.at(1).get<std::string>()});
    r.support.push_back(std::move(rule));
  }
  for (const auto& e : r.exposures)
    if (!kg::pin_role_vocabulary().count(e.role)) throw AssemblyError("exposure role '" + e.role + "' unknown");
  return r;
}

inline WiringRules load_rules(const std::string& path) {
  try {
    return rules_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw AssemblyError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Plans

struct Endpoint {
  std::size_t part = 0;
  std::string role;
  std::string net;
  bool operator==(const Endpoint&) const = default;
};

enum class BindingKind { Signal, Shared };

struct Binding {
  Endpoint a;
  Endpoint b;
  BindingKind kind = BindingKind::Signal;
};

struct Exposure {
  std::string port;
  std::string role;
  std::size_t part = 0;
  std::string net;
};

/// Explicit choice of net for a role that several nets carry.
struct Override {
  std::size_t part = 0;
  std::string role;
  std::string net;
};

struct ConnectionPlan {
  std::vector<Binding> bindings;
  std::vector<Exposure> exposures;

  std::size_t signal_bindings() const {
    return static_cast<std::size_t>(std::count_if(bindings.begin(), bindings.end(),
                                                  [](const Binding& b) { return b.kind == BindingKind::Signal; }));
  }
};

inline json to_json(const ConnectionPlan& p) {
  json bindings = json::array();
  for (const auto& b : p.bindings)
    bindings.push_back({{"kind", b.kind == BindingKind::Signal ? "signal" : "shared"},
                        {"a", {{"part", b.a.part}, {"role", b.a.role}, {"net", b.a.net}}},
                        {"b", {{"part", b.b.part}, {"role", b.b.role}, {"net", b.b.net}}}});
  json exposures = json::array();
  for (const auto& e : p.exposures)
    exposures.push_back({{"port", e.port}, {"role", e.role}, {"part", e.part}, {"net", e.net}});
  return {{"bindings", bindings}, {"exposures", exposures}};
}

inline ConnectionPlan plan_from_json(const json& j) {
  ConnectionPlan p;
  auto ep = [](const json& e) {
    return Endpoint{e.at("part").get<std::size_t>(), e.at("role").get<std::string>(), e.at("net").get<std::string>()};
  };
  for (const auto& b : j.at("bindings"))
    p.bindings.push_back({ep(b.at("a")), ep(b.at("b")),
                          b.value("kind", "signal") == "shared" ? BindingKind::Shared : BindingKind::Signal});
  for (const auto& e : j.at("exposures"))
    p.exposures.push_back({e.at("port").get<std::string>(), e.at("role").get<std::string>(),
                           e.at("part").get<std::size_t>(), e.at("net").get<std::string>()});
  return p;
}

namespace detail {

inline std::optional<int> stage_number(const std::string& role) {
  if (!str::starts_with(role, "stage-")) return std::nullopt;
  int v = 0;
  auto tail = std::string_view(role).substr(6);
  auto res = std::from_chars(tail.data(), tail.data() + tail.size(), v);
  if (res.ec != std::errc() || res.ptr != tail.data() + tail.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> find_part(const std::vector<Part>& parts, const std::string& name) {
  if (name == "$last-stage") {
    std::optional<std::size_t> best;
    int best_n = -1;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto n = stage_number(parts[i].role);
      if (n && *n > best_n) {
        best_n = *n;
        best = i;
      }
    }
    return best;
  }
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].role == name) return i;
  return std::nullopt;
}

inline std::vector<std::string> ground_nets(const kg::CircuitEntity& e) {
  std::set<std::string> out;
  for (const auto& n : e.netlist.nets())
    if (n == netlist::kGround) out.insert(n);
  for (const auto& [net, role] : e.local.pin_functions)
    if (role == "ground") out.insert(net);
  return {out.begin(), out.end()};
}

}  // namespace detail

/// Resolves the wiring table against the parts. Several nets carrying one
/// role are an error unless an override names the net.
inline ConnectionPlan plan_connections(const std::vector<Part>& parts, const WiringRules& rules,
                                       const std::vector<Override>& overrides = {}) {
  std::set<std::string> seen_roles;
  for (const auto& p : parts)
    if (!seen_roles.insert(p.role).second) throw AssemblyError("two parts share role " + p.role);

  auto resolve = [&](std::size_t part, const std::string& role, bool required) -> std::optional<std::string> {
    for (const auto& o : overrides)
      if (o.part == part && o.role == role) {
        auto it = parts[part].entity.local.pin_functions.find(o.net);
        if (it == parts[part].entity.local.pin_functions.end() || it->second != role)
          throw AssemblyError("override net " + o.net + " does not carry role " + role + " in " +
                              parts[part].entity.id);
        return o.net;
      }
    auto by_role = parts[part].entity.nets_by_role();
    auto it = by_role.find(role);
    if (it == by_role.end()) {
      if (required)
        throw MissingRoleError(parts[part].role + " part " + parts[part].entity.id + " has no " + role + " pin");
      return std::nullopt;
    }
    if (it->second.size() > 1)
      throw AmbiguousRoleError(parts[part].entity.id + " has " + std::to_string(it->second.size()) + " " +
                               role + " nets (" + str::join(it->second, ", ") + "); name one explicitly");
    return it->second.front();
  };

  ConnectionPlan plan;
  for (const auto& rule : rules.bindings) {
    auto a = detail::find_part(parts, rule.from.part);
    auto b = detail::find_part(parts, rule.to.part);
    if (!a || !b || *a == *b) continue;
    auto na = resolve(*a, rule.from.role, rule.required);
    auto nb = resolve(*b, rule.to.role, rule.required);
    if (!na || !nb) continue;
    plan.bindings.push_back({{*a, rule.from.role, *na}, {*b, rule.to.role, *nb}, BindingKind::Signal});
  }

  // Shared rails: every supply or ground net joins the previous one.
  for (const std::string role : {"supply", "ground"}) {
    std::optional<Endpoint> prev;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::vector<std::string> nets;
      if (role == "ground") {
        nets = detail::ground_nets(parts[i].entity);
      } else {
        auto by_role = parts[i].entity.nets_by_role();
        if (by_role.count(role)) nets = by_role.at(role);
      }
      for (const auto& n : nets) {
        Endpoint here{i, role, n};
        if (prev) plan.bindings.push_back({*prev, here, BindingKind::Shared});
        prev = here;
      }
    }
    if (prev) {
      std::string port = role == "supply" ? rules.supply_port : std::string(netlist::kGround);
      plan.exposures.push_back({port, role, prev->part, prev->net});
    }
  }

  std::set<std::string> ports;
  for (const auto& e : plan.exposures) ports.insert(e.port);
  for (const auto& rule : rules.exposures) {
    auto p = detail::find_part(parts, rule.from.part);
    if (!p || ports.count(rule.port)) continue;
    auto net = resolve(*p, rule.from.role, true);
    plan.exposures.push_back({rule.port, rule.role, *p, *net});
    ports.insert(rule.port);
  }
  return plan;
}

/// Appends the parts the support rules call for, each the rank-1 answer to
/// the rule's query. Returns the roles added.
inline std::vector<std::string> add_support_parts(std::vector<Part>& parts, const WiringRules& rules,
                                                  const kg::Store& store) {
  std::vector<std::string> added;
  for (const auto& rule : rules.support) {
    bool present = std::any_of(parts.begin(), parts.end(), [&](const Part& p) { return p.role == rule.role; });
    if (present) continue;
    bool wanted = std::any_of(parts.begin(), parts.end(), [&](const Part& p) {
      for (const auto& [net, role] : p.entity.local.pin_functions)
        if (role == rule.when) return true;
      return false;
    });
    if (!wanted) continue;
    auto hits = store.query(rule.query);
    if (hits.empty()) throw AssemblyError("no stored circuit answers the " + rule.role + " support query");
    parts.push_back({*hits.front().entity, rule.role});
    added.push_back(rule.role);
  }
  return added;
}

// ---------------------------------------------------------------------------
// Assembly

struct AssembledCircuit {
  netlist::Netlist netlist;
  /// Component name -> source entity id.
  std::map<std::string, std::string> provenance;
  std::vector<kg::TieGroup> tie_groups;
  /// (port, role) in plan order; ground is global and not a port.
  std::vector<std::pair<std::string, std::string>> exposures;

  std::vector<std::string> ports() const {
    std::vector<std::string> out;
    for (const auto& [port, role] : exposures)
      if (role != "ground") out.push_back(port);
    return out;
  }
};

inline std::string instance_prefix(std::size_t part) { return "s" + std::to_string(part + 1) + "_"; }

/// "M1" of part 0 becomes "Ms1_M1": the card letter stays in front so the
/// netlist still parses.
inline std::string component_name(std::size_t part, const netlist::Component& c) {
  return std::string(1, netlist::card_letter(c.kind)) + instance_prefix(part) + c.name;
}

inline std::string net_name(std::size_t part, const std::string& net) {
  return net == netlist::kGround ? net : instance_prefix(part) + net;
}

inline AssembledCircuit assemble(const std::vector<Part>& parts, const ConnectionPlan& plan) {
  AssembledCircuit out;
  std::set<std::string> all_nets;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& src = parts[i].entity;
    if (!src.netlist.subcircuits.empty())
      throw AssemblyError("part " + src.id + " defines subcircuits; flatten it first");
    for (const auto& c : src.netlist.components) {
      netlist::Component r = c;
      r.name = component_name(i, c);
      for (auto& p : r.pins) p = net_name(i, p);
      if (out.netlist.find(r.name)) throw AssemblyError("component name collision on " + r.name);
      out.provenance[r.name] = src.id;
      out.netlist.components.push_back(std::move(r));
    }
    for (const auto& t : src.local.tie_groups) {
      kg::TieGroup g = t;
      for (auto& c : g.components) c = component_name(i, *src.netlist.find(c));
      out.tie_groups.push_back(std::move(g));
    }
  }
  std::vector<std::string> titles;
  for (const auto& p : parts) titles.push_back(p.entity.id);
  out.netlist.title = "assembled " + str::join(titles, " + ");

  // Current name of every renamed net after the merges so far.
  std::map<std::string, std::string> alias;
  auto current = [&](std::string n) {
    while (alias.count(n)) n = alias.at(n);
    return n;
  };
  auto endpoint_net = [&](const Endpoint& e) {
    if (e.part >= parts.size()) throw AssemblyError("plan names part " + std::to_string(e.part) + " of " +
                                                    std::to_string(parts.size()));
    auto nets = parts[e.part].entity.netlist.nets();
    if (!nets.count(e.net))
      throw AssemblyError("binding references absent net " + e.net + " in " + parts[e.part].entity.id);
    return current(net_name(e.part, e.net));
  };
  for (const auto& b : plan.bindings) {
    std::string na = endpoint_net(b.a);
    std::string nb = endpoint_net(b.b);
    if (na == nb) continue;
    std::string survivor = nb == netlist::kGround ? nb : na;
    std::string victim = survivor == na ? nb : na;
    out.netlist = netlist::merge_nets(out.netlist, na, nb, survivor);
    alias[victim] = survivor;
  }

  std::map<std::string, std::string> port_of;
  for (const auto& e : plan.exposures) {
    std::string net = endpoint_net({e.part, e.role, e.net});
    auto [it, fresh] = port_of.emplace(net, e.port);
    if (!fresh && it->second != e.port)
      throw AssemblyError("ports " + it->second + " and " + e.port + " land on the same net");
    out.exposures.emplace_back(e.port, e.role);
  }
  auto present = out.netlist.nets();
  for (const auto& [net, port] : port_of) {
    if (net == port) continue;
    if (present.count(port)) throw AssemblyError("cannot name net " + net + " as port " + port + ": name in use");
    if (net == netlist::kGround) throw AssemblyError("ground cannot be renamed to " + port);
  }
  for (auto& c : out.netlist.components)
    for (auto& p : c.pins) {
      auto it = port_of.find(p);
      if (it != port_of.end()) p = it->second;
    }
  for (const auto& e : plan.exposures)
    if (e.role != "ground") out.netlist.net_roles[e.port].insert(e.role);

  auto diags = netlist::validate(out.netlist);
  if (!diags.empty()) {
    std::vector<std::string> msgs;
    for (const auto& d : diags) msgs.push_back(std::string(netlist::to_string(d.kind)) + " " + d.subject);
    throw AssemblyError("assembled netlist does not validate: " + str::join(msgs, "; "));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Testbenches

/// Testbench netlist with the circuit instantiated as subcircuit "dut"; DUT
/// ports bind to the testbench nets annotated with the same role.
inline deck::SimulationDeck attach_testbench(const AssembledCircuit& dut, const kg::CircuitEntity& tb) {
  if (tb.cls != kg::EntityClass::Testbench) throw AssemblyError(tb.id + " is not a testbench");
  std::map<std::string, std::string> tb_net_of;
  for (const auto& [net, role] : tb.local.pin_functions) {
    if (role == "ground") continue;
    if (!tb_net_of.emplace(role, net).second)
      throw AmbiguousRoleError("testbench " + tb.id + " has two nets with role " + role);
  }
  std::set<std::string> dut_roles;
  for (const auto& [port, role] : dut.exposures) dut_roles.insert(role);
  for (const auto& [role, net] : tb_net_of)
    if (!dut_roles.count(role))
      throw UnmatchedRoleError("testbench " + tb.id + " expects a " + role + " pin the circuit does not expose");

  deck::SimulationDeck d;
  d.name = tb.id;
  d.netlist = tb.netlist;
  d.netlist.title = tb.netlist.title.empty() ? tb.id : tb.netlist.title;
  d.netlist.net_roles.clear();

  netlist::Subcircuit sub;
  sub.name = d.dut_subckt;
  sub.ports = dut.ports();
  sub.body = dut.netlist;
  sub.body.title = sub.name;
  sub.body.net_roles.clear();

  netlist::Component x;
  x.name = "Xdut";
  x.kind = netlist::DeviceKind::SubcircuitInstance;
  x.model = sub.name;
  auto existing = tb.netlist.nets();
  for (const auto& [port, role] : dut.exposures) {
    if (role == "ground") continue;
    auto it = tb_net_of.find(role);
    if (it != tb_net_of.end()) {
      x.pins.push_back(it->second);
    } else {
      std::string nc = "nc_" + port;
      while (existing.count(nc)) nc += "_";
      x.pins.push_back(nc);
      d.netlist.net_roles[nc].insert("unconnected");
    }
  }
  if (d.netlist.find("Xdut")) throw AssemblyError("testbench " + tb.id + " already has an Xdut component");
  d.netlist.components.push_back(std::move(x));
  d.netlist.subcircuits.push_back(std::move(sub));

  std::set<std::string> kinds;
  for (const auto& m : tb.measures) {
    d.measures.push_back({kg::metric_key(m.name), m.kind, m.unit});
    if (!m.kind.empty() && kinds.insert(m.kind).second) d.analyses.push_back(m.kind);
  }
  d.slots = deck::sizable_paths(dut.netlist);
  for (const auto& t : dut.tie_groups) d.matched.push_back(t.components);
  d.control = tb.control;
  return d;
}

}  // namespace amskit::assembly
