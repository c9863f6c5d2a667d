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

// Simulation decks: a testbench netlist with the device under test as a
// subcircuit, plus a declaration block in structured comments that tells the
// backend what to measure and which parameters are substituted:
//
//   *% deck <name>
//   *% analysis ac
//   *% measure dm_gain ac dB
//   *% slot Ms1_M1.W
//   *% match Ms1_M1 Ms1_M2
//
// Lines starting with '.' other than .title/.subckt/.ends/.end are analysis
// statements for the simulator; they are carried verbatim and never parsed.

#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amskit/common.hpp"
#include "amskit/netlist.hpp"

namespace amskit::deck {

class DeckError : public Error {
 public:
  using Error::Error;
};

struct MeasureDecl {
  std::string name;
  std::string kind;
  std::string unit;
  bool operator==(const MeasureDecl&) const = default;
};

/// Sizable parameters of a netlist in path form: W and L of every MOS device
/// (nf as well where the netlist sets it) and the value of every current
/// source, resistor and capacitor. Voltage sources are fixed.
inline std::vector<std::string> sizable_paths(const netlist::Netlist& n) {
  using netlist::DeviceKind;
  std::vector<std::string> out;
  for (const auto& c : n.components) {
    if (netlist::is_mos(c.kind)) {
      out.push_back(c.name + ".W");
      out.push_back(c.name + ".L");
      if (c.params.count("nf")) out.push_back(c.name + ".nf");
    } else if (c.kind == DeviceKind::CurrentSource || c.kind == DeviceKind::Resistor ||
               c.kind == DeviceKind::Capacitor) {
      out.push_back(c.name + "." + netlist::value_param(c.kind));
    }
  }
  return out;
}

struct SimulationDeck {
  std::string name;
  /// Testbench components plus the DUT definition.
  netlist::Netlist netlist;
  std::string dut_subckt = "dut";
  std::vector<std::string> analyses;
  std::vector<MeasureDecl> measures;
  /// DUT-local parameter paths every assignment must cover.
  std::vector<std::string> slots;
  /// Matched device groups inside the DUT.
  std::vector<std::vector<std::string>> matched;
  std::string control;

  const netlist::Netlist& dut() const {
    if (dut_subckt.empty()) return netlist;
    const auto* s = netlist.find_subckt(dut_subckt);
    if (!s) throw DeckError("deck " + name + " has no subcircuit " + dut_subckt);
    return s->body;
  }

  /// Deck with the assignment applied to the DUT. Refuses incomplete or
  /// unknown assignments.
  SimulationDeck substituted(const std::map<std::string, double>& assignment) const {
    std::vector<std::string> missing;
    for (const auto& s : slots)
      if (!assignment.count(s)) missing.push_back(s);
    if (!missing.empty()) throw DeckError("assignment misses slots: " + str::join(missing, ", "));
    std::set<std::string> known(slots.begin(), slots.end());
    for (const auto& [path, v] : assignment)
      if (!known.count(path)) throw DeckError("assignment sets unknown slot " + path);
    std::map<std::string, double> scoped;
    for (const auto& [path, v] : assignment)
      scoped[dut_subckt.empty() ? path : dut_subckt + "/" + path] = v;
    SimulationDeck out = *this;
    out.netlist = netlist::apply_sizing(netlist, scoped);
    return out;
  }

  std::string render(const std::map<std::string, double>& assignment) const {
    return substituted(assignment).text();
  }

  std::string text() const {
    std::ostringstream os;
    os << "*% deck " << name << "\n";
    for (const auto& a : analyses) os << "*% analysis " << a << "\n";
    for (const auto& m : measures)
      os << "*% measure " << m.name << " " << (m.kind.empty() ? "-" : m.kind) << " "
         << (m.unit.empty() ? "-" : m.unit) << "\n";
    for (const auto& s : slots) os << "*% slot " << s << "\n";
    for (const auto& g : matched) os << "*% match " << str::join(g, " ") << "\n";
    std::string body = netlist::emit_netlist(netlist);
    auto end = body.rfind(".end");
    if (end != std::string::npos) body.erase(end);
    os << body;
    if (!control.empty()) {
      os << control;
      if (control.back() != '\n') os << "\n";
    }
    os << ".end\n";
    return os.str();
  }
};

inline bool is_netlist_card(std::string_view head) {
  std::string h = str::lower(head);
  return h == ".title" || h == ".subckt" || h == ".ends" || h == ".end";
}

inline SimulationDeck parse_deck(std::string_view text) {
  SimulationDeck d;
  std::string body;
  std::string control;
  bool in_control_continuation = false;
  for (const auto& raw : str::split(text, '\n')) {
    std::string_view line = str::trim(raw);
    if (str::starts_with(line, "*%")) {
      auto toks = str::tokenize(line.substr(2));
      if (toks.empty()) continue;
      const std::string& key = toks[0].text;
      auto need = [&](std::size_t n) {
        if (toks.size() < n) throw DeckError("deck declaration too short: " + std::string(line));
      };
      if (key == "deck") {
        need(2);
        d.name = toks[1].text;
      } else if (key == "analysis") {
        need(2);
        d.analyses.push_back(toks[1].text);
      } else if (key == "measure") {
        need(2);
        MeasureDecl m{toks[1].text, "", ""};
        if (toks.size() > 2 && toks[2].text != "-") m.kind = toks[2].text;
        if (toks.size() > 3 && toks[3].text != "-") m.unit = toks[3].text;
        d.measures.push_back(m);
      } else if (key == "slot") {
        need(2);
        d.slots.push_back(toks[1].text);
      } else if (key == "match") {
        need(3);
        std::vector<std::string> g;
        for (std::size_t i = 1; i < toks.size(); ++i) g.push_back(toks[i].text);
        d.matched.push_back(g);
      } else {
        throw DeckError("unknown deck declaration '" + key + "'");
      }
      in_control_continuation = false;
      continue;
    }
    bool continuation = !line.empty() && line[0] == '+';
    bool control_line = !line.empty() && line[0] == '.' && !is_netlist_card(str::tokenize(line)[0].text);
    if (control_line || (continuation && in_control_continuation)) {
      control += std::string(raw) + "\n";
      in_control_continuation = true;
      continue;
    }
    if (!line.empty() && line[0] != '*') in_control_continuation = false;
    body += std::string(raw) + "\n";
  }
  try {
    d.netlist = netlist::parse_netlist(body);
  } catch (const netlist::ParseError& e) {
    throw DeckError(std::string("deck netlist: ") + e.what());
  }
  d.control = control;
  if (!d.netlist.find_subckt(d.dut_subckt)) {
    if (d.netlist.subcircuits.empty()) d.dut_subckt.clear();
  }
  return d;
}

}  // namespace amskit::deck
