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

// Netlist data model plus the parser/emitter for the SPICE subset used by
// every other stage:
//
//   M<name> <d> <g> <s> <b> <model> [W=<v>] [L=<v>] [nf=<int>]
//   R<name> <a> <b> <v> | C<name> ... | I<name> ... | V<name> ...
//   X<name> <net...> <subckt>
//   .subckt <name> <port...>  ...  .ends [<name>]
//   .title <text>
//   .end
//
// '*' starts a comment line and '+' continues the previous statement.
// Values accept the suffixes f p n u m k meg g and are stored in SI units.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amskit/common.hpp"

namespace amskit::netlist {

inline constexpr std::string_view kGround = "0";

enum class DeviceKind {
  NMOS,
  PMOS,
  Resistor,
  Capacitor,
  CurrentSource,
  VoltageSource,
  SubcircuitInstance,
  Junction,
};

inline std::string_view to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::NMOS: return "nmos";
    case DeviceKind::PMOS: return "pmos";
    case DeviceKind::Resistor: return "resistor";
    case DeviceKind::Capacitor: return "capacitor";
    case DeviceKind::CurrentSource: return "isource";
    case DeviceKind::VoltageSource: return "vsource";
    case DeviceKind::SubcircuitInstance: return "subckt";
    case DeviceKind::Junction: return "junction";
  }
  return "?";
}

inline std::optional<DeviceKind> kind_from_string(std::string_view s) {
  for (auto k : {DeviceKind::NMOS, DeviceKind::PMOS, DeviceKind::Resistor, DeviceKind::Capacitor,
                 DeviceKind::CurrentSource, DeviceKind::VoltageSource,
                 DeviceKind::SubcircuitInstance, DeviceKind::Junction}) {
    if (str::iequals(s, to_string(k))) return k;
  }
  return std::nullopt;
}

inline bool is_mos(DeviceKind k) { return k == DeviceKind::NMOS || k == DeviceKind::PMOS; }

/// Fixed pin count, or -1 where the count is variable (subcircuits, junctions).
inline int fixed_arity(DeviceKind k) {
  switch (k) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS: return 4;
    case DeviceKind::Resistor:
    case DeviceKind::Capacitor:
    case DeviceKind::CurrentSource:
    case DeviceKind::VoltageSource: return 2;
    default: return -1;
  }
}

/// Name of the single value parameter of a two-terminal device ("" otherwise).
inline std::string value_param(DeviceKind k) {
  switch (k) {
    case DeviceKind::Resistor: return "R";
    case DeviceKind::Capacitor: return "C";
    case DeviceKind::CurrentSource: return "I";
    case DeviceKind::VoltageSource: return "V";
    default: return {};
  }
}

inline char card_letter(DeviceKind k) {
  switch (k) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS: return 'M';
    case DeviceKind::Resistor: return 'R';
    case DeviceKind::Capacitor: return 'C';
    case DeviceKind::CurrentSource: return 'I';
    case DeviceKind::VoltageSource: return 'V';
    case DeviceKind::SubcircuitInstance: return 'X';
    case DeviceKind::Junction: return 'J';
  }
  return '?';
}

struct Component {
  std::string name;
  DeviceKind kind = DeviceKind::Resistor;
  std::vector<std::string> pins;
  std::map<std::string, double> params;
  /// MOS model name, or the referenced definition for subcircuit instances.
  std::optional<std::string> model;
  /// Source line (diagnostics only; not part of equality).
  int line = 0;

  /// Model as it is written out: MOS devices without one use their kind name.
  std::string effective_model() const {
    if (model) return *model;
    if (is_mos(kind)) return std::string(to_string(kind));
    return {};
  }
};

inline Component make_mos(std::string name, DeviceKind kind, std::string d, std::string g,
                          std::string s, std::string b, double w, double l) {
  Component c;
  c.name = std::move(name);
  c.kind = kind;
  c.pins = {std::move(d), std::move(g), std::move(s), std::move(b)};
  c.params = {{"W", w}, {"L", l}};
  c.model = std::string(to_string(kind));
  return c;
}

inline Component make_two_terminal(std::string name, DeviceKind kind, std::string a,
                                   std::string b, double value) {
  Component c;
  c.name = std::move(name);
  c.kind = kind;
  c.pins = {std::move(a), std::move(b)};
  c.params = {{value_param(kind), value}};
  return c;
}

struct Subcircuit;

struct Netlist {
  std::string title;
  std::vector<Component> components;
  /// Role labels (input, output, bias, supply, ground, ...); carried in a
  /// sidecar file rather than the netlist text.
  std::map<std::string, std::set<std::string>> net_roles;
  std::vector<Subcircuit> subcircuits;

  const Component* find(std::string_view name) const {
    for (const auto& c : components)
      if (c.name == name) return &c;
    return nullptr;
  }
  Component* find(std::string_view name) {
    for (auto& c : components)
      if (c.name == name) return &c;
    return nullptr;
  }
  const Subcircuit* find_subckt(std::string_view name) const;

  /// Every net touched by a pin or carrying a role label.
  std::set<std::string> nets() const {
    std::set<std::string> out;
    for (const auto& c : components) out.insert(c.pins.begin(), c.pins.end());
    for (const auto& [net, roles] : net_roles) out.insert(net);
    return out;
  }

  std::size_t pin_count() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.pins.size();
    return n;
  }
};

struct Subcircuit {
  std::string name;
  std::vector<std::string> ports;
  Netlist body;
};

inline const Subcircuit* Netlist::find_subckt(std::string_view name) const {
  for (const auto& s : subcircuits)
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Values

/// Parses "1.5k", "100n", "2meg", "3e-6" into SI units. Decimal text is
/// rebuilt with the suffix folded into the exponent so the result is the
/// correctly rounded double of the written number.
inline std::optional<double> parse_value(std::string_view text) {
  std::size_t i = 0;
  std::string mantissa;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) mantissa.push_back(text[i++]);
  bool digits = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    mantissa.push_back(text[i++]);
    digits = true;
  }
  if (i < text.size() && text[i] == '.') {
    mantissa.push_back(text[i++]);
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      mantissa.push_back(text[i++]);
      digits = true;
    }
  }
  if (!digits) return std::nullopt;
  long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
    if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
      auto res = std::from_chars(text.data() + i + 1 + (text[i + 1] == '+' ? 1 : 0),
                                 text.data() + text.size(), exponent);
      if (res.ec != std::errc()) return std::nullopt;
      i = static_cast<std::size_t>(res.ptr - text.data());
    }
  }
  std::string suffix = str::lower(text.substr(i));
  static const std::pair<std::string_view, int> kSuffixes[] = {
      {"meg", 6}, {"f", -15}, {"p", -12}, {"n", -9}, {"u", -6},
      {"m", -3},  {"k", 3},   {"g", 9},
  };
  if (!suffix.empty()) {
    bool found = false;
    for (auto [s, e] : kSuffixes) {
      if (suffix == s) {
        exponent += e;
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  std::string full = mantissa + "e" + std::to_string(exponent);
  double v = 0.0;
  const char* begin = full.data() + (full[0] == '+' ? 1 : 0);
  auto res = std::from_chars(begin, full.data() + full.size(), v);
  if (res.ec != std::errc() || res.ptr != full.data() + full.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

/// Engineering-suffix text for `v` that parse_value maps back to exactly `v`.
inline std::string format_value(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific);
  std::string sci(buf, res.ptr);
  auto epos = sci.find('e');
  std::string mant = sci.substr(0, epos);
  int exp10 = std::stoi(sci.substr(epos + 1));
  std::string sign;
  if (mant[0] == '-') {
    sign = "-";
    mant.erase(0, 1);
  }
  std::string digit_str;
  for (char c : mant)
    if (c != '.') digit_str.push_back(c);
  int eng = static_cast<int>(std::floor(exp10 / 3.0)) * 3;
  static const std::map<int, std::string> kSuffix = {
      {-15, "f"}, {-12, "p"}, {-9, "n"}, {-6, "u"}, {-3, "m"}, {0, ""}, {3, "k"}, {6, "meg"}, {9, "g"},
  };
  auto it = kSuffix.find(eng);
  if (it == kSuffix.end()) return str::shortest(v);
  std::size_t int_digits = static_cast<std::size_t>(exp10 - eng) + 1;
  while (digit_str.size() < int_digits) digit_str.push_back('0');
  std::string out = sign + digit_str.substr(0, int_digits);
  if (digit_str.size() > int_digits) out += "." + digit_str.substr(int_digits);
  return out + it->second;
}

// ---------------------------------------------------------------------------
// Parsing

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column),
        message_(message) {}
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& detail() const { return message_; }

 private:
  int line_;
  int column_;
  std::string message_;
};

namespace detail {

struct LogicalLine {
  int line = 0;
  std::vector<str::Token> tokens;
  std::string raw;
};

inline std::vector<LogicalLine> logical_lines(std::string_view text) {
  std::vector<LogicalLine> out;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++lineno;
    pos = eol + 1;
    std::string_view t = str::trim(line);
    if (t.empty() || t.front() == '*') {
      if (eol == text.size()) break;
      continue;
    }
    if (t.front() == '+') {
      if (out.empty()) throw ParseError(lineno, 1, "continuation line without a statement");
      auto toks = str::tokenize(line);
      // Drop the leading '+' (possibly glued to the first token).
      if (!toks.empty()) {
        if (toks[0].text == "+") {
          toks.erase(toks.begin());
        } else {
          toks[0].text.erase(0, 1);
          toks[0].column += 1;
        }
      }
      for (auto& tk : toks) out.back().tokens.push_back(tk);
      out.back().raw += " " + std::string(t.substr(1));
    } else {
      out.push_back({lineno, str::tokenize(line), std::string(t)});
    }
    if (eol == text.size()) break;
  }
  return out;
}

inline void check_value(const Component& c, const std::string& key, double v, int line,
                        int column) {
  if (!std::isfinite(v)) throw ParseError(line, column, "non-finite value for " + key);
  if (c.kind == DeviceKind::VoltageSource) return;
  if (v <= 0.0) throw ParseError(line, column, key + " must be positive");
  if (key == "nf" && (v != std::floor(v) || v < 1.0))
    throw ParseError(line, column, "nf must be a positive integer");
}

}  // namespace detail

inline Netlist parse_netlist(std::string_view text) {
  Netlist top;
  Subcircuit* open = nullptr;
  int open_line = 0;
  bool ended = false;
  struct Ref {
    bool in_subckt;
    std::string subckt_owner;
    std::string component;
    int line;
    int column;
  };
  std::vector<Ref> refs;
  std::set<std::string> top_names;
  std::map<std::string, std::set<std::string>> sub_names;

  for (const auto& ll : detail::logical_lines(text)) {
    const auto& toks = ll.tokens;
    if (toks.empty()) continue;
    if (ended) throw ParseError(ll.line, toks[0].column, "statement after .end");
    const std::string& head = toks[0].text;
    if (head[0] == '.') {
      std::string card = str::lower(head);
      if (card == ".title") {
        std::string_view rest = str::trim(std::string_view(ll.raw).substr(head.size()));
        if (open) throw ParseError(ll.line, toks[0].column, ".title inside .subckt");
        top.title = std::string(rest);
      } else if (card == ".subckt") {
        if (open) throw ParseError(ll.line, toks[0].column, "nested .subckt is not supported");
        if (toks.size() < 2) throw ParseError(ll.line, toks[0].column, ".subckt requires a name");
        if (top.find_subckt(toks[1].text))
          throw ParseError(ll.line, toks[1].column, "duplicate subcircuit " + toks[1].text);
        Subcircuit s;
        s.name = toks[1].text;
        std::set<std::string> seen;
        for (std::size_t i = 2; i < toks.size(); ++i) {
          if (!seen.insert(toks[i].text).second)
            throw ParseError(ll.line, toks[i].column, "duplicate port " + toks[i].text);
          s.ports.push_back(toks[i].text);
        }
        s.body.title = s.name;
        top.subcircuits.push_back(std::move(s));
        open = &top.subcircuits.back();
        open_line = ll.line;
      } else if (card == ".ends") {
        if (!open) throw ParseError(ll.line, toks[0].column, ".ends without .subckt");
        if (toks.size() > 2) throw ParseError(ll.line, toks[2].column, "unexpected token");
        if (toks.size() == 2 && toks[1].text != open->name)
          throw ParseError(ll.line, toks[1].column, ".ends name does not match " + open->name);
        open = nullptr;
      } else if (card == ".end") {
        if (toks.size() > 1) throw ParseError(ll.line, toks[1].column, "unexpected token");
        ended = true;
      } else {
        throw ParseError(ll.line, toks[0].column, "unrecognized card " + head);
      }
      continue;
    }

    Component c;
    c.name = head;
    c.line = ll.line;
    char prefix = static_cast<char>(std::toupper(static_cast<unsigned char>(head[0])));
    if (head.size() < 2)
      throw ParseError(ll.line, toks[0].column, "device name needs at least one character after the prefix");
    std::vector<const str::Token*> positional;
    std::vector<const str::Token*> assigns;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      if (toks[i].text.find('=') != std::string::npos)
        assigns.push_back(&toks[i]);
      else if (!assigns.empty())
        throw ParseError(ll.line, toks[i].column, "positional token after parameters");
      else
        positional.push_back(&toks[i]);
    }
    switch (prefix) {
      case 'M': {
        if (positional.size() != 5)
          throw ParseError(ll.line, toks[0].column,
                           "arity mismatch: MOS needs 4 nets and a model, got " +
                               std::to_string(positional.size()) + " tokens");
        for (int i = 0; i < 4; ++i) c.pins.push_back(positional[static_cast<std::size_t>(i)]->text);
        std::string model = positional[4]->text;
        std::string lm = str::lower(model);
        if (lm.find("pmos") != std::string::npos || lm.find("pch") != std::string::npos ||
            (lm.size() > 0 && lm[0] == 'p'))
          c.kind = DeviceKind::PMOS;
        else
          c.kind = DeviceKind::NMOS;
        c.model = model;
        for (const auto* a : assigns) {
          auto eq = a->text.find('=');
          std::string key = str::lower(a->text.substr(0, eq));
          std::string canon = key == "w" ? "W" : key == "l" ? "L" : key == "nf" ? "nf" : "";
          if (canon.empty()) throw ParseError(ll.line, a->column, "unknown parameter " + key);
          if (c.params.count(canon)) throw ParseError(ll.line, a->column, "duplicate parameter " + canon);
          auto v = parse_value(std::string_view(a->text).substr(eq + 1));
          if (!v) throw ParseError(ll.line, a->column, "bad value in " + a->text);
          detail::check_value(c, canon, *v, ll.line, a->column);
          c.params[canon] = *v;
        }
        break;
      }
      case 'R':
      case 'C':
      case 'I':
      case 'V': {
        c.kind = prefix == 'R'   ? DeviceKind::Resistor
                 : prefix == 'C' ? DeviceKind::Capacitor
                 : prefix == 'I' ? DeviceKind::CurrentSource
                                 : DeviceKind::VoltageSource;
        if (!assigns.empty())
          throw ParseError(ll.line, assigns[0]->column, "unexpected parameter assignment");
        if (positional.size() != 3)
          throw ParseError(ll.line, toks[0].column,
                           "arity mismatch: two-terminal device needs 2 nets and a value");
        c.pins = {positional[0]->text, positional[1]->text};
        auto v = parse_value(positional[2]->text);
        if (!v) throw ParseError(ll.line, positional[2]->column, "bad value " + positional[2]->text);
        std::string key = value_param(c.kind);
        detail::check_value(c, key, *v, ll.line, positional[2]->column);
        c.params[key] = *v;
        break;
      }
      case 'X': {
        c.kind = DeviceKind::SubcircuitInstance;
        if (!assigns.empty())
          throw ParseError(ll.line, assigns[0]->column, "unexpected parameter assignment");
        if (positional.size() < 2)
          throw ParseError(ll.line, toks[0].column, "arity mismatch: instance needs nets and a subcircuit name");
        for (std::size_t i = 0; i + 1 < positional.size(); ++i) c.pins.push_back(positional[i]->text);
        c.model = positional.back()->text;
        refs.push_back({open != nullptr, open ? open->name : std::string(), c.name, ll.line,
                        positional.back()->column});
        break;
      }
      default:
        throw ParseError(ll.line, toks[0].column, std::string("unknown device prefix '") + head[0] + "'");
    }
    auto& names = open ? sub_names[open->name] : top_names;
    if (!names.insert(c.name).second)
      throw ParseError(ll.line, toks[0].column, "duplicate component name " + c.name);
    (open ? open->body : top).components.push_back(std::move(c));
  }
  if (open) throw ParseError(open_line, 1, "unterminated .subckt " + open->name);

  for (const auto& r : refs) {
    const Netlist& scope = r.in_subckt ? top.find_subckt(r.subckt_owner)->body : top;
    const Component* inst = scope.find(r.component);
    const Subcircuit* def = top.find_subckt(*inst->model);
    if (!def) throw ParseError(r.line, r.column, "unknown subcircuit " + *inst->model);
    if (def->ports.size() != inst->pins.size())
      throw ParseError(r.line, r.column,
                       "arity mismatch: " + def->name + " has " + std::to_string(def->ports.size()) +
                           " ports, instance binds " + std::to_string(inst->pins.size()));
  }
  return top;
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {

inline void emit_component(std::ostream& os, const Component& c) {
  os << c.name;
  for (const auto& p : c.pins) os << ' ' << p;
  switch (c.kind) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS:
      os << ' ' << c.effective_model();
      for (const char* key : {"W", "L", "nf"}) {
        auto it = c.params.find(key);
        if (it != c.params.end()) os << ' ' << key << '=' << format_value(it->second);
      }
      break;
    case DeviceKind::SubcircuitInstance:
      os << ' ' << c.model.value_or("");
      break;
    case DeviceKind::Junction:
      throw Error("junction " + c.name + " has no netlist card; collapse junctions first");
    default: {
      auto it = c.params.find(value_param(c.kind));
      os << ' ' << (it == c.params.end() ? std::string("0") : format_value(it->second));
    }
  }
  os << '\n';
}

}  // namespace detail

inline std::string emit_netlist(const Netlist& n) {
  std::ostringstream os;
  os << ".title";
  if (!n.title.empty()) os << ' ' << n.title;
  os << '\n';
  for (const auto& s : n.subcircuits) {
    os << ".subckt " << s.name;
    for (const auto& p : s.ports) os << ' ' << p;
    os << '\n';
    for (const auto& c : s.body.components) detail::emit_component(os, c);
    os << ".ends " << s.name << '\n';
  }
  for (const auto& c : n.components) detail::emit_component(os, c);
  os << ".end\n";
  return os.str();
}

/// Sidecar role file: one line per net, "<net> <role> [<role>...]".
inline std::string emit_net_roles(const Netlist& n) {
  std::ostringstream os;
  for (const auto& [net, roles] : n.net_roles) {
    if (roles.empty()) continue;
    os << net;
    for (const auto& r : roles) os << ' ' << r;
    os << '\n';
  }
  return os.str();
}

inline std::map<std::string, std::set<std::string>> parse_net_roles(std::string_view text) {
  std::map<std::string, std::set<std::string>> out;
  int lineno = 0;
  for (const auto& line : str::split(text, '\n')) {
    ++lineno;
    auto t = str::trim(line);
    if (t.empty() || t.front() == '*' || t.front() == '#') continue;
    auto toks = str::tokenize(t);
    if (toks.size() < 2) throw ParseError(lineno, 1, "role line needs a net and at least one role");
    for (std::size_t i = 1; i < toks.size(); ++i) out[toks[0].text].insert(toks[i].text);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equality

namespace detail {

inline bool same_component(const Component& a, const Component& b) {
  return a.name == b.name && a.kind == b.kind && a.pins == b.pins && a.params == b.params &&
         a.effective_model() == b.effective_model();
}

}  // namespace detail

/// Structural equality: ignores comments, component order and subcircuit
/// order, but not pin order. Net roles live in the sidecar and are ignored.
inline bool canonical_equal(const Netlist& a, const Netlist& b) {
  if (a.title != b.title || a.components.size() != b.components.size() ||
      a.subcircuits.size() != b.subcircuits.size())
    return false;
  for (const auto& ca : a.components) {
    const Component* cb = b.find(ca.name);
    if (!cb || !detail::same_component(ca, *cb)) return false;
  }
  for (const auto& sa : a.subcircuits) {
    const Subcircuit* sb = b.find_subckt(sa.name);
    if (!sb || sa.ports != sb->ports) return false;
    if (sa.body.components.size() != sb->body.components.size()) return false;
    for (const auto& ca : sa.body.components) {
      const Component* cb = sb->body.find(ca.name);
      if (!cb || !detail::same_component(ca, *cb)) return false;
    }
  }
  return true;
}

/// Topological equivalence: same component names and kinds, and a bijection
/// between net names that maps every pin list of `a` onto `b`. Parameter
/// values are ignored.
inline bool equivalent_up_to_net_renaming(const Netlist& a, const Netlist& b) {
  if (a.components.size() != b.components.size()) return false;
  std::map<std::string, std::string> fwd, back;
  for (const auto& ca : a.components) {
    const Component* cb = b.find(ca.name);
    if (!cb || cb->kind != ca.kind || cb->pins.size() != ca.pins.size()) return false;
    for (std::size_t i = 0; i < ca.pins.size(); ++i) {
      const auto& na = ca.pins[i];
      const auto& nb = cb->pins[i];
      auto f = fwd.find(na);
      auto r = back.find(nb);
      if (f == fwd.end() && r == back.end()) {
        fwd[na] = nb;
        back[nb] = na;
      } else if (f == fwd.end() || r == back.end() || f->second != nb || r->second != na) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  enum class Kind {
    DanglingNet,
    FloatingComponent,
    ArityMismatch,
    UnknownSubcircuit,
    DuplicateName,
    InvalidParameter,
  };
  Kind kind;
  std::string subject;
  std::string message;
};

inline std::string_view to_string(Diagnostic::Kind k) {
  switch (k) {
    case Diagnostic::Kind::DanglingNet: return "dangling-net";
    case Diagnostic::Kind::FloatingComponent: return "floating-component";
    case Diagnostic::Kind::ArityMismatch: return "arity-mismatch";
    case Diagnostic::Kind::UnknownSubcircuit: return "unknown-subcircuit";
    case Diagnostic::Kind::DuplicateName: return "duplicate-name";
    case Diagnostic::Kind::InvalidParameter: return "invalid-parameter";
  }
  return "?";
}

namespace detail {

inline void validate_scope(const Netlist& scope, const Netlist& root,
                           const std::set<std::string>& external, const std::string& prefix,
                           std::vector<Diagnostic>& out) {
  using K = Diagnostic::Kind;
  std::set<std::string> names;
  std::map<std::string, int> pins_on;
  for (const auto& c : scope.components) {
    if (!names.insert(c.name).second)
      out.push_back({K::DuplicateName, prefix + c.name, "duplicate component name"});
    for (const auto& p : c.pins) ++pins_on[p];
    int arity = fixed_arity(c.kind);
    if (arity >= 0 && static_cast<int>(c.pins.size()) != arity) {
      out.push_back({K::ArityMismatch, prefix + c.name,
                     std::string(to_string(c.kind)) + " expects " + std::to_string(arity) +
                         " pins, has " + std::to_string(c.pins.size())});
    }
    if (c.kind == DeviceKind::Junction && c.pins.size() < 3)
      out.push_back({K::ArityMismatch, prefix + c.name, "junction needs at least 3 pins"});
    if (c.kind == DeviceKind::SubcircuitInstance) {
      const Subcircuit* def = c.model ? root.find_subckt(*c.model) : nullptr;
      if (!def)
        out.push_back({K::UnknownSubcircuit, prefix + c.name,
                       "unknown subcircuit " + c.model.value_or("<none>")});
      else if (def->ports.size() != c.pins.size())
        out.push_back({K::ArityMismatch, prefix + c.name,
                       def->name + " has " + std::to_string(def->ports.size()) + " ports, instance binds " +
                           std::to_string(c.pins.size())});
    }
    for (const auto& [key, v] : c.params) {
      bool ok = std::isfinite(v) && (c.kind == DeviceKind::VoltageSource || v > 0.0);
      if (key == "nf") ok = ok && v == std::floor(v) && v >= 1.0;
      if (!ok)
        out.push_back({K::InvalidParameter, prefix + c.name + "." + key,
                       "value " + str::shortest(v) + " out of range"});
    }
  }
  auto anchored = [&](const std::string& net) {
    if (net == kGround || external.count(net)) return true;
    auto it = scope.net_roles.find(net);
    return it != scope.net_roles.end() && !it->second.empty();
  };
  for (const auto& [net, count] : pins_on) {
    if (count == 1 && !anchored(net))
      out.push_back({K::DanglingNet, prefix + net, "net touched by a single pin"});
  }
  for (const auto& c : scope.components) {
    if (c.pins.empty()) continue;
    std::map<std::string, int> own;
    for (const auto& p : c.pins) ++own[p];
    bool floating = true;
    for (const auto& [net, k] : own) {
      if (pins_on[net] > k || anchored(net)) {
        floating = false;
        break;
      }
    }
    if (floating)
      out.push_back({K::FloatingComponent, prefix + c.name, "component shares no net with the circuit"});
  }
}

}  // namespace detail

/// Empty result means the netlist is well-formed.
inline std::vector<Diagnostic> validate(const Netlist& n) {
  std::vector<Diagnostic> out;
  detail::validate_scope(n, n, {}, "", out);
  std::set<std::string> seen;
  for (const auto& s : n.subcircuits) {
    if (!seen.insert(s.name).second)
      out.push_back({Diagnostic::Kind::DuplicateName, s.name, "duplicate subcircuit"});
    std::set<std::string> ports(s.ports.begin(), s.ports.end());
    detail::validate_scope(s.body, n, ports, s.name + "/", out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transformations

class SizingError : public Error {
 public:
  using Error::Error;
};

/// Parameter path: "<component>.<param>" at top level, or
/// "<subckt>/<component>.<param>" inside a definition.
struct ParamPath {
  std::string subckt;
  std::string component;
  std::string param;

  static ParamPath parse(std::string_view path) {
    ParamPath p;
    auto slash = path.find('/');
    if (slash != std::string_view::npos) {
      p.subckt = std::string(path.substr(0, slash));
      path.remove_prefix(slash + 1);
    }
    auto dot = path.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == path.size())
      throw SizingError("malformed parameter path '" + std::string(path) + "'");
    p.component = std::string(path.substr(0, dot));
    p.param = std::string(path.substr(dot + 1));
    return p;
  }
  std::string str() const {
    return (subckt.empty() ? "" : subckt + "/") + component + "." + param;
  }
};

inline bool is_legal_param(DeviceKind kind, std::string_view param) {
  if (is_mos(kind)) return param == "W" || param == "L" || param == "nf";
  std::string vp = value_param(kind);
  return !vp.empty() && param == vp;
}

inline Netlist apply_sizing(const Netlist& n, const std::map<std::string, double>& assignment) {
  Netlist out = n;
  for (const auto& [path, value] : assignment) {
    auto p = ParamPath::parse(path);
    Netlist* scope = &out;
    if (!p.subckt.empty()) {
      scope = nullptr;
      for (auto& s : out.subcircuits)
        if (s.name == p.subckt) scope = &s.body;
      if (!scope) throw SizingError("unknown subcircuit in path " + path);
    }
    Component* c = scope->find(p.component);
    if (!c) throw SizingError("unknown component in path " + path);
    if (!is_legal_param(c->kind, p.param)) throw SizingError("unknown parameter in path " + path);
    bool ok = std::isfinite(value) && (c->kind == DeviceKind::VoltageSource || value > 0.0);
    if (p.param == "nf") ok = ok && value == std::floor(value) && value >= 1.0;
    if (!ok) throw SizingError("value " + str::shortest(value) + " out of range for " + path);
    c->params[p.param] = value;
  }
  return out;
}

class MergeError : public Error {
 public:
  using Error::Error;
};

/// Rewires every pin on `a` or `b` to `survivor` (one of the two) and unions
/// their role labels. Ground may not be merged away.
inline Netlist merge_nets(const Netlist& n, const std::string& a, const std::string& b,
                          const std::string& survivor) {
  if (survivor != a && survivor != b) throw MergeError("survivor must be one of the merged nets");
  auto nets = n.nets();
  if (!nets.count(a)) throw MergeError("unknown net " + a);
  if (!nets.count(b)) throw MergeError("unknown net " + b);
  if ((a == kGround || b == kGround) && survivor != kGround)
    throw MergeError("ground net cannot be merged away");
  if (a == b) return n;
  const std::string& victim = survivor == a ? b : a;
  Netlist out = n;
  for (auto& c : out.components)
    for (auto& p : c.pins)
      if (p == victim) p = survivor;
  auto it = out.net_roles.find(victim);
  if (it != out.net_roles.end()) {
    auto roles = it->second;
    out.net_roles.erase(it);
    out.net_roles[survivor].insert(roles.begin(), roles.end());
  }
  return out;
}

/// Replaces each junction by merging all of its nets into one.
inline Netlist collapse_junctions(const Netlist& n) {
  Netlist out = n;
  for (;;) {
    auto it = std::find_if(out.components.begin(), out.components.end(),
                           [](const Component& c) { return c.kind == DeviceKind::Junction; });
    if (it == out.components.end()) break;
    auto pins = it->pins;
    out.components.erase(it);
    auto present = out.nets();
    std::set<std::string> group;
    for (const auto& p : pins)
      if (present.count(p)) group.insert(p);
    if (group.empty()) continue;
    std::string survivor = group.count(std::string(kGround)) ? std::string(kGround) : *group.begin();
    for (const auto& net : group)
      if (net != survivor) out = merge_nets(out, survivor, net, survivor);
  }
  return out;
}

}  // namespace amskit::netlist
