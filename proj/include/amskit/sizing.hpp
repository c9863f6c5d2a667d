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

// Device sizing by Bayesian optimization over a tied parameter space.
//
// The optimizer works on the free (reduced) parameters mapped to the unit
// cube. Followers of a tie group are filled in from their leader before each
// evaluation, so the evaluator always sees a full assignment.
//
// Figure of merit, per term i with optional log10 transform t():
//
//   maximize:  w * (min(t(f), t(bound)) - lo) / (hi - lo)
//   minimize: -w * (max(t(f), t(bound)) - hi) / (hi - lo)
//   target:   -w * |t(f) - t(target)| / (hi - lo)
//
// where (lo, hi) is the term's norm in transformed units.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amskit/common.hpp"
#include "amskit/gp.hpp"
#include "amskit/kg.hpp"
#include "amskit/measure.hpp"
#include "amskit/netlist.hpp"

namespace amskit::sizing {

using nlohmann::json;

class SizingError : public Error {
 public:
  using Error::Error;
};

class FoMError : public SizingError {
 public:
  using SizingError::SizingError;
};

// ---------------------------------------------------------------------------
// Random numbers. The engine sequence is fixed by the standard; the
// distributions below are spelled out so results do not depend on the
// standard library.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 0x51ed2701ULL)));
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Halton sequence with one random permutation of the nonzero digits per
/// dimension.
class ScrambledHalton {
 public:
  ScrambledHalton(std::size_t dim, std::mt19937_64& rng) {
    for (std::uint32_t p = 2; primes_.size() < dim; ++p) {
      bool prime = true;
      for (auto q : primes_)
        if (p % q == 0) {
          prime = false;
          break;
        }
      if (prime) primes_.push_back(p);
    }
    for (auto b : primes_) {
      std::vector<std::uint32_t> perm(b);
      for (std::uint32_t i = 0; i < b; ++i) perm[i] = i;
      // Digit 0 stays fixed so distinct indices map to distinct points.
      for (std::uint32_t i = b - 1; i > 1; --i) std::swap(perm[i], perm[1 + uniform_index(rng, i)]);
      perms_.push_back(std::move(perm));
    }
  }

  /// Point `index` (index 0 is the origin and usually skipped).
  Eigen::VectorXd point(std::uint64_t index) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(primes_.size()));
    for (std::size_t j = 0; j < primes_.size(); ++j) {
      const std::uint64_t b = primes_[j];
      double f = 1.0 / static_cast<double>(b);
      double v = 0.0;
      for (std::uint64_t i = index; i > 0; i /= b) {
        v += f * perms_[j][i % b];
        f /= static_cast<double>(b);
      }
      x[static_cast<Eigen::Index>(j)] = v;
    }
    return x;
  }

 private:
  std::vector<std::uint32_t> primes_;
  std::vector<std::vector<std::uint32_t>> perms_;
};

// ---------------------------------------------------------------------------
// Parameter space

enum class Scale { Linear, Log };

struct Param {
  std::string path;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::Linear;
  bool integer = false;
};

struct Tie {
  std::string leader;
  std::vector<std::string> followers;
  kg::TieMode mode = kg::TieMode::Equal;
  double factor = 1.0;
};

class ParameterSpace {
 public:
  std::vector<Param> params;
  std::vector<Tie> ties;

  void validate() const {
    std::set<std::string> paths;
    for (const auto& p : params) {
      if (!paths.insert(p.path).second) throw SizingError("parameter " + p.path + " listed twice");
      if (!(p.lower < p.upper)) throw SizingError("parameter " + p.path + " needs lower < upper");
      if (p.scale == Scale::Log && !(p.lower > 0.0)) throw SizingError("log-scaled " + p.path + " needs lower > 0");
    }
    std::set<std::string> followers;
    std::set<std::string> leaders;
    for (const auto& t : ties) {
      if (!paths.count(t.leader)) throw SizingError("tie leader " + t.leader + " is not a parameter");
      if (t.mode == kg::TieMode::Ratio && !(t.factor > 0.0)) throw SizingError("tie on " + t.leader + " has bad ratio");
      leaders.insert(t.leader);
      for (const auto& f : t.followers) {
        if (!paths.count(f)) throw SizingError("tie follower " + f + " is not a parameter");
        if (f == t.leader) throw SizingError("parameter " + f + " tied to itself");
        if (!followers.insert(f).second) throw SizingError("parameter " + f + " follows two ties");
      }
    }
    for (const auto& l : leaders)
      if (followers.count(l)) throw SizingError("parameter " + l + " is both leader and follower");
  }

  std::size_t size() const { return params.size(); }

  std::vector<std::string> free_paths() const {
    std::set<std::string> followers;
    for (const auto& t : ties) followers.insert(t.followers.begin(), t.followers.end());
    std::vector<std::string> out;
    for (const auto& p : params)
      if (!followers.count(p.path)) out.push_back(p.path);
    return out;
  }

  std::size_t dim() const {
    std::size_t f = 0;
    for (const auto& t : ties) f += t.followers.size();
    return params.size() - f;
  }

  const Param& param(const std::string& path) const {
    for (const auto& p : params)
      if (p.path == path) return p;
    throw SizingError("no parameter " + path);
  }

  /// Unit-cube coordinates to physical reduced values, integers rounded.
  std::vector<double> decode(const Eigen::VectorXd& u) const {
    auto free = free_paths();
    if (static_cast<std::size_t>(u.size()) != free.size())
      throw SizingError("unit vector has " + std::to_string(u.size()) + " entries, space has " +
                        std::to_string(free.size()));
    std::vector<double> out;
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto& p = param(free[i]);
      double t = std::clamp(u[static_cast<Eigen::Index>(i)], 0.0, 1.0);
      double v = p.scale == Scale::Log ? std::exp(std::log(p.lower) + t * (std::log(p.upper) - std::log(p.lower)))
                                       : p.lower + t * (p.upper - p.lower);
      if (p.integer) v = std::clamp(std::round(v), std::ceil(p.lower), std::floor(p.upper));
      out.push_back(std::clamp(v, p.lower, p.upper));
    }
    return out;
  }

  Eigen::VectorXd encode(const std::vector<double>& reduced) const {
    auto free = free_paths();
    if (reduced.size() != free.size()) throw SizingError("reduced vector has wrong length");
    Eigen::VectorXd u(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto& p = param(free[i]);
      double t = p.scale == Scale::Log
                     ? (std::log(reduced[i]) - std::log(p.lower)) / (std::log(p.upper) - std::log(p.lower))
                     : (reduced[i] - p.lower) / (p.upper - p.lower);
      u[static_cast<Eigen::Index>(i)] = std::clamp(t, 0.0, 1.0);
    }
    return u;
  }

  /// Full assignment from reduced values: followers copy their leader, or
  /// take leader * factor in ratio mode.
  Assignment expand_tied(const std::vector<double>& reduced) const {
    auto free = free_paths();
    if (reduced.size() != free.size())
      throw SizingError("reduced vector has " + std::to_string(reduced.size()) + " entries, space has " +
                        std::to_string(free.size()));
    Assignment out;
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto& p = param(free[i]);
      if (!(reduced[i] >= p.lower && reduced[i] <= p.upper))
        throw SizingError(p.path + " = " + str::shortest(reduced[i]) + " outside [" + str::shortest(p.lower) + ", " +
                          str::shortest(p.upper) + "]");
      out[free[i]] = reduced[i];
    }
    for (const auto& t : ties) {
      double lead = out.at(t.leader);
      for (const auto& f : t.followers) {
        double v = t.mode == kg::TieMode::Equal ? lead : lead * t.factor;
        const auto& p = param(f);
        if (!(v >= p.lower && v <= p.upper))
          throw SizingError("tied " + f + " = " + str::shortest(v) + " falls outside its bounds");
        out[f] = v;
      }
    }
    return out;
  }
};

struct Range {
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::Log;
  bool integer = false;
};

/// Default ranges by parameter name: W and L on a log scale, finger count as
/// an integer, source/passive values over a few decades.
inline std::map<std::string, Range> default_ranges() {
  return {
      {"W", {100e-9, 3e-6, Scale::Log, false}},
      {"L", {30e-9, 1e-6, Scale::Log, false}},
      {"nf", {1, 8, Scale::Linear, true}},
      {"I", {1e-6, 100e-6, Scale::Log, false}},
      {"R", {100, 100e3, Scale::Log, false}},
      {"C", {10e-15, 10e-12, Scale::Log, false}},
  };
}

/// Space over the given parameter paths ("Comp.param"), tied per the groups
/// when `use_ties` is set. Tie parameters absent from `paths` are skipped.
inline ParameterSpace space_from_paths(const std::vector<std::string>& paths, const std::vector<kg::TieGroup>& groups,
                                       bool use_ties, const std::map<std::string, Range>& ranges = default_ranges()) {
  ParameterSpace s;
  std::set<std::string> known(paths.begin(), paths.end());
  for (const auto& path : paths) {
    auto dot = path.rfind('.');
    if (dot == std::string::npos) throw SizingError("parameter path " + path + " has no parameter name");
    auto it = ranges.find(path.substr(dot + 1));
    if (it == ranges.end()) throw SizingError("no range for parameter " + path);
    s.params.push_back({path, it->second.lower, it->second.upper, it->second.scale, it->second.integer});
  }
  if (use_ties) {
    for (const auto& g : groups) {
      if (g.components.size() < 2) continue;
      for (const auto& p : g.params) {
        std::string leader = g.components[0] + "." + p;
        if (!known.count(leader)) continue;
        Tie t{leader, {}, g.mode, g.factor};
        for (std::size_t i = 1; i < g.components.size(); ++i) {
          std::string f = g.components[i] + "." + p;
          if (known.count(f)) t.followers.push_back(f);
        }
        if (!t.followers.empty()) s.ties.push_back(std::move(t));
      }
    }
  }
  s.validate();
  return s;
}

inline json to_json(const ParameterSpace& s) {
  json params = json::array();
  for (const auto& p : s.params)
    params.push_back({{"path", p.path},
                      {"lower", p.lower},
                      {"upper", p.upper},
                      {"scale", p.scale == Scale::Log ? "log" : "linear"},
                      {"integer", p.integer}});
  json ties = json::array();
  for (const auto& t : s.ties) {
    json j = {{"leader", t.leader}, {"followers", t.followers}, {"mode", t.mode == kg::TieMode::Equal ? "equal" : "ratio"}};
    if (t.mode == kg::TieMode::Ratio) j["factor"] = t.factor;
    ties.push_back(j);
  }
  return {{"params", params}, {"ties", ties}};
}

inline Scale scale_from_string(const std::string& s) {
  if (s == "log") return Scale::Log;
  if (s == "linear") return Scale::Linear;
  throw SizingError("unknown scale '" + s + "'");
}

inline ParameterSpace space_from_json(const json& j) {
  ParameterSpace s;
  for (const auto& p : j.at("params"))
    s.params.push_back({p.at("path").get<std::string>(), p.at("lower").get<double>(), p.at("upper").get<double>(),
                        scale_from_string(p.value("scale", "linear")), p.value("integer", false)});
  for (const auto& t : j.value("ties", json::array())) {
    std::string mode = t.value("mode", "equal");
    if (mode != "equal" && mode != "ratio") throw SizingError("unknown tie mode '" + mode + "'");
    s.ties.push_back({t.at("leader").get<std::string>(), t.at("followers").get<std::vector<std::string>>(),
                      mode == "equal" ? kg::TieMode::Equal : kg::TieMode::Ratio, t.value("factor", 1.0)});
  }
  s.validate();
  return s;
}

inline std::map<std::string, Range> ranges_from_json(const json& j) {
  auto out = default_ranges();
  for (const auto& [k, v] : j.items())
    out[k] = {v.at("lower").get<double>(), v.at("upper").get<double>(), scale_from_string(v.value("scale", "log")),
              v.value("integer", false)};
  return out;
}

// ---------------------------------------------------------------------------
// Figure of merit

enum class Direction { Maximize, Minimize, Target };

struct Norm {
  double lo = 0.0;
  double hi = 1.0;
};

struct FoMTerm {
  std::string metric;
  double weight = 1.0;
  std::optional<double> bound;
  Direction direction = Direction::Maximize;
  double target = 0.0;
  bool log_scale = false;
  std::optional<Norm> norm;
};

/// Spec predicate on a metric; op is one of > >= < <= =.
struct Constraint {
  std::string metric;
  std::string op = ">";
  double value = 0.0;
  bool hard = false;
};

struct FoMConfig {
  std::vector<FoMTerm> terms;
  std::vector<Constraint> constraints;

  std::vector<std::string> metrics() const {
    std::vector<std::string> out;
    for (const auto& t : terms)
      if (std::find(out.begin(), out.end(), t.metric) == out.end()) out.push_back(t.metric);
    return out;
  }

  bool has_norms() const {
    return std::all_of(terms.begin(), terms.end(), [](const FoMTerm& t) { return t.norm.has_value(); });
  }
};

inline double transformed(const FoMTerm& t, double v) {
  if (!std::isfinite(v)) throw FoMError("metric " + t.metric + " is not finite");
  if (!t.log_scale) return v;
  if (!(v > 0.0)) throw FoMError("log-scaled metric " + t.metric + " = " + str::shortest(v) + " is not positive");
  return std::log10(v);
}

inline bool holds(const Constraint& c, double v) {
  if (c.op == ">") return v > c.value;
  if (c.op == ">=") return v >= c.value;
  if (c.op == "<") return v < c.value;
  if (c.op == "<=") return v <= c.value;
  if (c.op == "=") return std::abs(v - c.value) <= 1e-9 * std::max(1.0, std::abs(c.value));
  throw SizingError("unknown constraint operator '" + c.op + "'");
}

/// Constraints not met by the measurements, as readable strings.
inline std::vector<std::string> violations(const MeasurementSet& m, const FoMConfig& cfg, bool hard_only = false) {
  std::vector<std::string> out;
  for (const auto& c : cfg.constraints) {
    if (hard_only && !c.hard) continue;
    auto it = m.values.find(c.metric);
    if (!m.ok || it == m.values.end()) {
      out.push_back(c.metric + " missing");
    } else if (!holds(c, it->second)) {
      out.push_back(c.metric + " = " + str::general(it->second, 6) + " violates " + c.op + " " + str::general(c.value, 6));
    }
  }
  return out;
}

/// Per-metric min/max over the usable samples, in transformed units.
inline FoMConfig estimate_norms(const std::vector<MeasurementSet>& samples, FoMConfig cfg) {
  for (auto& t : cfg.terms) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t used = 0;
    for (const auto& s : samples) {
      if (!s.ok) continue;
      auto it = s.values.find(t.metric);
      if (it == s.values.end()) continue;
      double v;
      try {
        v = transformed(t, it->second);
      } catch (const FoMError&) {
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++used;
    }
    if (used < 2) throw FoMError("metric " + t.metric + " has " + std::to_string(used) + " usable samples; need 2");
    if (!(hi > lo)) {
      double eps = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo));
      spdlog::warn("metric {} is constant at {} across samples; widening its norm by {}", t.metric, lo, eps);
      lo -= eps;
      hi += eps;
    }
    t.norm = Norm{lo, hi};
  }
  return cfg;
}

inline double term_value(const FoMTerm& t, double raw) {
  if (!t.norm) throw FoMError("term " + t.metric + " has no norm");
  double span = t.norm->hi - t.norm->lo;
  if (!(span > 0.0)) throw FoMError("term " + t.metric + " has an empty norm");
  double f = transformed(t, raw);
  switch (t.direction) {
    case Direction::Maximize: {
      if (t.bound) f = std::min(f, transformed(t, *t.bound));
      return t.weight * (f - t.norm->lo) / span;
    }
    case Direction::Minimize: {
      if (t.bound) f = std::max(f, transformed(t, *t.bound));
      return -t.weight * (f - t.norm->hi) / span;
    }
    case Direction::Target:
      return -t.weight * std::abs(f - transformed(t, t.target)) / span;
  }
  return 0.0;
}

inline double compute_fom(const MeasurementSet& m, const FoMConfig& cfg) {
  if (!m.ok) throw FoMError("measurement failed: " + m.reason);
  double total = 0.0;
  for (const auto& t : cfg.terms) {
    auto it = m.values.find(t.metric);
    if (it == m.values.end()) throw FoMError("metric " + t.metric + " missing");
    total += term_value(t, it->second);
  }
  return total;
}

inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::Maximize: return "maximize";
    case Direction::Minimize: return "minimize";
    case Direction::Target: return "target";
  }
  return "?";
}

inline json to_json(const FoMConfig& cfg) {
  json terms = json::array();
  for (const auto& t : cfg.terms) {
    json j = {{"metric", t.metric}, {"weight", t.weight}, {"direction", to_string(t.direction)}, {"log", t.log_scale}};
    if (t.bound) j["bound"] = *t.bound;
    if (t.direction == Direction::Target) j["target"] = t.target;
    if (t.norm) j["norm"] = {t.norm->lo, t.norm->hi};
    terms.push_back(j);
  }
  json cons = json::array();
  for (const auto& c : cfg.constraints)
    cons.push_back({{"metric", c.metric}, {"op", c.op}, {"value", c.value}, {"hard", c.hard}});
  return {{"terms", terms}, {"constraints", cons}};
}

inline FoMConfig fom_from_json(const json& j) {
  FoMConfig cfg;
  for (const auto& t : j.at("terms")) {
    FoMTerm term;
    term.metric = t.at("metric").get<std::string>();
    term.weight = t.value("weight", 1.0);
    if (!(term.weight >= 0.0)) throw SizingError("term " + term.metric + " has a negative weight");
    std::string dir = t.value("direction", "maximize");
    if (dir == "maximize") {
      term.direction = Direction::Maximize;
    } else if (dir == "minimize") {
      term.direction = Direction::Minimize;
    } else if (dir == "target") {
      term.direction = Direction::Target;
      term.target = t.at("target").get<double>();
    } else {
      throw SizingError("term " + term.metric + ": unknown direction '" + dir + "'");
    }
    if (t.contains("bound")) term.bound = t.at("bound").get<double>();
    term.log_scale = t.value("log", false);
    if (t.contains("norm")) {
      term.norm = Norm{t.at("norm").at(0).get<double>(), t.at("norm").at(1).get<double>()};
      if (!(term.norm->lo < term.norm->hi)) throw SizingError("term " + term.metric + " has norm lo >= hi");
    }
    cfg.terms.push_back(std::move(term));
  }
  for (const auto& c : j.value("constraints", json::array())) {
    Constraint con{c.at("metric").get<std::string>(), c.value("op", ">"), c.at("value").get<double>(),
                   c.value("hard", false)};
    if (con.op == "≥") con.op = ">=";
    if (con.op == "≤") con.op = "<=";
    holds(con, 0.0);
    cfg.constraints.push_back(std::move(con));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Acquisition

struct AcqConfig {
  /// Quasi-random candidates over the whole cube.
  std::size_t candidates = 512;
  /// Gaussian perturbations of the best observed inputs added to the pool.
  std::size_t local_candidates = 128;
  std::size_t local_anchors = 5;
  double local_sigma = 0.05;
  /// Refinement rounds around the best candidate, radius halving each round.
  int refine_rounds = 8;
  double refine_radius = 0.1;
};

namespace detail {

inline Eigen::VectorXd clamp_unit(Eigen::VectorXd x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace detail

/// Unit-cube point maximizing expected improvement over the best observed
/// target. Deterministic for a given rng state.
inline Eigen::VectorXd propose_next(const gp::Model& model, const AcqConfig& acq, std::mt19937_64& rng) {
  const Eigen::Index d = model.dim();
  const double best = model.y().maxCoeff();

  std::vector<Eigen::VectorXd> pool;
  ScrambledHalton halton(static_cast<std::size_t>(d), rng);
  for (std::size_t i = 1; i <= std::max<std::size_t>(acq.candidates, 1); ++i) pool.push_back(halton.point(i));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(model.n()));
  for (Eigen::Index i = 0; i < model.n(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return model.y()[a] > model.y()[b]; });
  std::size_t anchors = std::min(acq.local_anchors, order.size());
  if (anchors > 0)
    for (std::size_t k = 0; k < acq.local_candidates; ++k) {
      Eigen::VectorXd c = model.X().row(order[k % anchors]).transpose();
      for (Eigen::Index j = 0; j < d; ++j) c[j] += acq.local_sigma * standard_normal(rng);
      pool.push_back(detail::clamp_unit(c));
    }

  Eigen::MatrixXd P(static_cast<Eigen::Index>(pool.size()), d);
  for (std::size_t i = 0; i < pool.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = pool[i].transpose();
  Eigen::VectorXd ei = gp::expected_improvement_batch(model, P, best);
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < ei.size(); ++i)
    if (ei[i] > ei[arg]) arg = i;
  Eigen::VectorXd x = P.row(arg).transpose();
  double fx = ei[arg];

  const Eigen::Index trials = std::max<Eigen::Index>(8, 2 * d);
  double radius = acq.refine_radius;
  for (int r = 0; r < acq.refine_rounds; ++r, radius *= 0.5) {
    Eigen::MatrixXd T(trials, d);
    for (Eigen::Index t = 0; t < trials; ++t) {
      Eigen::VectorXd c = x;
      if (t < 2 * d && d <= 8) {
        c[t / 2] += (t % 2 == 0 ? radius : -radius);
      } else {
        for (Eigen::Index j = 0; j < d; ++j) c[j] += radius * standard_normal(rng);
      }
      T.row(t) = detail::clamp_unit(c).transpose();
    }
    Eigen::VectorXd v = gp::expected_improvement_batch(model, T, best);
    for (Eigen::Index t = 0; t < trials; ++t)
      if (v[t] > fx) {
        fx = v[t];
        x = T.row(t).transpose();
      }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Optimization loop

struct BOConfig {
  std::size_t n_init = 100;
  std::size_t n_iter = 400;
  std::size_t budget = 2000;
  std::uint64_t seed = 0;
  AcqConfig acq;
  /// FoM recorded for failed evaluations.
  double failure_fom = -100.0;
  /// Leave failed evaluations out of the GP fit.
  bool exclude_failed = true;
  /// Hard constraint violations count as failures.
  bool reject_hard_violations = false;
  /// Evaluator exceptions tolerated per point before giving up.
  int max_retries = 2;
  /// Re-estimate kernel hyperparameters every this many iterations.
  std::size_t hyper_every = 25;
  std::size_t hyper_subsample = 100;
  double noise = 1e-6;
  /// Estimate norms from the initial samples; otherwise the config must
  /// carry them.
  bool estimate_norms = true;
  /// Threads for the initial batch; the evaluator must then be reentrant.
  std::size_t init_workers = 1;
};

struct EvaluationRecord {
  std::size_t index = 0;
  std::vector<double> unit;
  std::vector<double> reduced;
  Assignment x;
  MeasurementSet measurements;
  double fom = 0.0;
  bool ok = false;
  double wall_ms = 0.0;
};

struct BOResult {
  std::vector<EvaluationRecord> records;
  std::vector<double> best_so_far;
  std::size_t best_index = 0;
  FoMConfig fom;
  std::size_t evaluations = 0;

  const EvaluationRecord& best() const { return records.at(best_index); }
};

using Evaluator = std::function<MeasurementSet(const Assignment&)>;

namespace detail {

inline std::vector<std::size_t> subsample(const std::vector<double>& y, std::size_t cap) {
  std::vector<std::size_t> idx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) idx[i] = i;
  if (y.size() <= cap) return idx;
  std::vector<std::size_t> by_value = idx;
  std::stable_sort(by_value.begin(), by_value.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  std::set<std::size_t> keep(by_value.begin(), by_value.begin() + static_cast<std::ptrdiff_t>(cap / 2));
  std::vector<std::size_t> rest;
  for (auto i : idx)
    if (!keep.count(i)) rest.push_back(i);
  std::size_t need = cap - keep.size();
  for (std::size_t k = 0; k < need; ++k) keep.insert(rest[k * rest.size() / need]);
  return {keep.begin(), keep.end()};
}

}  // namespace detail

/// Initial quasi-random design, norm estimation, then repeated
/// fit/propose/evaluate. `resume` supplies records from an earlier run with
/// the same configuration; they are reused instead of re-evaluated.
inline BOResult run_bo(const ParameterSpace& space, const Evaluator& evaluator, const FoMConfig& fom,
                       const BOConfig& cfg, const std::vector<EvaluationRecord>& resume = {}) {
  space.validate();
  if (cfg.n_init < 2) throw SizingError("n_init must be at least 2");
  if (cfg.n_init + cfg.n_iter > cfg.budget)
    throw SizingError("n_init + n_iter = " + std::to_string(cfg.n_init + cfg.n_iter) + " exceeds budget " +
                      std::to_string(cfg.budget));
  if (fom.terms.empty()) throw SizingError("figure of merit has no terms");
  if (!cfg.estimate_norms && !fom.has_norms()) throw SizingError("norms neither given nor estimated");
  const std::size_t d = space.dim();
  if (d == 0) throw SizingError("parameter space has no free parameters");

  BOResult res;
  res.fom = fom;

  auto evaluate_at = [&](const Eigen::VectorXd& u, std::size_t index) {
    EvaluationRecord r;
    r.index = index;
    r.reduced = space.decode(u);
    Eigen::VectorXd snapped = space.encode(r.reduced);
    r.unit.assign(snapped.data(), snapped.data() + snapped.size());
    if (index < resume.size()) {
      const auto& prev = resume[index];
      if (prev.unit != r.unit)
        throw SizingError("resume record " + std::to_string(index) + " does not match this configuration");
      r.x = prev.x;
      r.measurements = prev.measurements;
      r.wall_ms = prev.wall_ms;
      return r;
    }
    r.x = space.expand_tied(r.reduced);
    auto t0 = std::chrono::steady_clock::now();
    for (int attempt = 0;; ++attempt) {
      try {
        r.measurements = evaluator(r.x);
        break;
      } catch (const std::exception& e) {
        if (attempt >= cfg.max_retries)
          throw SizingError("evaluation " + std::to_string(index) + " failed " + std::to_string(attempt + 1) +
                            " times: " + e.what());
        spdlog::warn("evaluation {} raised ({}); retrying", index, e.what());
      }
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };
  auto score = [&](EvaluationRecord& r) {
    r.ok = false;
    r.fom = cfg.failure_fom;
    if (!r.measurements.ok) return;
    if (cfg.reject_hard_violations && !violations(r.measurements, res.fom, true).empty()) return;
    try {
      r.fom = compute_fom(r.measurements, res.fom);
      r.ok = true;
    } catch (const FoMError& e) {
      spdlog::debug("evaluation {} unscored: {}", r.index, e.what());
    }
  };

  // Initial design.
  {
    auto rng = stream_rng(cfg.seed, 0);
    ScrambledHalton halton(d, rng);
    std::vector<Eigen::VectorXd> pts;
    for (std::size_t i = 0; i < cfg.n_init; ++i) pts.push_back(halton.point(i + 1));
    res.records.resize(cfg.n_init);
    if (cfg.init_workers > 1) {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(cfg.init_workers);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < cfg.init_workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < cfg.n_init; i = next++) res.records[i] = evaluate_at(pts[i], i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    } else {
      for (std::size_t i = 0; i < cfg.n_init; ++i) res.records[i] = evaluate_at(pts[i], i);
    }
  }
  if (cfg.estimate_norms) {
    std::vector<MeasurementSet> ms;
    for (const auto& r : res.records) ms.push_back(r.measurements);
    res.fom = estimate_norms(ms, fom);
  }
  for (auto& r : res.records) score(r);

  auto training = [&](std::vector<std::size_t>* which) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < res.records.size(); ++i)
      if (res.records[i].ok || !cfg.exclude_failed) idx.push_back(i);
    if (which) *which = idx;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(d));
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& r = res.records[idx[k]];
      for (std::size_t j = 0; j < d; ++j) X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = r.unit[j];
      y[static_cast<Eigen::Index>(k)] = r.fom;
    }
    return std::make_pair(X, y);
  };
  auto seen = [&](const std::vector<double>& u) {
    return std::any_of(res.records.begin(), res.records.end(), [&](const EvaluationRecord& r) { return r.unit == u; });
  };

  double l0 = std::clamp(0.2 * std::sqrt(static_cast<double>(d)), 0.05, 2.0);
  gp::Hyper hyper = gp::Hyper::isotropic(d, l0, 1.0, cfg.noise);
  std::optional<gp::Model> model;
  auto refit = [&](bool optimize) {
    auto [X, y] = training(nullptr);
    if (X.rows() < 1) {
      model.reset();
      return;
    }
    if (optimize && X.rows() >= 2) {
      std::vector<double> yv(y.data(), y.data() + y.size());
      auto keep = detail::subsample(yv, cfg.hyper_subsample);
      Eigen::MatrixXd Xs(static_cast<Eigen::Index>(keep.size()), X.cols());
      Eigen::VectorXd ys(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) {
        Xs.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(keep[k]));
        ys[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(keep[k])];
      }
      hyper = gp::optimize_hyper(Xs, ys, hyper);
      hyper.noise = cfg.noise;
    }
    model = gp::Model::fit(X, y, hyper);
  };
  refit(true);

  for (std::size_t it = 0; it < cfg.n_iter; ++it) {
    const std::size_t index = cfg.n_init + it;
    auto rng = stream_rng(cfg.seed, it + 1);
    Eigen::VectorXd u;
    if (model) {
      u = propose_next(*model, cfg.acq, rng);
    } else {
      u = Eigen::VectorXd(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) u[static_cast<Eigen::Index>(j)] = uniform01(rng);
    }
    Eigen::VectorXd snapped = space.encode(space.decode(u));
    std::vector<double> key(snapped.data(), snapped.data() + snapped.size());
    while (seen(key)) {
      for (std::size_t j = 0; j < d; ++j) u[static_cast<Eigen::Index>(j)] = uniform01(rng);
      snapped = space.encode(space.decode(u));
      key.assign(snapped.data(), snapped.data() + snapped.size());
    }
    auto r = evaluate_at(u, index);
    score(r);
    res.records.push_back(r);
    bool usable = r.ok || !cfg.exclude_failed;
    if (it + 1 < cfg.n_iter) {
      if (cfg.hyper_every > 0 && (it + 1) % cfg.hyper_every == 0) {
        refit(true);
      } else if (usable) {
        if (model) {
          Eigen::VectorXd xu = Eigen::Map<const Eigen::VectorXd>(r.unit.data(), static_cast<Eigen::Index>(d));
          model = model->with_point(xu, r.fom);
        } else {
          refit(false);
        }
      }
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    if (res.records[i].fom > best) {
      best = res.records[i].fom;
      res.best_index = i;
    }
    res.best_so_far.push_back(best);
  }
  res.evaluations = res.records.size();
  return res;
}

// ---------------------------------------------------------------------------
// Output

/// Trajectory table: eval, fom, best, ok, then every metric seen (FoM
/// metrics first). Wall time is left out so reruns compare byte for byte.
inline std::string trajectory_csv(const BOResult& r) {
  std::vector<std::string> cols = r.fom.metrics();
  std::set<std::string> extra;
  for (const auto& rec : r.records)
    for (const auto& [k, v] : rec.measurements.values)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) extra.insert(k);
  cols.insert(cols.end(), extra.begin(), extra.end());
  std::ostringstream os;
  os << "eval,fom,best,ok";
  for (const auto& c : cols) os << "," << c;
  os << "\n";
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    os << rec.index << "," << str::shortest(rec.fom) << "," << str::shortest(r.best_so_far[i]) << ","
       << (rec.ok ? 1 : 0);
    for (const auto& c : cols) {
      os << ",";
      auto it = rec.measurements.values.find(c);
      if (it != rec.measurements.values.end()) os << str::shortest(it->second);
    }
    os << "\n";
  }
  return os.str();
}

inline json to_json(const EvaluationRecord& r) {
  json m = {{"ok", r.measurements.ok}, {"values", r.measurements.values}};
  if (!r.measurements.reason.empty()) m["reason"] = r.measurements.reason;
  if (!r.measurements.units.empty()) m["units"] = r.measurements.units;
  return {{"index", r.index}, {"unit", r.unit},   {"reduced", r.reduced}, {"x", r.x},
          {"measurements", m}, {"fom", r.fom},    {"ok", r.ok},           {"wall_ms", r.wall_ms}};
}

inline EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.unit = j.at("unit").get<std::vector<double>>();
  r.reduced = j.at("reduced").get<std::vector<double>>();
  r.x = j.at("x").get<Assignment>();
  const auto& m = j.at("measurements");
  r.measurements.ok = m.at("ok").get<bool>();
  r.measurements.values = m.at("values").get<std::map<std::string, double>>();
  r.measurements.reason = m.value("reason", "");
  if (m.contains("units")) r.measurements.units = m.at("units").get<std::map<std::string, std::string>>();
  r.fom = j.at("fom").get<double>();
  r.ok = j.at("ok").get<bool>();
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

/// Run state for resuming: configuration echo plus every record so far.
inline json snapshot(const BOResult& r, const ParameterSpace& space, const BOConfig& cfg) {
  json recs = json::array();
  for (const auto& rec : r.records) recs.push_back(to_json(rec));
  return {{"version", 1},
          {"seed", cfg.seed},
          {"n_init", cfg.n_init},
          {"n_iter", cfg.n_iter},
          {"space", to_json(space)},
          {"fom", to_json(r.fom)},
          {"best_index", r.best_index},
          {"records", recs}};
}

inline std::vector<EvaluationRecord> records_from_snapshot(const json& j) {
  if (j.value("version", 0) != 1) throw SizingError("unsupported snapshot version");
  std::vector<EvaluationRecord> out;
  for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
  return out;
}

inline BOConfig bo_config_from_json(const json& j, BOConfig c = {}) {
  c.n_init = j.value("n_init", c.n_init);
  c.n_iter = j.value("n_iter", c.n_iter);
  c.budget = j.value("budget", c.budget);
  c.seed = j.value("seed", c.seed);
  c.failure_fom = j.value("failure_fom", c.failure_fom);
  c.exclude_failed = j.value("exclude_failed", c.exclude_failed);
  c.reject_hard_violations = j.value("reject_hard_violations", c.reject_hard_violations);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.hyper_every = j.value("hyper_every", c.hyper_every);
  c.hyper_subsample = j.value("hyper_subsample", c.hyper_subsample);
  c.noise = j.value("noise", c.noise);
  c.estimate_norms = j.value("estimate_norms", c.estimate_norms);
  c.init_workers = j.value("init_workers", c.init_workers);
  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    c.acq.candidates = a.value("candidates", c.acq.candidates);
    c.acq.local_candidates = a.value("local_candidates", c.acq.local_candidates);
    c.acq.local_anchors = a.value("local_anchors", c.acq.local_anchors);
    c.acq.local_sigma = a.value("local_sigma", c.acq.local_sigma);
    c.acq.refine_rounds = a.value("refine_rounds", c.acq.refine_rounds);
    c.acq.refine_radius = a.value("refine_radius", c.acq.refine_radius);
  }
  return c;
}

}  // namespace amskit::sizing
