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

// Analytic stand-ins for a circuit simulator. They are smooth functions of
// device sizes with the qualitative couplings of the real circuits (longer
// devices raise gain and slow things down, mismatch inside a matched group
// costs rejection and offset) and nothing more. Sizes are first mapped to
// [0, 1] on a log scale over the default sizing ranges.
//
// OPAMP, with N the MOS count and u the normalized sizes:
//
//   q_i   = sqrt(uL_i) * (0.8 + 0.2 uW_i)
//   gain  = 20 + 6.5 N mean(q) - 3 uI                          [dB]
//   m     = mean relative W/L deviation inside matched groups
//   CMRR  = 35 + 0.7 gain - 20 lg(1 + 100 m)                   [dB]
//   PSRR  = 30 + 0.7 gain - 10 lg(1 + 100 m)                   [dB]
//   lg GBW = 6.5 + 1.2 (mean uW - mean uL) + 0.8 uI + 0.5 (1 - uC) - 0.3 uR
//   PM    = 35 + 30 uC + 20 uR + 10 (1 - uI) - 5 (mean uW - mean uL)   [deg]
//
// Comparator:
//
//   lg offset = -5 + 1.5 (1 - (mean uW + mean uL) / 2) + lg(1 + 50 m)   [V]
//   lg delay  = -11.2 + 2.6 mean uL + 0.8 (1 - mean uW)                 [s]
//   lg power  = -5.2 + 1.8 mean uW - 0.8 mean uL                        [W]

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "amskit/common.hpp"
#include "amskit/netlist.hpp"

namespace amskit::surrogate {

struct LogRange {
  double lower;
  double upper;
  double unit(double v) const {
    if (!(v > 0.0)) return 0.0;
    return std::clamp((std::log(v) - std::log(lower)) / (std::log(upper) - std::log(lower)), 0.0, 1.0);
  }
};

inline constexpr LogRange kW{100e-9, 3e-6};
inline constexpr LogRange kL{30e-9, 1e-6};
inline constexpr LogRange kI{1e-6, 100e-6};
inline constexpr LogRange kR{100, 100e3};
inline constexpr LogRange kC{10e-15, 10e-12};

/// Normalized view of a sized netlist.
struct Features {
  std::size_t mos = 0;
  std::vector<double> uW;
  std::vector<double> uL;
  double uI = 0.5;
  double uR = 0.5;
  double uC = 0.5;
  double mismatch = 0.0;

  double mean_uW() const { return mean(uW); }
  double mean_uL() const { return mean(uL); }

  static double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.5;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
};

inline double param_or(const netlist::Component& c, const std::string& key, double fallback) {
  auto it = c.params.find(key);
  return it == c.params.end() ? fallback : it->second;
}

/// Mean relative deviation of W and L from the group leader, over all
/// followers of all groups. Ungrouped or unknown names are ignored.
inline double mismatch(const netlist::Netlist& n, const std::vector<std::vector<std::string>>& groups) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    const auto* lead = n.find(g[0]);
    if (!lead || !netlist::is_mos(lead->kind)) continue;
    double w0 = param_or(*lead, "W", 1e-6);
    double l0 = param_or(*lead, "L", 1e-7);
    for (std::size_t i = 1; i < g.size(); ++i) {
      const auto* c = n.find(g[i]);
      if (!c || !netlist::is_mos(c->kind)) continue;
      total += std::abs(param_or(*c, "W", 1e-6) / w0 - 1.0) + std::abs(param_or(*c, "L", 1e-7) / l0 - 1.0);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

inline Features features(const netlist::Netlist& n, const std::vector<std::vector<std::string>>& groups) {
  Features f;
  std::vector<double> ui, ur, uc;
  for (const auto& c : n.components) {
    switch (c.kind) {
      case netlist::DeviceKind::NMOS:
      case netlist::DeviceKind::PMOS:
        ++f.mos;
        f.uW.push_back(kW.unit(param_or(c, "W", 1e-6)));
        f.uL.push_back(kL.unit(param_or(c, "L", 1e-7)));
        break;
      case netlist::DeviceKind::CurrentSource: ui.push_back(kI.unit(param_or(c, "I", 1e-5))); break;
      case netlist::DeviceKind::Resistor: ur.push_back(kR.unit(param_or(c, "R", 1e3))); break;
      case netlist::DeviceKind::Capacitor: uc.push_back(kC.unit(param_or(c, "C", 1e-12))); break;
      default: break;
    }
  }
  f.uI = Features::mean(ui);
  f.uR = Features::mean(ur);
  f.uC = Features::mean(uc);
  f.mismatch = mismatch(n, groups);
  return f;
}

/// dm_gain, cm_gain, ps_gain (so that CMRR = dm - cm, PSRR = dm - ps), gbw,
/// phase_margin.
inline std::map<std::string, double> opamp(const netlist::Netlist& n,
                                           const std::vector<std::vector<std::string>>& groups) {
  auto f = features(n, groups);
  double q = 0.0;
  for (std::size_t i = 0; i < f.mos; ++i) q += std::sqrt(f.uL[i]) * (0.8 + 0.2 * f.uW[i]);
  q = f.mos ? q / static_cast<double>(f.mos) : 0.0;
  double gain = 20.0 + 6.5 * static_cast<double>(f.mos) * q - 3.0 * f.uI;
  double cmrr = 35.0 + 0.7 * gain - 20.0 * std::log10(1.0 + 100.0 * f.mismatch);
  double psrr = 30.0 + 0.7 * gain - 10.0 * std::log10(1.0 + 100.0 * f.mismatch);
  double spread = f.mean_uW() - f.mean_uL();
  double lg_gbw = 6.5 + 1.2 * spread + 0.8 * f.uI + 0.5 * (1.0 - f.uC) - 0.3 * f.uR;
  double pm = 35.0 + 30.0 * f.uC + 20.0 * f.uR + 10.0 * (1.0 - f.uI) - 5.0 * spread;
  return {{"dm_gain", gain},
          {"cm_gain", gain - cmrr},
          {"ps_gain", gain - psrr},
          {"cmrr", cmrr},
          {"psrr", psrr},
          {"gbw", std::pow(10.0, lg_gbw)},
          {"phase_margin", pm}};
}

/// offset_voltage, propagation_delay, power.
inline std::map<std::string, double> comparator(const netlist::Netlist& n,
                                                const std::vector<std::vector<std::string>>& groups) {
  auto f = features(n, groups);
  double w = f.mean_uW(), l = f.mean_uL();
  double lg_ov = -5.0 + 1.5 * (1.0 - 0.5 * (w + l)) + std::log10(1.0 + 50.0 * f.mismatch);
  double lg_pd = -11.2 + 2.6 * l + 0.8 * (1.0 - w);
  double lg_p = -5.2 + 1.8 * w - 0.8 * l;
  return {{"offset_voltage", std::pow(10.0, lg_ov)},
          {"propagation_delay", std::pow(10.0, lg_pd)},
          {"power", std::pow(10.0, lg_p)}};
}

/// Sum of squared distances from `center` (default 0.5 per coordinate),
/// over the assignment in key order.
inline double sphere(const std::map<std::string, double>& x, const std::map<std::string, double>& center = {}) {
  double s = 0.0;
  for (const auto& [k, v] : x) {
    auto it = center.find(k);
    double c = it == center.end() ? 0.5 : it->second;
    s += (v - c) * (v - c);
  }
  return s;
}

/// Shifted Rosenbrock over the assignment in key order; minimum 0 where
/// every coordinate equals 1 + shift.
inline double rosenbrock(const std::map<std::string, double>& x, double shift = 0.0) {
  std::vector<double> v;
  for (const auto& [k, val] : x) v.push_back(val - shift);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    s += 100.0 * (v[i + 1] - v[i] * v[i]) * (v[i + 1] - v[i] * v[i]) + (1.0 - v[i]) * (1.0 - v[i]);
  return s;
}

}  // namespace amskit::surrogate
