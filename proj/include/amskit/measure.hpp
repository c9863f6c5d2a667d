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

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace amskit {

/// Result of one evaluation. When ok, every declared metric is present and
/// finite; otherwise `reason` says why and `values` may be partial.
struct MeasurementSet {
  std::map<std::string, double> values;
  std::map<std::string, std::string> units;
  bool ok = true;
  std::string reason;
  std::vector<std::string> warnings;

  static MeasurementSet failed(std::string why) {
    MeasurementSet m;
    m.ok = false;
    m.reason = std::move(why);
    return m;
  }

  bool has(const std::string& metric) const { return values.count(metric) != 0; }
  double at(const std::string& metric) const { return values.at(metric); }

  bool operator==(const MeasurementSet&) const = default;
};

/// A full parameter assignment keyed by parameter path.
using Assignment = std::map<std::string, double>;

}  // namespace amskit
