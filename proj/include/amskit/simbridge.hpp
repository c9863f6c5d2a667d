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

// Evaluation backends. An external backend writes the rendered deck into a
// fresh directory, runs a command template on it and scrapes the log; a
// synthetic backend calls one of the analytic models in surrogate.hpp.
//
//   auto backend = simbridge::Backend(simbridge::backend_from_json(cfg));
//   MeasurementSet m = backend.evaluate(deck, assignment);
//
// Anything the simulator does wrong comes back as a failed MeasurementSet.
// Only caller errors (a bad config, an incomplete assignment) throw.

#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "amskit/common.hpp"
#include "amskit/deck.hpp"
#include "amskit/measure.hpp"
#include "amskit/netlist.hpp"
#include "amskit/surrogate.hpp"

namespace amskit::simbridge {

using nlohmann::json;
using deck::DeckError;
using deck::SimulationDeck;

class SimError : public Error {
 public:
  using Error::Error;
};

/// How to pull one metric out of simulator output. `pattern` is an ECMAScript
/// regex with one capture group holding the number; SPICE suffixes (k, u, meg
/// ...) are understood. `scale` multiplies the parsed value.
struct ParseRule {
  std::string metric;
  std::string pattern;
  std::string unit;
  double scale = 1.0;
};

/// `metric = value` or `metric: value`, case-insensitive, at a word boundary.
inline ParseRule default_rule(const std::string& metric, const std::string& unit = {}) {
  std::string escaped;
  for (char c : metric) {
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) escaped += '\\';
    escaped += c;
  }
  return {metric,
          "(?:^|[^A-Za-z0-9_])" + escaped +
              "\\s*[=:]\\s*([-+]?(?:[0-9]+\\.?[0-9]*|\\.[0-9]+)(?:[eE][-+]?[0-9]+)?[A-Za-z]*)",
          unit, 1.0};
}

/// Number with an optional SPICE suffix; trailing unit letters are dropped
/// one at a time until the rest parses ("1.5mV" is 1.5e-3, "66.21dB" 66.21).
inline std::optional<double> parse_number(std::string text) {
  for (;;) {
    if (auto v = netlist::parse_value(text); v && std::isfinite(*v)) return v;
    if (text.empty() || !std::isalpha(static_cast<unsigned char>(text.back()))) return std::nullopt;
    text.pop_back();
  }
}

/// All or nothing: any metric without a match fails the whole set with the
/// missing names listed. When a metric matches more than once, the last
/// match wins and a warning is recorded.
inline MeasurementSet parse_measures(std::string_view raw, const std::vector<ParseRule>& rules) {
  MeasurementSet out;
  std::vector<std::string> missing;
  std::vector<std::string> lines = str::split(raw, '\n');
  for (const auto& rule : rules) {
    std::regex re;
    try {
      re = std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw SimError("parse rule for " + rule.metric + " has a bad pattern: " + e.what());
    }
    std::optional<double> found;
    int hits = 0;
    std::string bad;
    for (const auto& line : lines) {
      for (auto it = std::sregex_iterator(line.begin(), line.end(), re); it != std::sregex_iterator(); ++it) {
        if (it->size() < 2) continue;
        std::string text = (*it)[1].str();
        auto v = parse_number(text);
        if (!v) {
          bad = text;
          continue;
        }
        found = *v * rule.scale;
        ++hits;
      }
    }
    if (!found) {
      missing.push_back(rule.metric);
      if (!bad.empty()) out.warnings.push_back(rule.metric + ": unreadable value '" + bad + "'");
      continue;
    }
    if (hits > 1)
      out.warnings.push_back(rule.metric + " reported " + std::to_string(hits) + " times; using the last");
    out.values[rule.metric] = *found;
    if (!rule.unit.empty()) out.units[rule.metric] = rule.unit;
  }
  if (!missing.empty()) {
    auto failed = MeasurementSet::failed("missing: [" + str::join(missing, ", ") + "]");
    failed.values = std::move(out.values);
    failed.units = std::move(out.units);
    failed.warnings = std::move(out.warnings);
    return failed;
  }
  return out;
}

/// Rules for every declared measure: the configured rule where one exists,
/// the default pattern otherwise.
inline std::vector<ParseRule> rules_for(const SimulationDeck& deck, const std::vector<ParseRule>& configured) {
  std::vector<ParseRule> out;
  for (const auto& m : deck.measures) {
    auto it = std::find_if(configured.begin(), configured.end(),
                           [&](const ParseRule& r) { return r.metric == m.name; });
    if (it != configured.end()) {
      ParseRule r = *it;
      if (r.unit.empty()) r.unit = m.unit;
      out.push_back(r);
    } else {
      out.push_back(default_rule(m.name, m.unit));
    }
  }
  return out;
}

enum class BackendKind { External, Synthetic };

struct BackendConfig {
  BackendKind kind = BackendKind::Synthetic;
  /// argv template; {deck} and {outdir} are replaced per run.
  std::vector<std::string> command;
  std::string workdir;
  double timeout_s = 60.0;
  std::vector<ParseRule> rules;
  /// Extra whitespace-separated arguments appended from this variable.
  std::string flags_env = "AMSKIT_SIM_FLAGS";
  /// Files in the run directory scraped after the log, e.g. "deck.mt0".
  std::vector<std::string> output_files;
  int max_procs = 4;
  bool keep_runs = false;
  std::string model;
  json params = json::object();

  void validate() const {
    if (kind == BackendKind::External) {
      if (command.empty()) throw SimError("external backend needs a command");
      if (!(timeout_s > 0.0)) throw SimError("external backend timeout must be positive");
      if (max_procs < 1) throw SimError("max_procs must be at least 1");
    } else {
      static const std::set<std::string> known = {"sphere", "rosenbrock", "surrogate_opamp",
                                                  "surrogate_comparator"};
      if (!known.count(model)) throw SimError("unknown synthetic model '" + model + "'");
    }
  }
};

inline BackendConfig backend_from_json(const json& j) {
  BackendConfig c;
  std::string kind = j.value("kind", "synthetic");
  if (kind == "external") c.kind = BackendKind::External;
  else if (kind == "synthetic") c.kind = BackendKind::Synthetic;
  else throw SimError("backend kind must be external or synthetic, got " + kind);
  if (j.contains("command")) {
    if (j["command"].is_string()) c.command = str::split_ws(j["command"].get<std::string>());
    else c.command = j["command"].get<std::vector<std::string>>();
  }
  c.workdir = j.value("workdir", "");
  c.timeout_s = j.value("timeout_s", 60.0);
  c.flags_env = j.value("flags_env", c.flags_env);
  c.max_procs = j.value("max_procs", 4);
  c.keep_runs = j.value("keep_runs", false);
  if (j.contains("output_files")) c.output_files = j["output_files"].get<std::vector<std::string>>();
  for (const auto& r : j.value("rules", json::array())) {
    ParseRule pr = r.contains("pattern") ? ParseRule{r.at("metric").get<std::string>(), r["pattern"].get<std::string>(),
                                                     r.value("unit", ""), 1.0}
                                         : default_rule(r.at("metric").get<std::string>(), r.value("unit", ""));
    pr.scale = r.value("scale", 1.0);
    c.rules.push_back(pr);
  }
  c.model = j.value("model", "");
  c.params = j.value("params", json::object());
  c.validate();
  return c;
}

inline json to_json(const BackendConfig& c) {
  json j;
  j["kind"] = c.kind == BackendKind::External ? "external" : "synthetic";
  if (c.kind == BackendKind::External) {
    j["command"] = c.command;
    j["workdir"] = c.workdir;
    j["timeout_s"] = c.timeout_s;
    j["flags_env"] = c.flags_env;
    j["max_procs"] = c.max_procs;
    j["keep_runs"] = c.keep_runs;
    j["output_files"] = c.output_files;
    j["rules"] = json::array();
    for (const auto& r : c.rules)
      j["rules"].push_back({{"metric", r.metric}, {"pattern", r.pattern}, {"unit", r.unit}, {"scale", r.scale}});
  } else {
    j["model"] = c.model;
    j["params"] = c.params;
  }
  return j;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
  return s;
}

/// Counting gate for concurrent simulator processes.
class ProcessGate {
 public:
  explicit ProcessGate(int cap) : cap_(cap) {}
  void acquire() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return active_ < cap_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lk(mu_);
      --active_;
    }
    cv_.notify_one();
  }
  int active() const {
    std::lock_guard lk(mu_);
    return active_;
  }

 private:
  int cap_;
  int active_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

struct RunResult {
  bool started = false;
  bool timed_out = false;
  int exit_status = -1;
  int signal = 0;
  std::string error;
};

/// fork/exec with stdout and stderr sent to `log`, in its own process group
/// so a timeout takes down any children too.
inline RunResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                             const std::filesystem::path& log, double timeout_s) {
  RunResult r;
  int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    r.error = "cannot open log " + log.string();
    return r;
  }
  int errpipe[2];
  if (::pipe2(errpipe, O_CLOEXEC) != 0) {
    ::close(fd);
    r.error = "pipe failed";
    return r;
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fd);
    ::close(errpipe[0]);
    ::close(errpipe[1]);
    r.error = "fork failed";
    return r;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, 0);
    ::dup2(fd, 1);
    ::dup2(fd, 2);
    if (::chdir(cwd.c_str()) != 0) {
      int e = errno;
      [[maybe_unused]] auto n = ::write(errpipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execvp(args[0], args.data());
    int e = errno;
    [[maybe_unused]] auto n = ::write(errpipe[1], &e, sizeof e);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fd);
  ::close(errpipe[1]);
  int child_errno = 0;
  ssize_t got = ::read(errpipe[0], &child_errno, sizeof child_errno);
  ::close(errpipe[0]);
  if (got == static_cast<ssize_t>(sizeof child_errno)) {
    ::waitpid(pid, nullptr, 0);
    r.error = "cannot start " + argv[0] + ": " + std::strerror(child_errno);
    return r;
  }
  r.started = true;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  auto pause = std::chrono::microseconds(200);
  for (;;) {
    pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) {
      r.error = "waitpid failed";
      return r;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      r.timed_out = true;
      return r;
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::microseconds(20000));
  }
  if (WIFEXITED(status)) r.exit_status = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) r.signal = WTERMSIG(status);
  return r;
}

}  // namespace detail

/// Keeps only the declared measures of a model's outputs; with no
/// declarations everything is returned.
inline MeasurementSet select_declared(const std::map<std::string, double>& outputs, const SimulationDeck& deck) {
  MeasurementSet m;
  if (deck.measures.empty()) {
    m.values = outputs;
    return m;
  }
  std::vector<std::string> missing;
  for (const auto& d : deck.measures) {
    auto it = outputs.find(d.name);
    if (it == outputs.end()) {
      missing.push_back(d.name);
      continue;
    }
    if (!std::isfinite(it->second)) {
      return MeasurementSet::failed(d.name + " is not finite");
    }
    m.values[d.name] = it->second;
    if (!d.unit.empty()) m.units[d.name] = d.unit;
  }
  if (!missing.empty()) return MeasurementSet::failed("missing: [" + str::join(missing, ", ") + "]");
  return m;
}

class Backend {
 public:
  explicit Backend(BackendConfig cfg) : cfg_(std::move(cfg)), gate_(std::make_shared<detail::ProcessGate>(1)) {
    cfg_.validate();
    gate_ = std::make_shared<detail::ProcessGate>(cfg_.max_procs);
  }

  const BackendConfig& config() const { return cfg_; }

  /// Number of simulator processes running right now.
  int active_processes() const { return gate_->active(); }

  /// Throws DeckError if the assignment does not cover the slots exactly;
  /// every other problem is reported in the returned set.
  MeasurementSet evaluate(const SimulationDeck& deck, const Assignment& assignment) const {
    SimulationDeck sized = deck.substituted(assignment);
    if (cfg_.kind == BackendKind::Synthetic) return synthetic(sized, assignment);
    return external(sized);
  }

 private:
  MeasurementSet synthetic(const SimulationDeck& sized, const Assignment& assignment) const {
    try {
      const std::string& m = cfg_.model;
      if (m == "sphere" || m == "rosenbrock") {
        double v;
        if (m == "sphere") {
          std::map<std::string, double> center;
          if (cfg_.params.contains("center")) {
            const auto& c = cfg_.params["center"];
            if (c.is_number())
              for (const auto& [k, x] : assignment) center[k] = c.get<double>();
            else
              center = c.get<std::map<std::string, double>>();
          }
          v = surrogate::sphere(assignment, center);
        } else {
          v = surrogate::rosenbrock(assignment, cfg_.params.value("shift", 0.0));
        }
        std::string name = sized.measures.empty() ? cfg_.params.value("metric", std::string("f"))
                                                  : sized.measures.front().name;
        MeasurementSet out;
        out.values[name] = v;
        return out;
      }
      const auto& dut = sized.dut();
      auto outputs = m == "surrogate_opamp" ? surrogate::opamp(dut, sized.matched)
                                            : surrogate::comparator(dut, sized.matched);
      return select_declared(outputs, sized);
    } catch (const std::exception& e) {
      return MeasurementSet::failed(std::string("synthetic model failed: ") + e.what());
    }
  }

  MeasurementSet external(const SimulationDeck& sized) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::path base = cfg_.workdir.empty() ? fs::temp_directory_path(ec) : fs::path(cfg_.workdir);
    fs::create_directories(base, ec);
    std::string tmpl = (base / "run-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) return MeasurementSet::failed("cannot create run directory under " + base.string());
    fs::path dir(buf.data());
    fs::path deck_path = dir / "deck.sp";
    {
      std::ofstream out(deck_path, std::ios::binary);
      out << sized.text();
      if (!out) return MeasurementSet::failed("cannot write " + deck_path.string());
    }
    std::vector<std::string> argv;
    for (const auto& a : cfg_.command)
      argv.push_back(detail::replace_all(detail::replace_all(a, "{deck}", deck_path.string()), "{outdir}",
                                         dir.string()));
    if (!cfg_.flags_env.empty())
      if (const char* extra = std::getenv(cfg_.flags_env.c_str()))
        for (auto& t : str::split_ws(extra)) argv.push_back(t);

    fs::path log = dir / "sim.log";
    gate_->acquire();
    detail::RunResult run;
    try {
      run = detail::run_process(argv, dir, log, cfg_.timeout_s);
    } catch (...) {
      gate_->release();
      throw;
    }
    gate_->release();

    MeasurementSet result;
    if (!run.started) {
      result = MeasurementSet::failed(run.error);
    } else if (run.timed_out) {
      result = MeasurementSet::failed("timeout after " + str::shortest(cfg_.timeout_s) + " s");
    } else if (run.signal != 0) {
      result = MeasurementSet::failed("simulator killed by signal " + std::to_string(run.signal));
    } else if (run.exit_status != 0) {
      result = MeasurementSet::failed("simulator exited with status " + std::to_string(run.exit_status));
    } else {
      std::string raw = detail::read_file(log);
      for (const auto& f : cfg_.output_files) {
        raw += "\n";
        raw += detail::read_file(dir / f);
      }
      result = parse_measures(raw, rules_for(sized, cfg_.rules));
    }
    if (!result.ok) result.warnings.push_back("run directory " + dir.string());
    if (cfg_.keep_runs || !result.ok) {
      spdlog::debug("simulator run kept in {}", dir.string());
    } else {
      fs::remove_all(dir, ec);
    }
    return result;
  }

  BackendConfig cfg_;
  std::shared_ptr<detail::ProcessGate> gate_;
};

/// One-shot form of Backend::evaluate.
inline MeasurementSet evaluate(const SimulationDeck& deck, const Assignment& assignment, const Backend& backend) {
  return backend.evaluate(deck, assignment);
}

}  // namespace amskit::simbridge
