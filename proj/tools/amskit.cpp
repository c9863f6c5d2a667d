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

// amskit: trace, kg, assemble, size and design subcommands.
//
// Exit status: 0 success, 1 usage or internal error, 2 trace exceptions,
// 3 spec not met.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

#include "amskit/cli.hpp"

using namespace amskit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "runs";
  bool out_given = false;
  bool verbose = false;
  std::string run_id;
};

json load_section(const std::string& path) { return cli::read_json(path); }

int cmd_trace(const Globals& g, const std::string& image, const std::string& boxes, bool allow, int threshold) {
  auto dir = cli::make_run_dir(g.out, g.run_id);
  trace::TraceConfig cfg;
  cfg.threshold = threshold;
  auto res = cli::run_trace(image, boxes, dir, allow, cfg);
  std::cout << "netlist: " << (dir / "netlist.sp").string() << "\n"
            << "components: " << res.netlist.components.size() << "  nets: " << res.result.nets.size()
            << "  junctions: " << res.result.junctions.size() << "\n";
  for (const auto& e : res.result.exceptions) {
    std::cout << "exception: " << e.reason;
    if (!e.boxes.empty()) std::cout << " [" << str::join(e.boxes, ", ") << "]";
    std::cout << "\n";
  }
  return res.exit_code;
}

int cmd_kg_build(const std::string& src, const std::string& store_dir) {
  auto s = kg::build_from_directory(src);
  s.save(store_dir);
  std::cout << "entities: " << s.size() << "  triplets: " << s.triplet_count() << "  nodes: " << s.node_count()
            << "\n";
  return cli::kOk;
}

int cmd_kg_query(const std::string& store_dir, const std::vector<std::string>& patterns,
                 const std::vector<std::string>& metrics) {
  auto s = cli::load_kg(store_dir);
  if (patterns.empty() && metrics.empty()) throw cli::UsageError("kg query needs --triplet or --metric");
  if (!patterns.empty()) {
    std::vector<kg::Triplet> ts;
    for (const auto& p : patterns) ts.push_back(cli::parse_pattern(p));
    std::cout << cli::format_matches(s.query(ts));
  }
  if (!metrics.empty()) {
    auto sel = s.get_testbenches(metrics);
    for (const auto& tb : sel.testbenches) std::cout << "testbench\t" << tb->id << "\n";
    for (const auto& m : sel.missing) std::cout << "missing\t" << m << "\n";
  }
  return cli::kOk;
}

int cmd_kg_export(const std::string& store_dir, const std::string& out) {
  auto s = cli::load_kg(store_dir);
  auto text = s.export_cypher();
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
  }
  return cli::kOk;
}

int cmd_assemble(const Globals& g, const std::string& kg_dir, const std::string& rules,
                 const std::vector<std::string>& parts, const std::vector<std::string>& tbs, bool support) {
  auto store = cli::load_kg(kg_dir);
  auto wiring = assembly::load_rules(rules);
  assembly::ConnectionPlan plan;
  auto circuit = cli::run_assemble(store, wiring, parts, support, nullptr, &plan);
  auto dir = cli::make_run_dir(g.out, g.run_id);
  write_file((dir / "netlist.sp").string(), netlist::emit_netlist(circuit.netlist));
  cli::write_json(dir / "plan.json", assembly::to_json(plan));
  for (const auto& id : tbs) {
    auto tb = store.get(id);
    if (!tb) throw cli::UsageError("no testbench " + id);
    write_file((dir / (id + ".sp")).string(), assembly::attach_testbench(circuit, *tb).text());
  }
  std::cout << "netlist: " << (dir / "netlist.sp").string() << "\n"
            << "components: " << circuit.netlist.components.size() << "  ports: " << str::join(circuit.ports(), " ")
            << "\n";
  return cli::kOk;
}

int cmd_size(const Globals& g, const std::string& deck_path, const std::string& fom, const std::string& backend,
             const std::string& bo, const std::string& space_path, const std::string& ranges, bool no_ties,
             std::optional<std::size_t> n_init, std::optional<std::size_t> n_iter, const std::string& resume) {
  if (!fs::exists(deck_path)) throw cli::UsageError("deck not found: " + deck_path);
  auto d = deck::parse_deck(read_file(deck_path));
  auto fom_cfg = sizing::fom_from_json(load_section(fom));
  simbridge::Backend be(simbridge::backend_from_json(load_section(backend)));
  auto cfg = bo.empty() ? sizing::BOConfig{} : sizing::bo_config_from_json(load_section(bo));
  if (g.seed) cfg.seed = *g.seed;
  if (n_init) cfg.n_init = *n_init;
  if (n_iter) cfg.n_iter = *n_iter;
  sizing::ParameterSpace space;
  if (!space_path.empty()) {
    space = sizing::space_from_json(load_section(space_path));
  } else {
    auto r = sizing::default_ranges();
    if (!ranges.empty())
      for (auto& [k, v] : sizing::ranges_from_json(load_section(ranges))) r[k] = v;
    space = cli::space_for_deck(d, !no_ties, r);
  }
  std::vector<sizing::EvaluationRecord> prior;
  if (!resume.empty()) prior = sizing::records_from_snapshot(load_section(resume));
  auto dir = cli::make_run_dir(g.out, g.run_id);
  auto out = cli::run_size(d, space, fom_cfg, be, cfg, dir, prior);
  const auto& best = out.result.best();
  std::cout << "run: " << dir.string() << "\n"
            << "parameters: " << space.size() << "  free: " << space.dim()
            << "  evaluations: " << out.result.evaluations << "\n"
            << "best fom: " << str::shortest(best.fom) << " at evaluation " << best.index << "\n";
  for (const auto& [k, v] : best.measurements.values) std::cout << "  " << k << " = " << str::general(v, 6) << "\n";
  return cli::kOk;
}

int cmd_design(const Globals& g, std::string manifest_path, std::optional<std::size_t> attempts) {
  if (manifest_path.empty()) manifest_path = g.config;
  if (manifest_path.empty()) throw cli::UsageError("design needs a manifest (positional or --config)");
  auto m = cli::load_manifest(manifest_path);
  if (g.seed) m.bo.seed = *g.seed;
  if (g.out_given) m.output = g.out;
  if (attempts) {
    if (*attempts < 1) throw cli::UsageError("--max-attempts must be at least 1");
    m.max_attempts = *attempts;
  }
  auto dir = cli::make_run_dir(m.output, g.run_id);
  auto report = cli::run_design(m, dir);
  std::cout << "run: " << dir.string() << "\n";
  for (const auto& a : report.attempts) {
    std::cout << "attempt " << a.index << ": " << a.topology << "  params " << a.params << " -> " << a.free_params
              << "  fom " << str::fixed(a.fom, 4) << "  " << (a.met ? "met" : "not met") << "\n";
    for (const auto& v : a.violations) std::cout << "  " << v << "\n";
  }
  std::cout << "status: " << report.status;
  if (!report.reason.empty()) std::cout << " (" << report.reason << ")";
  std::cout << "\n";
  if (report.final_attempt) std::cout << "final netlist: " << (dir / "final.sp").string() << "\n";
  return report.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("amskit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"amskit: from performance specs to sized netlists"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed for sizing")->capture_default_str();
  app.add_option("--config", g.config, "Run manifest (design)");
  auto* out_opt = app.add_option("--out", g.out, "Directory for run directories")->capture_default_str();
  app.add_flag("--verbose,-v", g.verbose, "Debug logging");
  app.add_option("--run-id", g.run_id, "Name of the run directory (default: UTC timestamp)");

  // trace
  auto* trace = app.add_subcommand("trace", "Trace a netlist from a schematic raster and its labeled boxes");
  std::string image, boxes;
  bool allow = false;
  int threshold = 128;
  trace->add_option("image", image, "Grayscale PGM image")->required();
  trace->add_option("boxes", boxes, "Labeled box file")->required();
  trace->add_flag("--allow-exceptions", allow, "Exit 0 even when the report lists exceptions");
  trace->add_option("--threshold", threshold, "Wire threshold (0-255)")->capture_default_str();

  // kg
  auto* kgc = app.add_subcommand("kg", "Knowledge graph operations");
  kgc->require_subcommand(1);
  auto* kg_build = kgc->add_subcommand("build", "Build a store from an annotation directory");
  std::string kg_src, kg_store;
  kg_build->add_option("source", kg_src, "Annotation directory")->required();
  kg_build->add_option("--store,-s", kg_store, "Output store directory")->required();
  auto* kg_query = kgc->add_subcommand("query", "Ranked retrieval by relation patterns");
  std::vector<std::string> patterns, metrics;
  kg_query->add_option("--store,-s", kg_store, "Store or annotation directory")->required();
  kg_query->add_option("--triplet,-t", patterns, "Pattern: relation=object or <_, relation, object>");
  kg_query->add_option("--metric,-m", metrics, "List testbenches covering these metrics");
  auto* kg_export = kgc->add_subcommand("export", "Export graph statements");
  std::string export_out;
  kg_export->add_option("--store,-s", kg_store, "Store or annotation directory")->required();
  kg_export->add_option("--output,-o", export_out, "Output file (default stdout)");

  // assemble
  auto* asmb = app.add_subcommand("assemble", "Assemble stored circuits into one netlist");
  std::string asm_kg, asm_rules;
  std::vector<std::string> asm_parts, asm_tbs;
  bool no_support = false;
  asmb->add_option("--kg", asm_kg, "Store or annotation directory")->required();
  asmb->add_option("--rules", asm_rules, "Wiring rules file")->required();
  asmb->add_option("--part,-p", asm_parts, "role=entity, in order")->required();
  asmb->add_option("--testbench,-t", asm_tbs, "Also write a deck for this testbench");
  asmb->add_flag("--no-support", no_support, "Do not add bias parts automatically");

  // size
  auto* size = app.add_subcommand("size", "Size one simulation deck with Bayesian optimization");
  std::string sz_deck, sz_fom, sz_backend, sz_bo, sz_space, sz_ranges, sz_resume;
  bool no_ties = false;
  std::optional<std::size_t> n_init, n_iter;
  size->add_option("deck", sz_deck, "Simulation deck")->required();
  size->add_option("--fom", sz_fom, "Figure of merit file")->required();
  size->add_option("--backend", sz_backend, "Backend config file")->required();
  size->add_option("--bo", sz_bo, "BO config file");
  size->add_option("--space", sz_space, "Explicit parameter space file");
  size->add_option("--ranges", sz_ranges, "Range overrides by parameter name");
  size->add_flag("--no-ties", no_ties, "Ignore matched groups");
  size->add_option("--n-init", n_init, "Initial samples");
  size->add_option("--n-iter", n_iter, "BO iterations");
  size->add_option("--resume", sz_resume, "Snapshot from an earlier run");

  // design
  auto* design = app.add_subcommand("design", "Run the full spec-to-netlist loop");
  std::string manifest;
  std::optional<std::size_t> attempts;
  design->add_option("manifest", manifest, "Run manifest");
  design->add_option("--max-attempts", attempts, "Override the manifest's attempt limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }
  if (seed_opt->count()) g.seed = seed;
  g.out_given = out_opt->count() > 0;
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (trace->parsed()) return cmd_trace(g, image, boxes, allow, threshold);
    if (kg_build->parsed()) return cmd_kg_build(kg_src, kg_store);
    if (kg_query->parsed()) return cmd_kg_query(kg_store, patterns, metrics);
    if (kg_export->parsed()) return cmd_kg_export(kg_store, export_out);
    if (asmb->parsed()) return cmd_assemble(g, asm_kg, asm_rules, asm_parts, asm_tbs, !no_support);
    if (size->parsed())
      return cmd_size(g, sz_deck, sz_fom, sz_backend, sz_bo, sz_space, sz_ranges, no_ties, n_init, n_iter, sz_resume);
    if (design->parsed()) return cmd_design(g, manifest, attempts);
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  }
  return cli::kUsage;
}
