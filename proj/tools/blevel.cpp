// Copyright 2026 The blevel Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line harness:
//   blevel run <config>
//   blevel sweep <config> --seeds a..b
//   blevel compare <configA> <configB> --seeds a..b
//   blevel oracle <config>
// Exit codes: 0 success, 2 configuration error, 3 numeric abort or
// reference failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "blevel/experiment.hpp"

namespace fs = std::filesystem;
using namespace blevel;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::string out;
  bool verbose = false;
  unsigned workers = 0;
};

fs::path output_dir(const Globals& g, const ExperimentConfig& c) {
  if (!g.out.empty()) return g.out;
  if (c.out_dir) return *c.out_dir;
  if (const char* env = std::getenv("BLEVEL_OUT"); env && *env) return env;
  return "blevel_out";
}

unsigned worker_count(const Globals& g) {
  if (g.workers > 0) return g.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void log(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << "\n";
}

void write_run(const fs::path& dir, const ExperimentConfig& c, const ProblemSpec& spec,
               const SeedOutcome& o) {
  const json cfg = resolved_config(c);
  if (c.trace == TraceLevel::kFull || !o.error.empty())
    write_atomic(dir / "trace.csv", trace_csv(*o.trace, spec, cfg));
  if (o.error.empty()) {
    write_atomic(dir / "summary.json",
                 summary_json(c, spec, *o.trace, o.wall_seconds).dump(2) + "\n");
  } else {
    json j = {{"version", kVersion}, {"config", cfg}, {"seed", o.seed},
              {"error", o.error},
              {"completed_iterations", static_cast<long>(o.trace->records.size())}};
    write_atomic(dir / "summary.json", j.dump(2) + "\n");
  }
}

std::vector<std::uint64_t> resolve_seeds(const std::string& flag,
                                         const ExperimentConfig& c) {
  if (!flag.empty()) return parse_seed_range(flag);
  if (!c.seeds.empty()) return c.seeds;
  throw ConfigError("no seeds given (use --seeds a..b or the 'seeds' key)");
}

int cmd_run(const Globals& g, const std::string& path) {
  const ExperimentConfig c = load_config(path);
  const ProblemSpec spec = build_problem(c);
  const fs::path dir = output_dir(g, c);
  log(g, "run seed " + std::to_string(c.seed) + " -> " + dir.string());
  const SeedOutcome o = run_seed(c, spec, c.seed);
  write_run(dir, c, spec, o);
  if (!o.error.empty()) {
    std::cerr << "numeric abort: " << o.error << "\n";
    return kExitNumeric;
  }
  std::cout << "R=" << o.trace->R << " xR=" << format_double(o.trace->uR.x[0]) << "\n";
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& path, const std::string& seeds_flag) {
  const ExperimentConfig c = load_config(path);
  const auto seeds = resolve_seeds(seeds_flag, c);
  const ProblemSpec spec = build_problem(c);
  const fs::path dir = output_dir(g, c);
  log(g, "sweep " + std::to_string(seeds.size()) + " seeds on " +
             std::to_string(worker_count(g)) + " workers -> " + dir.string());
  const auto runs = run_seeds(c, spec, seeds, worker_count(g));
  bool failed = false;
  for (const auto& o : runs) {
    write_run(dir / ("seed_" + std::to_string(o.seed)), c, spec, o);
    failed = failed || !o.error.empty();
  }
  const json cfg = resolved_config(c);
  const json agg = aggregate_json(c, spec, runs);
  write_atomic(dir / "aggregate.json", agg.dump(2) + "\n");
  write_atomic(dir / "outputs.csv", outputs_csv(runs, spec, cfg));
  if (!agg["xR"][0].is_null())
    std::cout << "median xR=" << format_double(agg["xR"][0]["median"].get<double>())
              << " iqr=" << format_double(agg["xR"][0]["iqr"].get<double>()) << "\n";
  if (failed) {
    std::cerr << "numeric abort in " << agg["failures"].get<long>() << " run(s)\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_compare(const Globals& g, const std::string& pa, const std::string& pb,
                const std::string& seeds_flag) {
  const ExperimentConfig a = load_config(pa);
  const ExperimentConfig b = load_config(pb);
  if (a.upper_budget() != b.upper_budget())
    throw ConfigError("budget mismatch: K*r = " + std::to_string(a.upper_budget()) +
                      " vs " + std::to_string(b.upper_budget()));
  if (a.problem != b.problem) throw ConfigError("configs use different problems");
  const auto seeds = resolve_seeds(seeds_flag, a);
  const ProblemSpec sa = build_problem(a);
  const ProblemSpec sb = build_problem(b);
  const fs::path dir = output_dir(g, a);
  const auto ra = run_seeds(a, sa, seeds, worker_count(g));
  const auto rb = run_seeds(b, sb, seeds, worker_count(g));
  const json rep = compare_json(a, b, ra, rb);
  write_atomic(dir / "compare.json", rep.dump(2) + "\n");
  write_atomic(dir / "outputs_a.csv", outputs_csv(ra, sa, resolved_config(a)));
  write_atomic(dir / "outputs_b.csv", outputs_csv(rb, sb, resolved_config(b)));
  if (rep.contains("spread_ratio"))
    std::cout << "spread_ratio=" << format_double(rep["spread_ratio"].get<double>())
              << " sign_test_p=" << format_double(rep["sign_test_p"].get<double>()) << "\n";
  for (const auto* runs : {&ra, &rb})
    for (const auto& o : *runs)
      if (!o.error.empty()) return kExitNumeric;
  return 0;
}

int cmd_oracle(const Globals& g, const std::string& path) {
  const ExperimentConfig c = load_config(path);
  const ProblemSpec spec = build_problem(c);
  const fs::path dir = output_dir(g, c);
  const json j = oracle_json(c, spec);
  write_atomic(dir / "oracle.json", j.dump(2) + "\n");
  std::cout << "x*=" << j["x_star"].dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic bilevel solver harness"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--verbose", g.verbose, "Progress messages on stderr");
  app.add_option("--workers", g.workers, "Worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  app.set_version_flag("--version", kVersion);

  std::string cfg_a, cfg_b, seeds;
  auto* run = app.add_subcommand("run", "Run one seeded experiment");
  run->add_option("config", cfg_a, "Config file")->required();
  auto* sweep = app.add_subcommand("sweep", "Run a seed sweep");
  sweep->add_option("config", cfg_a, "Config file")->required();
  sweep->add_option("--seeds", seeds, "Seed range a..b");
  auto* compare = app.add_subcommand("compare", "Paired comparison of two configs");
  compare->add_option("configA", cfg_a, "First config")->required();
  compare->add_option("configB", cfg_b, "Second config")->required();
  compare->add_option("--seeds", seeds, "Seed range a..b");
  auto* oracle = app.add_subcommand("oracle", "Compute reference solutions");
  oracle->add_option("config", cfg_a, "Problem config")->required();
  for (auto* sub : {run, sweep, compare, oracle}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(g, cfg_a);
    if (*sweep) return cmd_sweep(g, cfg_a, seeds);
    if (*compare) return cmd_compare(g, cfg_a, cfg_b, seeds);
    if (*oracle) return cmd_oracle(g, cfg_a);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConvergenceError& e) {
    std::cerr << "reference failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InfeasibleError& e) {
    std::cerr << "reference failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
