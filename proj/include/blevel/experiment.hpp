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

/// Experiment configuration, runners and file writers behind the CLI.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blevel/core.hpp"
#include "blevel/diagnostics.hpp"
#include "blevel/problems.hpp"
#include "blevel/reference.hpp"
#include "blevel/salvf.hpp"
#include "blevel/salvf_vr.hpp"

namespace blevel {

using json = nlohmann::json;

enum class ProblemKind { kToy, kQuad };
enum class Algorithm { kSalvf, kSalvfVr };
enum class TraceLevel { kFull, kNone };

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::kToy;
  double toy_sigma = 0.1;
  QuadDims quad_dims;
  std::uint64_t quad_seed = 0;
  double quad_sigma_f = 0.1;
  double quad_sigma_g = 0.1;

  Algorithm algorithm = Algorithm::kSalvf;
  /// Solver settings; the VR fields are ignored by plain SALVF.
  VRConfig solver;

  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> out_dir;
  TraceLevel trace = TraceLevel::kFull;
  bool reference = false;

  long oracle_grid_points = 100001;
  double oracle_x_tolerance = 0.15;
  long oracle_envelope_grid = 20;
  long oracle_samples = 10;

  /// Upper-level samples per run.
  long upper_budget() const { return solver.K * solver.r; }
};

// ----------------------------------------------------------------------------
// Parsing
// ----------------------------------------------------------------------------

/// "a..b" (inclusive) or a single integer.
inline std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  auto to_u64 = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad seed range '" + text + "'");
    return std::stoull(s);
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {to_u64(text)};
  const std::uint64_t a = to_u64(text.substr(0, dots));
  const std::uint64_t b = to_u64(text.substr(dots + 2));
  if (b < a) throw ConfigError("empty seed range '" + text + "'");
  if (b - a > 10000000) throw ConfigError("seed range too large");
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
  return out;
}

namespace detail {

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline long get_long(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<long>();
}

inline std::uint64_t get_u64(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline double get_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

inline bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

template <class E>
E get_enum(const json& v, const std::string& key,
           const std::vector<std::pair<std::string, E>>& names) {
  const auto s = get_as<std::string>(v, key);
  for (const auto& [n, e] : names)
    if (n == s) return e;
  std::string allowed;
  for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + n;
  throw ConfigError("config key '" + key + "' must be one of: " + allowed);
}

inline Vector get_vector(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = get_double(v[i], key);
  return out;
}

inline const std::vector<std::pair<std::string, StepSchedule>> kStepNames = {
    {"constant", StepSchedule::kConstant}, {"cube_root", StepSchedule::kCubeRoot}};
inline const std::vector<std::pair<std::string, BetaSchedule>> kBetaNames = {
    {"decay", BetaSchedule::kDecay}, {"constant", BetaSchedule::kConstant}};
inline const std::vector<std::pair<std::string, WarmStart>> kWarmNames = {
    {"zero", WarmStart::kZero}, {"previous", WarmStart::kPrevious},
    {"custom", WarmStart::kCustom}};
inline const std::vector<std::pair<std::string, InitMode>> kInitNames = {
    {"center", InitMode::kCenter}, {"uniform", InitMode::kUniform},
    {"custom", InitMode::kCustom}};

template <class E>
std::string enum_name(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, v] : names)
    if (v == e) return n;
  return "unknown";
}

}  // namespace detail

/// Builds a config from a flat JSON object with dotted keys; unknown keys
/// are rejected.
inline ExperimentConfig parse_config(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  std::optional<Vector> u0x, u0y, u0z;
  using Setter = std::function<void(const json&, const std::string&)>;
  VRConfig& s = c.solver;
  const std::map<std::string, Setter> setters = {
      {"problem", [&](const json& v, const std::string& k) {
         c.problem = get_enum<ProblemKind>(
             v, k, {{"toy", ProblemKind::kToy}, {"quad", ProblemKind::kQuad}});
       }},
      {"problem.sigma", [&](const json& v, const std::string& k) { c.toy_sigma = get_double(v, k); }},
      {"problem.m", [&](const json& v, const std::string& k) { c.quad_dims.m = get_long(v, k); }},
      {"problem.n", [&](const json& v, const std::string& k) { c.quad_dims.n = get_long(v, k); }},
      {"problem.p", [&](const json& v, const std::string& k) { c.quad_dims.p = get_long(v, k); }},
      {"problem.seed", [&](const json& v, const std::string& k) { c.quad_seed = get_u64(v, k); }},
      {"problem.sigma_f", [&](const json& v, const std::string& k) { c.quad_sigma_f = get_double(v, k); }},
      {"problem.sigma_g", [&](const json& v, const std::string& k) { c.quad_sigma_g = get_double(v, k); }},
      {"algorithm", [&](const json& v, const std::string& k) {
         c.algorithm = get_enum<Algorithm>(
             v, k, {{"salvf", Algorithm::kSalvf}, {"salvf_vr", Algorithm::kSalvfVr}});
       }},
      {"solver.K", [&](const json& v, const std::string& k) { s.K = get_long(v, k); }},
      {"solver.alpha", [&](const json& v, const std::string& k) { s.alpha = get_double(v, k); }},
      {"solver.step_schedule", [&](const json& v, const std::string& k) { s.step_schedule = get_enum(v, k, kStepNames); }},
      {"solver.r", [&](const json& v, const std::string& k) { s.r = get_long(v, k); }},
      {"solver.q", [&](const json& v, const std::string& k) { s.q = get_long(v, k); }},
      {"solver.s", [&](const json& v, const std::string& k) { s.inner.s = get_long(v, k); }},
      {"solver.eta", [&](const json& v, const std::string& k) { s.inner.eta = get_double(v, k); }},
      {"solver.rho", [&](const json& v, const std::string& k) { s.inner.rho = get_double(v, k); }},
      {"solver.warm_start", [&](const json& v, const std::string& k) { s.inner.warm_start = get_enum(v, k, kWarmNames); }},
      {"solver.w0", [&](const json& v, const std::string& k) { s.inner.custom_w0 = get_vector(v, k); }},
      {"solver.gamma1", [&](const json& v, const std::string& k) { s.al.gamma1 = get_double(v, k); }},
      {"solver.gamma2", [&](const json& v, const std::string& k) { s.al.gamma2 = get_double(v, k); }},
      {"solver.c1", [&](const json& v, const std::string& k) { s.pen.c1 = get_double(v, k); }},
      {"solver.c2", [&](const json& v, const std::string& k) { s.pen.c2 = get_double(v, k); }},
      {"solver.B", [&](const json& v, const std::string& k) { s.B = get_double(v, k); }},
      {"solver.beta", [&](const json& v, const std::string& k) { s.beta = get_double(v, k); }},
      {"solver.beta_schedule", [&](const json& v, const std::string& k) { s.beta_schedule = get_enum(v, k, kBetaNames); }},
      {"solver.refine", [&](const json& v, const std::string& k) { s.feasibility_refine = get_bool(v, k); }},
      {"solver.s_refine", [&](const json& v, const std::string& k) { s.s_refine = get_long(v, k); }},
      {"solver.init", [&](const json& v, const std::string& k) { s.init = get_enum(v, k, kInitNames); }},
      {"solver.u0.x", [&](const json& v, const std::string& k) { u0x = get_vector(v, k); }},
      {"solver.u0.y", [&](const json& v, const std::string& k) { u0y = get_vector(v, k); }},
      {"solver.u0.z", [&](const json& v, const std::string& k) { u0z = get_vector(v, k); }},
      {"solver.divergence_threshold", [&](const json& v, const std::string& k) { s.divergence_threshold = get_double(v, k); }},
      {"solver.theory_mode", [&](const json& v, const std::string& k) {
         s.theory_mode = get_bool(v, k);
         s.inner.theory_mode = s.theory_mode;
       }},
      {"solver.L_psi", [&](const json& v, const std::string& k) { s.L_psi = get_double(v, k); }},
      {"seed", [&](const json& v, const std::string& k) { c.seed = get_u64(v, k); }},
      {"seeds", [&](const json& v, const std::string& k) {
         if (v.is_string()) {
           c.seeds = parse_seed_range(v.get<std::string>());
         } else if (v.is_array()) {
           c.seeds.clear();
           for (const auto& e : v) c.seeds.push_back(get_u64(e, k));
         } else {
           throw ConfigError("config key 'seeds' must be \"a..b\" or an array");
         }
       }},
      {"output.dir", [&](const json& v, const std::string& k) { c.out_dir = get_as<std::string>(v, k); }},
      {"output.trace", [&](const json& v, const std::string& k) {
         c.trace = get_enum<TraceLevel>(v, k, {{"full", TraceLevel::kFull}, {"none", TraceLevel::kNone}});
       }},
      {"reference.enabled", [&](const json& v, const std::string& k) { c.reference = get_bool(v, k); }},
      {"oracle.grid_points", [&](const json& v, const std::string& k) { c.oracle_grid_points = get_long(v, k); }},
      {"oracle.x_tolerance", [&](const json& v, const std::string& k) { c.oracle_x_tolerance = get_double(v, k); }},
      {"oracle.envelope_grid", [&](const json& v, const std::string& k) { c.oracle_envelope_grid = get_long(v, k); }},
      {"oracle.samples", [&](const json& v, const std::string& k) { c.oracle_samples = get_long(v, k); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  if (u0x || u0y || u0z) {
    if (!(u0x && u0y && u0z))
      throw ConfigError("solver.u0.x, solver.u0.y and solver.u0.z must be given together");
    s.u0 = JointPoint{*u0x, *u0y, *u0z};
  }
  s.record_saddle_gap = c.reference;
  s.validate();
  if (s.feasibility_refine && s.s_refine < 1)
    throw ConfigError("solver.refine requires solver.s_refine >= 1");
  if (c.oracle_grid_points < 2) throw ConfigError("oracle.grid_points must be >= 2");
  if (c.oracle_envelope_grid < 2) throw ConfigError("oracle.envelope_grid must be >= 2");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

/// The fully resolved config as a flat JSON object (parse_config inverse).
inline json resolved_config(const ExperimentConfig& c) {
  using namespace detail;
  const VRConfig& s = c.solver;
  json j;
  j["problem"] = c.problem == ProblemKind::kToy ? "toy" : "quad";
  if (c.problem == ProblemKind::kToy) {
    j["problem.sigma"] = c.toy_sigma;
  } else {
    j["problem.m"] = c.quad_dims.m;
    j["problem.n"] = c.quad_dims.n;
    j["problem.p"] = c.quad_dims.p;
    j["problem.seed"] = c.quad_seed;
    j["problem.sigma_f"] = c.quad_sigma_f;
    j["problem.sigma_g"] = c.quad_sigma_g;
  }
  j["algorithm"] = c.algorithm == Algorithm::kSalvf ? "salvf" : "salvf_vr";
  j["solver.K"] = s.K;
  j["solver.alpha"] = s.alpha;
  j["solver.step_schedule"] = enum_name(s.step_schedule, kStepNames);
  j["solver.r"] = s.r;
  j["solver.q"] = s.q;
  j["solver.s"] = s.inner.s;
  j["solver.eta"] = s.inner.eta;
  j["solver.rho"] = s.inner.rho;
  j["solver.warm_start"] = enum_name(s.inner.warm_start, kWarmNames);
  if (s.inner.warm_start == WarmStart::kCustom) j["solver.w0"] = to_json(s.inner.custom_w0);
  j["solver.gamma1"] = s.al.gamma1;
  j["solver.gamma2"] = s.al.gamma2;
  j["solver.c1"] = s.pen.c1;
  j["solver.c2"] = s.pen.c2;
  if (s.B) j["solver.B"] = *s.B;
  j["solver.beta"] = s.beta;
  j["solver.beta_schedule"] = enum_name(s.beta_schedule, kBetaNames);
  j["solver.refine"] = s.feasibility_refine;
  j["solver.s_refine"] = s.s_refine;
  j["solver.init"] = enum_name(s.init, kInitNames);
  if (s.u0) {
    j["solver.u0.x"] = to_json(s.u0->x);
    j["solver.u0.y"] = to_json(s.u0->y);
    j["solver.u0.z"] = to_json(s.u0->z);
  }
  j["solver.divergence_threshold"] = s.divergence_threshold;
  j["solver.theory_mode"] = s.theory_mode;
  if (s.L_psi) j["solver.L_psi"] = *s.L_psi;
  j["seed"] = c.seed;
  if (!c.seeds.empty()) j["seeds"] = c.seeds;
  if (c.out_dir) j["output.dir"] = *c.out_dir;
  j["output.trace"] = c.trace == TraceLevel::kFull ? "full" : "none";
  j["reference.enabled"] = c.reference;
  j["oracle.grid_points"] = c.oracle_grid_points;
  j["oracle.x_tolerance"] = c.oracle_x_tolerance;
  j["oracle.envelope_grid"] = c.oracle_envelope_grid;
  j["oracle.samples"] = c.oracle_samples;
  return j;
}

inline ProblemSpec build_problem(const ExperimentConfig& c) {
  if (c.problem == ProblemKind::kToy) return make_toy(c.toy_sigma);
  return make_quad(c.quad_dims, c.quad_seed, c.quad_sigma_f, c.quad_sigma_g);
}

inline RunTrace run_experiment(const ExperimentConfig& c, const ProblemSpec& spec,
                               std::uint64_t seed) {
  if (c.algorithm == Algorithm::kSalvfVr) return salvf_vr_run(spec, c.solver, seed);
  return salvf_run(spec, static_cast<const OuterConfig&>(c.solver), seed);
}

// ----------------------------------------------------------------------------
// Output
// ----------------------------------------------------------------------------

/// Shortest-safe text for a double: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_header(const ProblemSpec& spec) {
  std::string h = "k";
  for (Eigen::Index i = 0; i < spec.m; ++i) h += ",x" + std::to_string(i);
  for (Eigen::Index i = 0; i < spec.n; ++i) h += ",y" + std::to_string(i);
  for (Eigen::Index i = 0; i < spec.p; ++i) h += ",z" + std::to_string(i);
  h += ",step_norm2,cviol,psi_est,upper_samples,lower_samples";
  return h;
}

/// Two '#' preamble lines (version, resolved config), the header row, and
/// one row per outer iteration.
inline std::string trace_csv(const RunTrace& t, const ProblemSpec& spec,
                             const json& config) {
  std::string out;
  out += std::string("# ") + kVersion + "\n";
  out += "# config: " + config.dump() + "\n";
  out += trace_header(spec) + "\n";
  for (const auto& r : t.records) {
    out += std::to_string(r.k);
    for (Eigen::Index i = 0; i < r.u.x.size(); ++i) out += "," + format_double(r.u.x[i]);
    for (Eigen::Index i = 0; i < r.u.y.size(); ++i) out += "," + format_double(r.u.y[i]);
    for (Eigen::Index i = 0; i < r.u.z.size(); ++i) out += "," + format_double(r.u.z[i]);
    out += "," + format_double(r.step_norm2) + "," + format_double(r.cviol) + "," +
           format_double(r.psi_est) + "," + std::to_string(r.upper_samples) + "," +
           std::to_string(r.lower_samples) + "\n";
  }
  return out;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(
                       std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline json point_json(const JointPoint& u) {
  return {{"x", to_json(u.x)}, {"y", to_json(u.y)}, {"z", to_json(u.z)}};
}

inline json summary_json(const ExperimentConfig& c, const ProblemSpec& spec,
                         const RunTrace& t, double wall_seconds) {
  json j;
  j["version"] = kVersion;
  j["config"] = resolved_config(c);
  j["algorithm"] = t.algorithm;
  j["seed"] = t.seed;
  j["K"] = static_cast<long>(t.records.size());
  j["R"] = t.R;
  j["uR"] = point_json(t.uR);
  j["u_final"] = point_json(t.u_final);
  j["cviol_R"] = constraint_violation(spec, t.uR.x, t.uR.y);
  if (t.y_refined) {
    j["refined"] = {{"y", to_json(*t.y_refined)},
                    {"z", to_json(*t.z_refined)},
                    {"cviol", constraint_violation(spec, t.uR.x, *t.y_refined)}};
  } else {
    j["refined"] = nullptr;
  }
  j["stationarity_proxy"] = stationarity_proxy(t);
  j["upper_samples"] = t.upper_samples;
  j["lower_samples"] = t.lower_samples;
  j["beta_clamps"] = t.beta_clamps;
  j["warnings"] = t.warnings;
  j["wall_seconds"] = wall_seconds;
  if (c.reference) {
    try {
      j["lower_gap_R"] = lower_gap(spec, t.uR.x, t.uR.y);
    } catch (const Error&) {
      j["lower_gap_R"] = nullptr;
    }
  }
  return j;
}

/// Runs fn(i) for i in [0, count) on a pool of `workers` threads.
/// The first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<RunTrace> trace;
  std::string error;  // nonempty when the run aborted
  double wall_seconds = 0.0;
};

inline SeedOutcome run_seed(const ExperimentConfig& c, const ProblemSpec& spec,
                            std::uint64_t seed) {
  SeedOutcome o;
  o.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    o.trace = run_experiment(c, spec, seed);
  } catch (const RunAborted& e) {
    o.trace = e.partial();
    o.error = e.what();
  }
  o.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

inline std::vector<SeedOutcome> run_seeds(const ExperimentConfig& c,
                                          const ProblemSpec& spec,
                                          const std::vector<std::uint64_t>& seeds,
                                          unsigned workers) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
  std::vector<SeedOutcome> out(seeds.size());
  parallel_for(seeds.size(), workers,
               [&](std::size_t i) { out[i] = run_seed(c, spec, seeds[i]); });
  return out;
}

inline std::string outputs_csv(const std::vector<SeedOutcome>& runs,
                               const ProblemSpec& spec, const json& config) {
  std::string out = std::string("# ") + kVersion + "\n# config: " + config.dump() + "\n";
  out += "seed";
  for (Eigen::Index i = 0; i < spec.m; ++i) out += ",xR" + std::to_string(i);
  for (Eigen::Index i = 0; i < spec.n; ++i) out += ",yR" + std::to_string(i);
  out += "\n";
  for (const auto& r : runs) {
    if (!r.error.empty()) continue;
    out += std::to_string(r.seed);
    for (Eigen::Index i = 0; i < spec.m; ++i) out += "," + format_double(r.trace->uR.x[i]);
    for (Eigen::Index i = 0; i < spec.n; ++i) out += "," + format_double(r.trace->uR.y[i]);
    out += "\n";
  }
  return out;
}

inline json aggregate_json(const ExperimentConfig& c, const ProblemSpec& spec,
                           const std::vector<SeedOutcome>& runs) {
  json entries = json::array();
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(spec.m)),
      ys(static_cast<std::size_t>(spec.n));
  std::vector<double> cv, cv_ref, gaps;
  long failures = 0;
  for (const auto& r : runs) {
    if (!r.error.empty()) {
      ++failures;
      entries.push_back({{"seed", r.seed}, {"error", r.error}});
      continue;
    }
    const RunTrace& t = *r.trace;
    json e = {{"seed", r.seed}, {"R", t.R}, {"xR", to_json(t.uR.x)},
              {"yR", to_json(t.uR.y)}, {"cviol", constraint_violation(spec, t.uR.x, t.uR.y)}};
    for (Eigen::Index i = 0; i < spec.m; ++i) xs[i].push_back(t.uR.x[i]);
    for (Eigen::Index i = 0; i < spec.n; ++i) ys[i].push_back(t.uR.y[i]);
    cv.push_back(e["cviol"].get<double>());
    if (t.y_refined) {
      const double cr = constraint_violation(spec, t.uR.x, *t.y_refined);
      e["y_refined"] = to_json(*t.y_refined);
      e["cviol_refined"] = cr;
      cv_ref.push_back(cr);
    }
    if (c.reference) {
      try {
        const double g = lower_gap(spec, t.uR.x, t.uR.y);
        e["lower_gap"] = g;
        gaps.push_back(g);
      } catch (const Error&) {
        e["lower_gap"] = nullptr;
      }
    }
    entries.push_back(std::move(e));
  }
  auto stats = [](const std::vector<double>& v) -> json {
    if (v.empty()) return nullptr;
    return {{"median", median(v)}, {"iqr", iqr(v)}};
  };
  json j;
  j["version"] = kVersion;
  j["config"] = resolved_config(c);
  j["runs"] = static_cast<long>(runs.size());
  j["failures"] = failures;
  j["entries"] = entries;
  json jx = json::array(), jy = json::array();
  for (const auto& v : xs) jx.push_back(stats(v));
  for (const auto& v : ys) jy.push_back(stats(v));
  j["xR"] = jx;
  j["yR"] = jy;
  j["cviol"] = stats(cv);
  j["cviol_refined"] = stats(cv_ref);
  j["lower_gap"] = stats(gaps);
  return j;
}

/// Paired spread comparison on the first coordinate of x^R.
inline json compare_json(const ExperimentConfig& a, const ExperimentConfig& b,
                         const std::vector<SeedOutcome>& ra,
                         const std::vector<SeedOutcome>& rb) {
  std::vector<double> xa, xb;
  std::vector<std::uint64_t> used;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (!ra[i].error.empty() || !rb[i].error.empty()) continue;
    xa.push_back(ra[i].trace->uR.x[0]);
    xb.push_back(rb[i].trace->uR.x[0]);
    used.push_back(ra[i].seed);
  }
  json j;
  j["version"] = kVersion;
  j["config_a"] = resolved_config(a);
  j["config_b"] = resolved_config(b);
  j["seeds"] = used;
  j["upper_budget"] = a.upper_budget();
  if (xa.empty()) {
    j["error"] = "no paired successful runs";
    return j;
  }
  const SpreadComparison cmp = compare_spread(xa, xb);
  j["median_a"] = cmp.median_a;
  j["median_b"] = cmp.median_b;
  j["iqr_a"] = cmp.iqr_a;
  j["iqr_b"] = cmp.iqr_b;
  j["spread_ratio"] = cmp.ratio;
  j["wins_b"] = cmp.wins_b;
  j["trials"] = cmp.trials;
  j["sign_test_p"] = cmp.p_value;
  return j;
}

/// Reference data for a built-in problem.
inline json oracle_json(const ExperimentConfig& c, const ProblemSpec& spec) {
  json j;
  j["version"] = kVersion;
  j["config"] = resolved_config(c);
  j["problem"] = spec.name;
  if (c.problem == ProblemKind::kQuad)
    j["instance"] = to_json(generate_quad(c.quad_dims, c.quad_seed, c.quad_sigma_f,
                                          c.quad_sigma_g));

  const ReferenceSolution hyper = hyperobjective_grid(
      spec, spec.m == 1 ? c.oracle_grid_points : std::min<long>(c.oracle_grid_points, 401));
  j["x_star"] = to_json(hyper.point);
  j["x_star_tolerance"] = hyper.tolerance;
  j["hyper_value"] = hyper.value;
  j["acceptance_x_tolerance"] = c.oracle_x_tolerance;

  // y*(x), v(x) and lambda*(x) at sample points of X.
  json lower = json::array();
  RngStream rng(c.quad_seed, StreamRole::kProbe, 0);
  for (long i = 0; i < c.oracle_samples; ++i) {
    Vector x = spec.m == 1
                   ? Vector::Constant(1, spec.X.lower[0] + (spec.X.upper[0] - spec.X.lower[0]) *
                                             static_cast<double>(i) /
                                             static_cast<double>(std::max(1L, c.oracle_samples - 1)))
                   : rng.uniform_in(spec.X);
    const ReferenceSolution sol = solve_lower(spec, x);
    lower.push_back({{"x", to_json(x)},
                     {"y_star", to_json(sol.point)},
                     {"v", sol.value},
                     {"lambda_star", to_json(sol.multiplier)},
                     {"method", to_string(sol.method)},
                     {"tolerance", sol.tolerance}});
    if (!sol.warnings.empty()) lower.back()["warnings"] = sol.warnings;
  }
  j["lower"] = lower;

  // E(x, z) vs v(x) on a grid along the first coordinates of X and Z.
  const Box Z = make_z_box(spec.p, c.solver.z_height(spec.p));
  const long G = c.oracle_envelope_grid;
  json env = json::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (long a = 0; a < G; ++a) {
    Vector x = spec.X.center();
    x[0] = spec.X.lower[0] + (spec.X.upper[0] - spec.X.lower[0]) * a / static_cast<double>(G - 1);
    const ReferenceSolution low = solve_lower(spec, x);
    for (long b = 0; b < G; ++b) {
      Vector z = Vector::Zero(spec.p);
      if (spec.p > 0) z.setConstant(Z.upper[0] * b / static_cast<double>(G - 1));
      const ReferenceSolution sad = solve_saddle(spec, x, z, c.solver.al);
      worst = std::max(worst, sad.value - low.value);
      env.push_back({{"x", to_json(x)}, {"z", to_json(z)}, {"E", sad.value},
                     {"v", low.value}, {"w_star", to_json(sad.point)},
                     {"lambda_star", to_json(sad.multiplier)},
                     {"residual", sad.residual}});
    }
  }
  j["envelope"] = env;
  j["max_E_minus_v"] = worst;
  return j;
}

}  // namespace blevel
