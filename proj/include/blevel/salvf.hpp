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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blevel/aug_lagrangian.hpp"
#include "blevel/core.hpp"
#include "blevel/penalty.hpp"
#include "blevel/reference.hpp"
#include "blevel/rng.hpp"
#include "blevel/salm.hpp"

namespace blevel {

enum class StepSchedule {
  kConstant,  // alpha_k = alpha
  kCubeRoot,  // alpha_k = alpha (k + 1)^(-1/3)
};

enum class InitMode { kCenter, kUniform, kCustom };

/// Settings of the outer penalized projected-gradient loop.
struct OuterConfig {
  /// Outer iterations, >= 1.
  long K = 1000;
  /// Base step size.
  double alpha = 0.02;
  StepSchedule step_schedule = StepSchedule::kConstant;
  /// Upper batch size per iteration.
  long r = 1;
  /// Lower batch size per iteration (outer gradient).
  long q = 1;
  PenaltyParams pen;
  ALParams al;
  /// Inner loop; inner.s is the per-iteration inner sample size.
  InnerConfig inner;
  /// Height of Z = [0, B / sqrt(p)]^p; defaults to 10 p.
  std::optional<double> B;
  bool feasibility_refine = false;
  long s_refine = 0;
  InitMode init = InitMode::kCenter;
  std::optional<JointPoint> u0;
  /// Abort when the direction norm exceeds this.
  double divergence_threshold = 1e8;
  /// Record |l - E| per iteration against the reference saddle.
  bool record_saddle_gap = false;
  /// Optional smoothness estimate; in theory mode a warning is logged when
  /// alpha >= 1 / (2 L_psi).
  std::optional<double> L_psi;
  bool theory_mode = false;

  double z_height(Eigen::Index p) const {
    return B ? *B : 10.0 * static_cast<double>(std::max<Eigen::Index>(p, 1));
  }

  double step(long k) const {
    if (step_schedule == StepSchedule::kCubeRoot)
      return alpha * std::pow(static_cast<double>(k + 1), -1.0 / 3.0);
    return alpha;
  }

  void validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (!(alpha > 0)) throw ConfigError("alpha must be > 0");
    if (r < 1) throw ConfigError("r must be >= 1");
    if (q < 1) throw ConfigError("q must be >= 1");
    if (B && !(*B > 0)) throw ConfigError("B must be > 0");
    if (s_refine < 0) throw ConfigError("s_refine must be >= 0");
    if (!(divergence_threshold > 0))
      throw ConfigError("divergence threshold must be > 0");
    pen.validate();
    al.validate();
    inner.validate();
  }
};

struct IterRecord {
  long k = 0;
  /// u^k, the point where the direction is evaluated.
  JointPoint u;
  /// |u^{k+1} - u^k|^2.
  double step_norm2 = 0.0;
  double alpha = 0.0;
  double cviol = 0.0;
  double psi_est = 0.0;
  double saddle_gap = std::numeric_limits<double>::quiet_NaN();
  /// Cumulative counts after iteration k.
  long upper_samples = 0;
  long lower_samples = 0;
};

struct RunTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<IterRecord> records;
  JointPoint u_final;
  long R = -1;
  JointPoint uR;
  std::optional<Vector> y_refined;
  std::optional<Vector> z_refined;
  long upper_samples = 0;
  long lower_samples = 0;
  long beta_clamps = 0;
  std::vector<std::string> warnings;

  std::vector<double> alphas() const {
    std::vector<double> a;
    a.reserve(records.size());
    for (const auto& r : records) a.push_back(r.alpha);
    return a;
  }
};

/// A run stopped on a non-finite or diverging direction; carries the
/// iterations completed so far.
class RunAborted : public NumericError {
 public:
  RunAborted(const std::string& what, long iteration, RunTrace partial)
      : NumericError(what, iteration), partial_(std::move(partial)) {}
  const RunTrace& partial() const { return partial_; }

 private:
  RunTrace partial_;
};

/// Draws k with probability alphas[k] / sum(alphas).
inline long select_index(const std::vector<double>& alphas, RngStream& rng) {
  if (alphas.empty()) throw ConfigError("select_index: empty step sequence");
  double total = 0.0;
  for (double a : alphas) {
    if (!(a > 0)) throw ConfigError("select_index: step sizes must be > 0");
    total += a;
  }
  const double t = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    cum += alphas[k];
    if (t < cum) return static_cast<long>(k);
  }
  return static_cast<long>(alphas.size()) - 1;
}

/// One inner solve at (x^R, z = 0) with gamma2 = 0 and s_refine iterations,
/// started from w0. Returns (y', z').
inline std::pair<Vector, Vector> feasibility_refine(const ProblemSpec& spec,
                                                    const Vector& xR,
                                                    const OuterConfig& cfg,
                                                    const Vector& w0,
                                                    RngStream& rng) {
  if (!spec.X.contains(xR)) throw ConfigError("feasibility_refine: x^R outside X");
  InnerConfig inner = cfg.inner;
  inner.s = cfg.s_refine;
  inner.theory_mode = false;
  inner.record_trace = false;
  ALParams al = cfg.al;
  al.gamma2 = 0.0;
  const InnerResult res =
      salm_run(spec, xR, Vector::Zero(spec.p), al, inner, w0, rng);
  return {res.w, res.lambda};
}

inline JointDomain joint_domain(const ProblemSpec& spec, const OuterConfig& cfg) {
  return {spec.X, spec.Y, make_z_box(spec.p, cfg.z_height(spec.p))};
}

inline JointPoint initial_point(const ProblemSpec& spec, const OuterConfig& cfg,
                                std::uint64_t seed) {
  const JointDomain dom = joint_domain(spec, cfg);
  switch (cfg.init) {
    case InitMode::kCustom: {
      if (!cfg.u0) throw ConfigError("custom init requires u0");
      spec.check_dims(cfg.u0->x, cfg.u0->y, cfg.u0->z);
      if (!dom.contains(*cfg.u0)) throw ConfigError("u0 lies outside the domain");
      return *cfg.u0;
    }
    case InitMode::kUniform: {
      RngStream rng(seed, StreamRole::kInit, 0);
      Vector x = rng.uniform_in(spec.X);
      Vector y = rng.uniform_in(spec.Y);
      return {std::move(x), std::move(y), Vector::Zero(spec.p)};
    }
    case InitMode::kCenter:
    default:
      return {spec.X.center(), spec.Y.center(), Vector::Zero(spec.p)};
  }
}

/// Direction rule of the outer loop: (k, u^k, u^{k-1}, w_hat, lambda_hat,
/// batch) -> d^k. For k = 0, u^{k-1} is u^0.
using DirectionRule =
    std::function<PsiGrad(long, const JointPoint&, const JointPoint&,
                          const Vector&, const Vector&, const SampleBatch&)>;

namespace detail {

inline RunTrace outer_loop(const ProblemSpec& spec, const OuterConfig& cfg,
                           std::uint64_t seed, const std::string& algorithm,
                           const std::function<double(long)>& step_of,
                           const DirectionRule& direction) {
  cfg.validate();
  const JointDomain dom = joint_domain(spec, cfg);
  RunTrace trace;
  trace.algorithm = algorithm;
  trace.seed = seed;
  trace.records.reserve(static_cast<std::size_t>(cfg.K));
  if (cfg.inner.theory_mode) check_inner_theory(spec, cfg.al, cfg.inner);
  if (cfg.theory_mode && cfg.L_psi && cfg.alpha >= 1.0 / (2.0 * *cfg.L_psi))
    trace.warnings.push_back("alpha >= 1/(2 L_psi)");

  JointPoint u = initial_point(spec, cfg, seed);
  JointPoint u_prev = u;
  Vector w_prev = u.y;

  for (long k = 0; k < cfg.K; ++k) {
    const Vector& xs = k == 0 ? u.x : u_prev.x;
    const Vector& zs = k == 0 ? u.z : u_prev.z;
    Vector w0;
    switch (cfg.inner.warm_start) {
      case WarmStart::kZero: w0 = project_box(Vector::Zero(spec.n), spec.Y); break;
      case WarmStart::kCustom: w0 = project_box(cfg.inner.custom_w0, spec.Y); break;
      case WarmStart::kPrevious:
      default: w0 = w_prev; break;
    }
    RngStream inner_rng(seed, StreamRole::kInner, static_cast<std::uint64_t>(k));
    InnerResult inner;
    try {
      inner = salm_run(spec, xs, zs, cfg.al, cfg.inner, w0, inner_rng);
    } catch (const NumericError& e) {
      throw RunAborted(std::string("inner loop failed: ") + e.what(), k,
                       std::move(trace));
    }
    w_prev = inner.w;

    RngStream upper_rng(seed, StreamRole::kUpper, static_cast<std::uint64_t>(k));
    RngStream lower_rng(seed, StreamRole::kLowerOuter,
                        static_cast<std::uint64_t>(k));
    const SampleBatch batch = draw_batch(upper_rng, lower_rng, cfg.r, cfg.q);
    const PsiGrad d = direction(k, u, u_prev, inner.w, inner.lambda, batch);
    const double dn2 = d.squared_norm();
    if (!std::isfinite(dn2))
      throw RunAborted("non-finite direction", k, std::move(trace));
    if (std::sqrt(dn2) > cfg.divergence_threshold)
      throw RunAborted("direction norm exceeds divergence threshold", k,
                       std::move(trace));

    const double a = step_of(k);
    JointPoint u_next = dom.project(
        {u.x - a * d.gx, u.y - a * d.gy, u.z - a * d.gz});

    IterRecord rec;
    rec.k = k;
    rec.u = u;
    rec.step_norm2 = squared_distance(u_next, u);
    rec.alpha = a;
    rec.cviol = constraint_violation(spec, u.x, u.y);
    rec.psi_est = psi_value(spec, u, inner.w, inner.lambda, cfg.pen, cfg.al);
    if (cfg.record_saddle_gap)
      rec.saddle_gap = saddle_gap_estimate(
          spec, xs, zs, cfg.al, inner.w, inner.lambda,
          solve_saddle(spec, xs, zs, cfg.al));
    trace.upper_samples += static_cast<long>(batch.upper.size());
    trace.lower_samples += inner.samples_used + static_cast<long>(batch.lower.size());
    rec.upper_samples = trace.upper_samples;
    rec.lower_samples = trace.lower_samples;
    trace.records.push_back(std::move(rec));

    u_prev = std::move(u);
    u = std::move(u_next);
  }
  trace.u_final = u;

  RngStream index_rng(seed, StreamRole::kIndex, 0);
  trace.R = select_index(trace.alphas(), index_rng);
  trace.uR = trace.records[static_cast<std::size_t>(trace.R)].u;
  if (cfg.feasibility_refine) {
    RngStream refine_rng(seed, StreamRole::kRefine, 0);
    auto [y1, z1] = feasibility_refine(spec, trace.uR.x, cfg, trace.uR.y, refine_rng);
    trace.y_refined = std::move(y1);
    trace.z_refined = std::move(z1);
    trace.lower_samples += cfg.s_refine;
  }
  return trace;
}

}  // namespace detail

/// Penalized stochastic projected gradient with random output index.
inline RunTrace salvf_run(const ProblemSpec& spec, const OuterConfig& cfg,
                          std::uint64_t seed) {
  auto direction = [&](long, const JointPoint& u, const JointPoint&,
                       const Vector& w, const Vector& lam,
                       const SampleBatch& batch) {
    return psi_grad(spec, u, w, lam, cfg.pen, cfg.al, batch);
  };
  return detail::outer_loop(spec, cfg, seed, "salvf",
                            [&](long k) { return cfg.step(k); }, direction);
}

}  // namespace blevel
