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
#include <functional>
#include <vector>

#include "blevel/aug_lagrangian.hpp"
#include "blevel/core.hpp"
#include "blevel/rng.hpp"

namespace blevel {

enum class WarmStart { kZero, kPrevious, kCustom };

/// Stochastic gradient descent-ascent on the regularized saddle problem
///   max_{lambda >= 0} min_{w in Y} l(x, z, w, lambda)
/// with steps eta / (j + 1) and rho / (j + 1).
struct InnerConfig {
  /// Number of iterations, >= 1 (0 is allowed only for refinement).
  long s = 100;
  /// Primal base step.
  double eta = 0.5;
  /// Dual base step.
  double rho = 1.0;
  /// How the outer loop picks w^0.
  WarmStart warm_start = WarmStart::kPrevious;
  Vector custom_w0;
  /// Reject step sizes below the theory thresholds 1/mu_G and 1/gamma2.
  bool theory_mode = false;
  /// Keep every iterate in InnerResult::trace.
  bool record_trace = false;

  void validate(bool allow_zero_iterations = false) const {
    if (s < (allow_zero_iterations ? 0 : 1))
      throw ConfigError("inner iteration count s must be >= 1");
    if (!(eta > 0)) throw ConfigError("inner step eta must be > 0");
    if (!(rho > 0)) throw ConfigError("inner step rho must be > 0");
  }
};

struct InnerIterate {
  Vector w;
  Vector lambda;
  double ell_estimate;
};

struct InnerResult {
  Vector w;
  Vector lambda;
  std::vector<InnerIterate> trace;
  long samples_used = 0;
};

/// Called with (j, w^j, lambda^j) for j = 0..s.
using InnerObserver =
    std::function<void(long, const Vector&, const Vector&)>;

inline void check_inner_theory(const ProblemSpec& spec, const ALParams& params,
                               const InnerConfig& cfg) {
  if (spec.meta.mu_G && cfg.eta < 1.0 / *spec.meta.mu_G)
    throw ConfigError("theory mode: eta must be >= 1/mu_G = " +
                      std::to_string(1.0 / *spec.meta.mu_G));
  if (params.gamma2 > 0 && cfg.rho < 1.0 / params.gamma2)
    throw ConfigError("theory mode: rho must be >= 1/gamma2 = " +
                      std::to_string(1.0 / params.gamma2));
}

/// Runs s iterations from (w0, lambda = 0); each iteration consumes one
/// lower-oracle draw shared by the primal and dual updates.
inline InnerResult salm_run(const ProblemSpec& spec, const Vector& x,
                            const Vector& z, const ALParams& params,
                            const InnerConfig& cfg, const Vector& w0,
                            RngStream& rng,
                            const InnerObserver& observer = nullptr) {
  params.validate();
  cfg.validate(/*allow_zero_iterations=*/true);
  spec.check_dims(x, w0, z);
  if (cfg.theory_mode) check_inner_theory(spec, params, cfg);

  InnerResult res;
  res.w = w0;
  res.lambda = Vector::Zero(spec.p);
  if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(cfg.s) + 1);

  auto record = [&](long j, DrawKey key) {
    if (observer) observer(j, res.w, res.lambda);
    if (cfg.record_trace)
      res.trace.push_back({res.w, res.lambda,
                           ell_value_stoch(spec, x, z, res.w, res.lambda,
                                           params, key)});
  };

  DrawKey key = 0;
  for (long j = 0; j < cfg.s; ++j) {
    key = rng.next_key();
    if (j == 0) record(0, key);
    const EllGrad g = ell_grad_stoch(spec, x, z, res.w, res.lambda, params, key);
    if (!g.gw.allFinite() || !g.glambda.allFinite())
      throw NumericError("non-finite inner gradient", j);
    const double step = 1.0 / static_cast<double>(j + 1);
    res.w = project_box(res.w - (cfg.eta * step) * g.gw, spec.Y);
    res.lambda = project_nonneg(res.lambda + (cfg.rho * step) * g.glambda);
    ++res.samples_used;
    record(j + 1, key);
  }
  if (cfg.s == 0 && observer) observer(0, res.w, res.lambda);
  return res;
}

/// |l(x, z, w, lambda) - E(x, z)| with deterministic G.
inline double saddle_gap_estimate(const ProblemSpec& spec, const Vector& x,
                                  const Vector& z, const ALParams& params,
                                  const Vector& w, const Vector& lambda,
                                  double envelope_value) {
  return std::abs(ell_value(spec, x, z, w, lambda, params) - envelope_value);
}

}  // namespace blevel
