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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "blevel/penalty.hpp"
#include "blevel/reference.hpp"
#include "blevel/rng.hpp"
#include "blevel/salm.hpp"
#include "blevel/salvf.hpp"

namespace blevel {

enum class BetaSchedule {
  kDecay,     // beta_{k+1} = beta * alpha_k^2, clamped to (0, 1]
  kConstant,  // beta_k = beta
};

/// Outer settings plus the momentum schedule. Steps always follow
/// alpha_k = alpha (k + 1)^(-1/3); step_schedule is ignored.
struct VRConfig : OuterConfig {
  double beta = 1.0;
  BetaSchedule beta_schedule = BetaSchedule::kDecay;

  double vr_step(long k) const {
    return alpha * std::pow(static_cast<double>(k + 1), -1.0 / 3.0);
  }

  /// beta_k for k >= 1, and whether it was clamped to 1.
  std::pair<double, bool> beta_at(long k) const {
    const double raw = beta_schedule == BetaSchedule::kConstant
                           ? beta
                           : beta * vr_step(k - 1) * vr_step(k - 1);
    return raw > 1.0 ? std::make_pair(1.0, true) : std::make_pair(raw, false);
  }

  void validate() const {
    OuterConfig::validate();
    if (!(beta > 0)) throw ConfigError("beta must be > 0");
  }
};

namespace detail {

/// Recursive-momentum direction with batch replay at u^{k-1}.
class MomentumDirection {
 public:
  MomentumDirection(const ProblemSpec& spec, const VRConfig& cfg, long* clamps)
      : spec_(spec), cfg_(cfg), clamps_(clamps) {}

  PsiGrad operator()(long k, const JointPoint& u, const JointPoint& u_prev,
                     const Vector& w, const Vector& lam,
                     const SampleBatch& batch) {
    PsiGrad g = psi_grad(spec_, u, w, lam, cfg_.pen, cfg_.al, batch);
    if (k > 0) {
      const auto [beta_k, clamped] = cfg_.beta_at(k);
      if (clamped && clamps_) ++*clamps_;
      if (beta_k != 1.0) {
        const PsiGrad g_prev =
            psi_grad(spec_, u_prev, w, lam, cfg_.pen, cfg_.al, batch);
        g += (1.0 - beta_k) * (d_ - g_prev);
      }
    }
    d_ = g;
    return g;
  }

 private:
  const ProblemSpec& spec_;
  const VRConfig& cfg_;
  long* clamps_;
  PsiGrad d_;
};

}  // namespace detail

inline RunTrace salvf_vr_run(const ProblemSpec& spec, const VRConfig& cfg,
                             std::uint64_t seed) {
  cfg.validate();
  long clamps = 0;
  detail::MomentumDirection direction(spec, cfg, &clamps);
  RunTrace trace = detail::outer_loop(
      spec, cfg, seed, "salvf_vr", [&](long k) { return cfg.vr_step(k); },
      std::ref(direction));
  trace.beta_clamps = clamps;
  return trace;
}

/// Monte-Carlo estimate of E|e^k|^2 along a fixed sequence u^0..u^{K-1},
/// where e^k = d^k - E[grad Psi^k(u^k)] and the expectation is over the
/// batch for the current inner estimate. With exact_inner the inner
/// estimate is the reference saddle at (x^{k-1}, z^{k-1}).
inline std::vector<double> direction_error_probe(
    const ProblemSpec& spec, const std::vector<JointPoint>& u_sequence,
    const VRConfig& cfg, std::uint64_t seed, long repeats,
    bool exact_inner = false) {
  if (u_sequence.empty()) throw ConfigError("probe needs a nonempty sequence");
  if (repeats < 1) throw ConfigError("probe needs repeats >= 1");
  const long K = static_cast<long>(u_sequence.size());
  std::vector<double> err(static_cast<std::size_t>(K), 0.0);

  std::vector<ReferenceSolution> saddles;
  if (exact_inner) {
    for (long k = 0; k < K; ++k) {
      const JointPoint& at = u_sequence[static_cast<std::size_t>(std::max(k - 1, 0L))];
      saddles.push_back(solve_saddle(spec, at.x, at.z, cfg.al));
    }
  }

  for (long rep = 0; rep < repeats; ++rep) {
    const std::uint64_t rs = hash_combine(seed, static_cast<std::uint64_t>(rep));
    detail::MomentumDirection direction(spec, cfg, nullptr);
    Vector w_prev = u_sequence[0].y;
    for (long k = 0; k < K; ++k) {
      const JointPoint& u = u_sequence[static_cast<std::size_t>(k)];
      const JointPoint& u_prev =
          u_sequence[static_cast<std::size_t>(std::max(k - 1, 0L))];
      Vector w, lam;
      if (exact_inner) {
        w = saddles[static_cast<std::size_t>(k)].point;
        lam = saddles[static_cast<std::size_t>(k)].multiplier;
      } else {
        RngStream inner_rng(rs, StreamRole::kInner, static_cast<std::uint64_t>(k));
        InnerResult in = salm_run(spec, u_prev.x, u_prev.z, cfg.al, cfg.inner,
                                  w_prev, inner_rng);
        w_prev = in.w;
        w = std::move(in.w);
        lam = std::move(in.lambda);
      }
      RngStream upper_rng(rs, StreamRole::kUpper, static_cast<std::uint64_t>(k));
      RngStream lower_rng(rs, StreamRole::kLowerOuter, static_cast<std::uint64_t>(k));
      const SampleBatch batch = draw_batch(upper_rng, lower_rng, cfg.r, cfg.q);
      const PsiGrad d = direction(k, u, u_prev, w, lam, batch);
      const PsiGrad mean = psi_grad_expected(spec, u, w, lam, cfg.pen, cfg.al);
      err[static_cast<std::size_t>(k)] += squared_distance(d, mean);
    }
  }
  for (double& e : err) e /= static_cast<double>(repeats);
  return err;
}

}  // namespace blevel
