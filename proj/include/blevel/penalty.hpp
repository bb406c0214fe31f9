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

#include <vector>

#include "blevel/aug_lagrangian.hpp"
#include "blevel/core.hpp"
#include "blevel/oracles.hpp"
#include "blevel/rng.hpp"

namespace blevel {

/// Weights of the value-function gap and of the constraint penalty.
struct PenaltyParams {
  double c1 = 1.0;
  double c2 = 1.0;

  void validate() const {
    if (!(c1 >= 0)) throw ConfigError("c1 must be >= 0");
    if (!(c2 >= 0)) throw ConfigError("c2 must be >= 0");
  }
};

/// Gradient in u = (x, y, z).
struct PsiGrad {
  Vector gx;
  Vector gy;
  Vector gz;

  double squared_norm() const {
    return gx.squaredNorm() + gy.squaredNorm() + gz.squaredNorm();
  }
  PsiGrad& operator+=(const PsiGrad& o) {
    gx += o.gx;
    gy += o.gy;
    gz += o.gz;
    return *this;
  }
  PsiGrad& operator-=(const PsiGrad& o) {
    gx -= o.gx;
    gy -= o.gy;
    gz -= o.gz;
    return *this;
  }
  PsiGrad& operator*=(double a) {
    gx *= a;
    gy *= a;
    gz *= a;
    return *this;
  }
  friend PsiGrad operator-(PsiGrad a, const PsiGrad& b) { return a -= b; }
  friend PsiGrad operator+(PsiGrad a, const PsiGrad& b) { return a += b; }
  friend PsiGrad operator*(double a, PsiGrad b) { return b *= a; }
  bool operator==(const PsiGrad& o) const {
    return gx == o.gx && gy == o.gy && gz == o.gz;
  }
};

inline double squared_distance(const PsiGrad& a, const PsiGrad& b) {
  return (a - b).squared_norm();
}

/// One replayable batch: r upper draws (zeta) and q lower draws (xi-tilde).
struct SampleBatch {
  std::vector<DrawKey> upper;
  std::vector<DrawKey> lower;
};

inline SampleBatch draw_batch(RngStream& upper_rng, RngStream& lower_rng,
                              long r, long q) {
  if (r < 1) throw ConfigError("upper batch size r must be >= 1");
  if (q < 1) throw ConfigError("lower batch size q must be >= 1");
  return {upper_rng.next_keys(static_cast<std::size_t>(r)),
          lower_rng.next_keys(static_cast<std::size_t>(q))};
}

/// G(x, y) - l(x, z, w_hat, lambda_hat), deterministic.
inline double ghat_value(const ProblemSpec& spec, const JointPoint& u,
                         const Vector& w_hat, const Vector& lambda_hat,
                         const ALParams& params) {
  return spec.G_value(u.x, u.y) -
         ell_value(spec, u.x, u.z, w_hat, lambda_hat, params);
}

/// Mini-batch gradient of the value-function gap for fixed (w_hat, lambda_hat).
/// The same draw enters grad_x g(x, y) and grad_x l(x, z, w_hat, lambda_hat).
inline PsiGrad ghat_grad(const ProblemSpec& spec, const JointPoint& u,
                         const Vector& w_hat, const Vector& lambda_hat,
                         const ALParams& params,
                         const std::vector<DrawKey>& lower_keys) {
  if (lower_keys.empty()) throw ConfigError("lower batch size q must be >= 1");
  spec.check_dims(u.x, u.y, u.z);
  spec.check_dims(u.x, w_hat, lambda_hat);
  Vector gx = Vector::Zero(spec.m);
  Vector gy = Vector::Zero(spec.n);
  Vector gx_ell = Vector::Zero(spec.m);
  for (DrawKey key : lower_keys) {
    const GradSample g = spec.grad_g(u.x, u.y, key);
    const GradSample gw = spec.grad_g(u.x, w_hat, key);
    gx += g.gx;
    gy += g.gy;
    gx_ell += gw.gx;
  }
  const double inv = 1.0 / static_cast<double>(lower_keys.size());
  gx *= inv;
  gy *= inv;
  gx_ell *= inv;
  if (spec.p > 0) {
    const Vector h = spec.H_values(u.x, w_hat);
    const ConstraintJacobian J = spec.jac_H(u.x, w_hat);
    gx_ell.noalias() +=
        J.dx.transpose() * al_weights(lambda_hat, h, params.gamma1);
  }
  return {gx - gx_ell, gy, params.gamma2 * (u.z - lambda_hat)};
}

inline PsiGrad ghat_grad(const ProblemSpec& spec, const JointPoint& u,
                         const Vector& w_hat, const Vector& lambda_hat,
                         const ALParams& params, long q, RngStream& rng) {
  if (q < 1) throw ConfigError("lower batch size q must be >= 1");
  return ghat_grad(spec, u, w_hat, lambda_hat, params,
                   rng.next_keys(static_cast<std::size_t>(q)));
}

/// F + c1 (G - l(x, z, w_hat, lambda_hat)) + c2/2 sum [H]_+^2, deterministic.
inline double psi_value(const ProblemSpec& spec, const JointPoint& u,
                        const Vector& w_hat, const Vector& lambda_hat,
                        const PenaltyParams& pen, const ALParams& params) {
  const Vector hp = positive_part(spec.H_values(u.x, u.y));
  return spec.F_value(u.x, u.y) +
         pen.c1 * ghat_value(spec, u, w_hat, lambda_hat, params) +
         0.5 * pen.c2 * hp.squaredNorm();
}

/// grad F + c1 * gap_grad + c2 sum [H]_+ grad H for a given gap gradient.
/// gap_grad.gz already carries the z part; the result's gz is c1 times it.
inline PsiGrad assemble_penalized_grad(const ProblemSpec& spec,
                                       const JointPoint& u,
                                       const GradSample& upper_grad,
                                       const PsiGrad& gap_grad,
                                       const PenaltyParams& pen) {
  PsiGrad out{upper_grad.gx + pen.c1 * gap_grad.gx,
              upper_grad.gy + pen.c1 * gap_grad.gy, pen.c1 * gap_grad.gz};
  if (spec.p > 0 && pen.c2 != 0.0) {
    const Vector hp = positive_part(spec.H_values(u.x, u.y));
    if (hp.any()) {
      const ConstraintJacobian J = spec.jac_H(u.x, u.y);
      out.gx.noalias() += pen.c2 * (J.dx.transpose() * hp);
      out.gy.noalias() += pen.c2 * (J.dy.transpose() * hp);
    }
  }
  return out;
}

/// Stochastic penalized gradient on a replayable batch.
inline PsiGrad psi_grad(const ProblemSpec& spec, const JointPoint& u,
                        const Vector& w_hat, const Vector& lambda_hat,
                        const PenaltyParams& pen, const ALParams& params,
                        const SampleBatch& batch) {
  const GradSample gf = batch_mean_grad(spec.grad_f, u.x, u.y, batch.upper);
  const PsiGrad gap = ghat_grad(spec, u, w_hat, lambda_hat, params, batch.lower);
  return assemble_penalized_grad(spec, u, gf, gap, pen);
}

inline PsiGrad psi_grad(const ProblemSpec& spec, const JointPoint& u,
                        const Vector& w_hat, const Vector& lambda_hat,
                        const PenaltyParams& pen, const ALParams& params,
                        long r, long q, RngStream& upper_rng,
                        RngStream& lower_rng) {
  return psi_grad(spec, u, w_hat, lambda_hat, pen, params,
                  draw_batch(upper_rng, lower_rng, r, q));
}

/// Expectation of psi_grad over the batch for fixed (w_hat, lambda_hat),
/// computed from the exact gradients.
inline PsiGrad psi_grad_expected(const ProblemSpec& spec, const JointPoint& u,
                                 const Vector& w_hat, const Vector& lambda_hat,
                                 const PenaltyParams& pen,
                                 const ALParams& params) {
  spec.check_dims(u.x, u.y, u.z);
  const GradSample gG = spec.grad_G(u.x, u.y);
  const ALGrad al = al_grad(spec, u.x, w_hat, lambda_hat, params.gamma1);
  const PsiGrad gap{gG.gx - al.gx, gG.gy, params.gamma2 * (u.z - lambda_hat)};
  return assemble_penalized_grad(spec, u, spec.grad_F(u.x, u.y), gap, pen);
}

}  // namespace blevel
