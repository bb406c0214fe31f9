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

/// Deterministic ground-truth solvers for the built-in problems: the lower
/// value v(x), the regularized saddle and its value E(x, z), the exact
/// gradient of G - E, and hyper-objective minimizers.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blevel/aug_lagrangian.hpp"
#include "blevel/core.hpp"
#include "blevel/penalty.hpp"

namespace blevel {

enum class ReferenceMethod { kGrid, kProjectedGD, kActiveSetKKT, kNestedSaddle };

inline const char* to_string(ReferenceMethod m) {
  switch (m) {
    case ReferenceMethod::kGrid: return "grid";
    case ReferenceMethod::kProjectedGD: return "projected_gd";
    case ReferenceMethod::kActiveSetKKT: return "active_set_kkt";
    case ReferenceMethod::kNestedSaddle: return "nested_saddle";
  }
  return "unknown";
}

struct ReferenceSolution {
  double value = 0.0;
  /// y*(x), w*, or x* depending on the solver.
  Vector point;
  /// lambda*(x) for solve_lower, lambda* for solve_saddle; empty otherwise.
  Vector multiplier;
  /// Residual-based accuracy bound, > 0.
  double tolerance = 0.0;
  double residual = 0.0;
  ReferenceMethod method = ReferenceMethod::kGrid;
  std::vector<std::string> warnings;
};

inline constexpr double kReferenceTol1D = 1e-8;
inline constexpr double kReferenceTolMultiD = 1e-6;
inline constexpr int kMaxActiveSetConstraints = 8;

// ----------------------------------------------------------------------------
// Saddle
// ----------------------------------------------------------------------------

/// argmax_{lambda >= 0} l(x, z, w, lambda) for fixed w; separable and closed
/// form since each coordinate is a strongly concave piecewise quadratic.
inline Vector lambda_best_response(const Vector& h, const Vector& z,
                                   const ALParams& params) {
  const double g1 = params.gamma1, g2 = params.gamma2;
  Vector lam(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double kink = -h[i] / g1;
    const double slope_at_kink = h[i] - g2 * (kink - z[i]);
    const double root = slope_at_kink > 0 ? z[i] + h[i] / g2
                                          : g2 * z[i] / (g1 + g2);
    lam[i] = std::max(root, 0.0);
  }
  return lam;
}

/// Solves the saddle by minimizing phi(w) = max_lambda l(x, z, w, lambda)
/// over Y with backtracking projected gradient. phi is strongly convex and
/// grad phi(w) = grad_w l(x, z, w, lambda*(w)).
inline ReferenceSolution solve_saddle(const ProblemSpec& spec, const Vector& x,
                                      const Vector& z, const ALParams& params,
                                      double tol = 1e-12,
                                      const Vector* w_start = nullptr,
                                      long max_iter = 200000) {
  params.validate();
  if (!(params.gamma2 > 0))
    throw ConfigError("solve_saddle requires gamma2 > 0");
  if (!(tol > 0)) throw ConfigError("reference tolerance must be > 0");
  spec.check_dims(x, spec.Y.center(), z);

  auto lam_of = [&](const Vector& w) {
    return lambda_best_response(spec.H_values(x, w), z, params);
  };
  auto phi = [&](const Vector& w, const Vector& lam) {
    return ell_value(spec, x, z, w, lam, params);
  };

  Vector w = project_box(w_start ? *w_start : spec.Y.center(), spec.Y);
  Vector lam = lam_of(w);
  double f = phi(w, lam);
  Vector g = ell_grad_w(spec, x, z, w, lam, params);
  double t = 1.0;
  double residual = (w - project_box(w - g, spec.Y)).norm();

  for (long it = 0; it < max_iter && residual > tol; ++it) {
    Vector w_new, lam_new, g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      w_new = project_box(w - t * g, spec.Y);
      lam_new = lam_of(w_new);
      f_new = phi(w_new, lam_new);
      g_new = ell_grad_w(spec, x, z, w_new, lam_new, params);
      const Vector d = w_new - w;
      const double model = f + g.dot(d) + d.squaredNorm() / (2.0 * t);
      // The value test alone stops resolving step lengths once the decrease
      // falls below rounding in f, so the gradient secant test is also
      // required; it bounds the local curvature by 1/t. The slack covers
      // rounding in the penalty terms, which cancel and can dwarf |f|.
      const double scale = 1.0 + std::abs(f) +
                           params.gamma1 * lam_new.squaredNorm() +
                           params.gamma2 * (lam_new - z).squaredNorm();
      if (f_new <= model + 1e-14 * scale &&
          (g_new - g).dot(d) <= d.squaredNorm() / t) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    w = std::move(w_new);
    lam = std::move(lam_new);
    f = f_new;
    g = std::move(g_new);
    residual = (w - project_box(w - g, spec.Y)).norm();
    t = std::min(t * 2.0, 1e6);
  }
  if (!(residual <= tol) || !std::isfinite(f))
    throw ConvergenceError("solve_saddle did not reach tolerance", residual);

  ReferenceSolution out;
  out.value = f;
  out.point = w;
  out.multiplier = lam;
  out.residual = residual;
  out.tolerance = std::max(residual, 1e-15);
  out.method = ReferenceMethod::kNestedSaddle;
  return out;
}

/// E(x, z), the saddle value.
inline double envelope_value(const ProblemSpec& spec, const Vector& x,
                             const Vector& z, const ALParams& params,
                             double tol = 1e-12) {
  return solve_saddle(spec, x, z, params, tol).value;
}

/// Gradient of G(x, y) - E(x, z) in (x, y, z) from the saddle (w*, lambda*).
inline PsiGrad exact_ghat_grad(const ProblemSpec& spec, const JointPoint& u,
                               const ALParams& params, double tol = 1e-12) {
  const ReferenceSolution sad = solve_saddle(spec, u.x, u.z, params, tol);
  const GradSample gG = spec.grad_G(u.x, u.y);
  const ALGrad al = al_grad(spec, u.x, sad.point, sad.multiplier, params.gamma1);
  return {gG.gx - al.gx, gG.gy, params.gamma2 * (u.z - sad.multiplier)};
}

/// F + c1 (G - E) + c2/2 sum [H]_+^2.
inline double exact_penalized_value(const ProblemSpec& spec,
                                    const JointPoint& u,
                                    const PenaltyParams& pen,
                                    const ALParams& params,
                                    double tol = 1e-12) {
  const Vector hp = positive_part(spec.H_values(u.x, u.y));
  return spec.F_value(u.x, u.y) +
         pen.c1 * (spec.G_value(u.x, u.y) -
                   envelope_value(spec, u.x, u.z, params, tol)) +
         0.5 * pen.c2 * hp.squaredNorm();
}

inline PsiGrad exact_penalized_grad(const ProblemSpec& spec,
                                    const JointPoint& u,
                                    const PenaltyParams& pen,
                                    const ALParams& params,
                                    double tol = 1e-12) {
  return assemble_penalized_grad(spec, u, spec.grad_F(u.x, u.y),
                                 exact_ghat_grad(spec, u, params, tol), pen);
}

// ----------------------------------------------------------------------------
// Lower level
// ----------------------------------------------------------------------------

namespace detail {

/// Enumerates active sets of general constraints and box bounds for a lower
/// level with quadratic G and affine H, keeping the KKT points.
inline ReferenceSolution solve_lower_qp(const ProblemSpec& spec,
                                        const LowerQP& qp, const Vector& x,
                                        double tol) {
  const Eigen::Index n = spec.n, p = spec.p;
  if (p > kMaxActiveSetConstraints)
    throw ConfigError("active-set enumeration supports p <= 8");
  if (n > 10) throw ConfigError("active-set enumeration supports n <= 10");
  const Vector lin = qp.P * x + qp.q;            // linear term in y
  const Vector rhs = -(qp.Bx * x + qp.c);        // A y <= rhs
  const double kkt_tol = 1e-9;

  long box_states = 1;
  for (Eigen::Index i = 0; i < n; ++i) box_states *= 3;

  bool found = false;
  ReferenceSolution best;
  std::vector<Eigen::Index> free_idx, act_idx;
  for (long bs = 0; bs < box_states; ++bs) {
    Vector y_fixed = Vector::Zero(n);
    std::vector<int> state(static_cast<std::size_t>(n));
    free_idx.clear();
    long code = bs;
    for (Eigen::Index i = 0; i < n; ++i) {
      state[i] = static_cast<int>(code % 3);
      code /= 3;
      if (state[i] == 0) free_idx.push_back(i);
      else if (state[i] == 1) y_fixed[i] = spec.Y.lower[i];
      else y_fixed[i] = spec.Y.upper[i];
    }
    for (long as = 0; as < (1L << p); ++as) {
      act_idx.clear();
      for (Eigen::Index i = 0; i < p; ++i)
        if (as & (1L << i)) act_idx.push_back(i);
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      const auto na = static_cast<Eigen::Index>(act_idx.size());
      if (na > nf) continue;
      Matrix K = Matrix::Zero(nf + na, nf + na);
      Vector b = Vector::Zero(nf + na);
      const Vector fixed_part = qp.Q * y_fixed;
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index c = 0; c < nf; ++c)
          K(a, c) = qp.Q(free_idx[a], free_idx[c]);
        b[a] = -lin[free_idx[a]] - fixed_part[free_idx[a]];
      }
      for (Eigen::Index r = 0; r < na; ++r) {
        double fixed_dot = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          fixed_dot += qp.A(act_idx[r], i) * y_fixed[i];
        for (Eigen::Index c = 0; c < nf; ++c) {
          K(nf + r, c) = qp.A(act_idx[r], free_idx[c]);
          K(c, nf + r) = qp.A(act_idx[r], free_idx[c]);
        }
        b[nf + r] = rhs[act_idx[r]] - fixed_dot;
      }
      Vector sol;
      if (nf + na > 0) {
        Eigen::FullPivLU<Matrix> lu(K);
        if (lu.rank() < nf + na) continue;
        sol = lu.solve(b);
      }
      Vector y = y_fixed;
      for (Eigen::Index a = 0; a < nf; ++a) y[free_idx[a]] = sol[a];
      Vector mu = Vector::Zero(p);
      for (Eigen::Index r = 0; r < na; ++r) mu[act_idx[r]] = sol[nf + r];

      double viol = 0.0;
      const Vector slack = qp.A * y - rhs;
      for (Eigen::Index i = 0; i < p; ++i) viol = std::max(viol, slack[i]);
      for (Eigen::Index i = 0; i < n; ++i) {
        viol = std::max(viol, spec.Y.lower[i] - y[i]);
        viol = std::max(viol, y[i] - spec.Y.upper[i]);
      }
      for (Eigen::Index i = 0; i < p; ++i) viol = std::max(viol, -mu[i]);
      const Vector stat = qp.Q * y + lin + qp.A.transpose() * mu;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state[i] == 0) viol = std::max(viol, std::abs(stat[i]));
        else if (state[i] == 1) viol = std::max(viol, -stat[i]);
        else viol = std::max(viol, stat[i]);
      }
      if (viol > kkt_tol) continue;
      const double val = spec.G_value(x, y);
      if (!found || val < best.value) {
        found = true;
        best.value = val;
        best.point = y;
        best.multiplier = mu;
        best.residual = viol;
      }
    }
  }
  if (!found) throw InfeasibleError("no KKT point found for the lower level");
  best.tolerance = std::max({best.residual, tol * 1e-3, 1e-14});
  best.method = ReferenceMethod::kActiveSetKKT;
  return best;
}

inline double golden_section(const std::function<double(double)>& f, double a,
                             double b, double width) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > width) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  double best = mid, fbest = f(mid);
  for (double cand : {a, b})
    if (f(cand) < fbest) {
      fbest = f(cand);
      best = cand;
    }
  return best;
}

/// n = 1: locate the feasible interval of Y by a grid plus bisection on the
/// constraint boundary, then golden-section on the convex G.
inline ReferenceSolution solve_lower_1d(const ProblemSpec& spec,
                                        const Vector& x, double tol) {
  const double lo = spec.Y.lower[0], hi = spec.Y.upper[0];
  auto feasible = [&](double y) {
    return spec.p == 0 ||
           (spec.H_values(x, Vector::Constant(1, y)).array() <= 0.0).all();
  };
  const int N = 4000;
  int first = -1, last = -1;
  for (int i = 0; i <= N; ++i) {
    const double y = lo + (hi - lo) * i / N;
    if (feasible(y)) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) throw InfeasibleError("lower feasible set is empty on the grid");
  auto grid_pt = [&](int i) { return lo + (hi - lo) * i / N; };
  auto refine_edge = [&](double infeas, double feas) {
    for (int it = 0; it < 200 && std::abs(feas - infeas) > 1e-15; ++it) {
      const double mid = 0.5 * (infeas + feas);
      (feasible(mid) ? feas : infeas) = mid;
    }
    return feas;
  };
  double a = first > 0 ? refine_edge(grid_pt(first - 1), grid_pt(first)) : lo;
  double b = last < N ? refine_edge(grid_pt(last + 1), grid_pt(last)) : hi;

  auto G1 = [&](double y) { return spec.G_value(x, Vector::Constant(1, y)); };
  const double width = std::max(1e-13, std::min(tol, 1e-10));
  const double ystar = a == b ? a : golden_section(G1, a, b, width);
  Vector y = Vector::Constant(1, ystar);

  ReferenceSolution out;
  out.point = y;
  out.value = G1(ystar);
  out.multiplier = Vector::Zero(spec.p);
  if (spec.p > 0) {
    const Vector h = spec.H_values(x, y);
    const double dG = spec.grad_G(x, y).gy[0];
    const ConstraintJacobian J = spec.jac_H(x, y);
    for (Eigen::Index i = 0; i < spec.p; ++i) {
      if (std::abs(h[i]) <= 1e-9 && J.dy(i, 0) != 0.0) {
        out.multiplier[i] = std::max(0.0, -dG / J.dy(i, 0));
        break;
      }
    }
  }
  out.residual = width;
  out.tolerance = std::max(tol, width);
  out.method = ReferenceMethod::kGrid;
  return out;
}

/// Proximal point iteration on the multiplier, z <- lambda*(x, z), each
/// step one saddle solve. Converges to (y*(x), lambda*(x)) for convex G and
/// affine H; slower than enumeration but has no limit on p.
inline ReferenceSolution solve_lower_nested(const ProblemSpec& spec,
                                            const Vector& x, double tol,
                                            long max_outer = 20000) {
  const ALParams al{1.0, 0.1};
  Vector z = Vector::Zero(spec.p);
  Vector w = spec.Y.center();
  for (long it = 0; it < max_outer; ++it) {
    const ReferenceSolution sad = solve_saddle(spec, x, z, al, 1e-12, &w);
    w = sad.point;
    const double move = (sad.multiplier - z).norm();
    z = sad.multiplier;
    if (z.norm() > 1e8)
      throw InfeasibleError("lower level appears infeasible at this x");
    const double viol = constraint_violation(spec.H_values(x, w));
    if (move <= 1e-2 * tol && viol <= tol) {
      ReferenceSolution out;
      out.point = w;
      out.value = spec.G_value(x, w);
      out.multiplier = z;
      out.residual = std::max(move, viol);
      out.tolerance = tol;
      out.method = ReferenceMethod::kNestedSaddle;
      return out;
    }
  }
  throw ConvergenceError("nested lower-level solver did not converge", INFINITY);
}

}  // namespace detail

/// y*(x), v(x) and lambda*(x).
inline ReferenceSolution solve_lower(const ProblemSpec& spec, const Vector& x,
                                     double tol = kReferenceTol1D) {
  if (!(tol > 0)) throw ConfigError("reference tolerance must be > 0");
  spec.check_dims(x, spec.Y.center());
  if (spec.meta.lower_qp) {
    if (spec.p <= kMaxActiveSetConstraints && spec.n <= 10)
      return detail::solve_lower_qp(spec, *spec.meta.lower_qp, x, tol);
    ReferenceSolution out = detail::solve_lower_nested(spec, x, tol);
    out.warnings.push_back("p = " + std::to_string(spec.p) + ", n = " +
                           std::to_string(spec.n) +
                           " exceeds the active-set limits; used the nested solver");
    return out;
  }
  if (spec.n == 1) return detail::solve_lower_1d(spec, x, tol);
  throw ConfigError("no exact lower-level reference for problem '" +
                    spec.name + "'");
}

/// Reference lower solution map: closed form when attached, else solve_lower.
inline Vector reference_y_star(const ProblemSpec& spec, const Vector& x) {
  if (spec.meta.y_star) return spec.meta.y_star(x);
  return solve_lower(spec, x).point;
}

/// Minimizes F(x, y*(x)) over a uniform grid on X (grid_points per axis)
/// followed by golden-section refinement around the best cell.
inline ReferenceSolution hyperobjective_grid(const ProblemSpec& spec,
                                             long grid_points,
                                             double tol = 1e-5) {
  if (grid_points < 2) throw ConfigError("grid needs at least 2 points per axis");
  const Eigen::Index m = spec.m;
  double total = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) total *= static_cast<double>(grid_points);
  if (total > 2e7) throw ConfigError("hyper-objective grid too large");

  auto hyper = [&](const Vector& x) {
    return spec.F_value(x, reference_y_star(spec, x));
  };
  const Vector step = (spec.X.upper - spec.X.lower) /
                      static_cast<double>(grid_points - 1);
  std::vector<long> idx(static_cast<std::size_t>(m), 0);
  Vector best_x = spec.X.lower;
  double best_v = std::numeric_limits<double>::infinity();
  const long count = static_cast<long>(total);
  for (long c = 0; c < count; ++c) {
    long code = c;
    Vector x(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      x[i] = spec.X.lower[i] + step[i] * static_cast<double>(code % grid_points);
      code /= grid_points;
    }
    const double v = hyper(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  Vector x = best_x;
  for (int sweep = 0; sweep < (m == 1 ? 1 : 20); ++sweep) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = std::max(spec.X.lower[i], best_x[i] - step[i]);
      const double b = std::min(spec.X.upper[i], best_x[i] + step[i]);
      auto f1 = [&](double t) {
        Vector xt = x;
        xt[i] = t;
        return hyper(xt);
      };
      const double t = detail::golden_section(f1, a, b, tol * 1e-3);
      if (f1(t) < hyper(x)) x[i] = t;
    }
  }
  ReferenceSolution out;
  out.point = x;
  out.value = hyper(x);
  if (!(out.value <= best_v)) {
    out.point = best_x;
    out.value = best_v;
  }
  out.tolerance = tol;
  out.residual = tol * 1e-3;
  out.method = ReferenceMethod::kGrid;
  return out;
}

/// |l(x, z, w, lambda) - E(x, z)| against a reference saddle.
inline double saddle_gap_estimate(const ProblemSpec& spec, const Vector& x,
                                  const Vector& z, const ALParams& params,
                                  const Vector& w, const Vector& lambda,
                                  const ReferenceSolution& ref) {
  return std::abs(ell_value(spec, x, z, w, lambda, params) - ref.value);
}

}  // namespace blevel
