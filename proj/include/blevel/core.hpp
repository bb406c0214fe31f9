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
#include <cstdio>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace blevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Key identifying one stochastic draw. Oracles are pure functions of
/// (point, key), so a draw can be replayed at several points.
using DrawKey = std::uint64_t;

inline constexpr const char* kVersion = "blevel 0.1.0";

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

namespace detail {
inline std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", r);
  return buf;
}
}  // namespace detail

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered; carries the iteration where it happened.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + detail::format_residual(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

#ifndef NDEBUG
#define BLEVEL_DEBUG_FINITE(v, what)                                   \
  do {                                                                 \
    if (!::blevel::all_finite(v))                                      \
      throw ::blevel::NumericError(std::string("non-finite ") + what, -1); \
  } while (0)
#else
#define BLEVEL_DEBUG_FINITE(v, what) \
  do {                               \
  } while (0)
#endif

// ----------------------------------------------------------------------------
// Boxes and projections
// ----------------------------------------------------------------------------

/// Axis-aligned box [lower, upper].
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size())
      throw DimensionError("box bounds have different lengths");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw ConfigError("box lower bound exceeds upper bound at index " +
                          std::to_string(i));
  }

  static Box uniform(Eigen::Index dim, double lo, double hi) {
    return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
  }

  Eigen::Index size() const { return lower.size(); }
  Vector center() const { return 0.5 * (lower + upper); }

  bool contains(const Vector& v) const {
    if (v.size() != size()) return false;
    return ((v.array() >= lower.array()) && (v.array() <= upper.array())).all();
  }
};

inline Vector project_box(const Vector& v, const Box& b) {
  if (v.size() != b.size())
    throw DimensionError("project_box: vector length " +
                         std::to_string(v.size()) + " vs box dimension " +
                         std::to_string(b.size()));
  Vector out = v.cwiseMax(b.lower).cwiseMin(b.upper);
  BLEVEL_DEBUG_FINITE(out, "projection");
  return out;
}

inline Vector project_nonneg(const Vector& v) { return v.cwiseMax(0.0); }

/// [v]_+ elementwise.
inline Vector positive_part(const Vector& v) { return v.cwiseMax(0.0); }

// ----------------------------------------------------------------------------
// Composite point u = (x, y, z)
// ----------------------------------------------------------------------------

struct JointPoint {
  Vector x;
  Vector y;
  Vector z;

  bool operator==(const JointPoint& o) const {
    return x.size() == o.x.size() && y.size() == o.y.size() &&
           z.size() == o.z.size() && x == o.x && y == o.y && z == o.z;
  }
};

inline double squared_distance(const JointPoint& a, const JointPoint& b) {
  return (a.x - b.x).squaredNorm() + (a.y - b.y).squaredNorm() +
         (a.z - b.z).squaredNorm();
}

/// The joint domain X x Y x Z.
struct JointDomain {
  Box X;
  Box Y;
  Box Z;

  JointPoint project(const JointPoint& u) const {
    return {project_box(u.x, X), project_box(u.y, Y), project_box(u.z, Z)};
  }
  bool contains(const JointPoint& u) const {
    return X.contains(u.x) && Y.contains(u.y) && Z.contains(u.z);
  }
};

/// Z = [0, B / sqrt(p)]^p.
inline Box make_z_box(Eigen::Index p, double B) {
  if (!(B > 0)) throw ConfigError("Z-box height B must be positive");
  const double hi = p > 0 ? B / std::sqrt(static_cast<double>(p)) : 0.0;
  return Box::uniform(p, 0.0, hi);
}

// ----------------------------------------------------------------------------
// Problem interface
// ----------------------------------------------------------------------------

/// Partial gradients of a scalar function of (x, y).
struct GradSample {
  Vector gx;
  Vector gy;
};

/// Jacobians of H: dx is p x m, dy is p x n.
struct ConstraintJacobian {
  Matrix dx;
  Matrix dy;
};

/// Lower level with quadratic G and affine H:
///   G(x, y) = 1/2 y'Qy + y'(P x) + q'y + (terms in x only)
///   H(x, y) = A y + Bx x + c
/// Present on problems whose reference solutions use active-set enumeration.
struct LowerQP {
  Matrix Q;   // n x n, symmetric positive definite
  Matrix P;   // n x m
  Vector q;   // n
  Matrix A;   // p x n
  Matrix Bx;  // p x m
  Vector c;   // p
};

struct ProblemMeta {
  std::optional<double> mu_G;   // strong convexity of G in y
  std::optional<double> M_H0;   // sup |H_i| over X x Y
  std::optional<double> M_G1;   // sup ||grad G|| over X x Y
  std::optional<double> sigma_f;
  std::optional<double> sigma_g;
  std::function<Vector(const Vector&)> y_star;  // closed-form lower solution
  std::optional<LowerQP> lower_qp;
};

using ScalarFn = std::function<double(const Vector&, const Vector&)>;
using VectorFn = std::function<Vector(const Vector&, const Vector&)>;
using GradFn = std::function<GradSample(const Vector&, const Vector&)>;
using JacFn = std::function<ConstraintJacobian(const Vector&, const Vector&)>;
using NoisyGradFn =
    std::function<GradSample(const Vector&, const Vector&, DrawKey)>;
using NoisyValueFn =
    std::function<double(const Vector&, const Vector&, DrawKey)>;

/// A constrained stochastic bilevel problem
///   min_{x in X} F(x, y*(x)),  y*(x) in argmin_{y in Y, H(x,y) <= 0} G(x, y)
/// with noisy gradient oracles for F (upper) and G (lower).
/// Immutable after construction.
struct ProblemSpec {
  std::string name;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Box X;
  Box Y;

  ScalarFn F_value;
  ScalarFn G_value;
  VectorFn H_values;
  GradFn grad_F;
  GradFn grad_G;
  JacFn jac_H;

  NoisyGradFn grad_f;    // upper oracle, draw zeta
  NoisyGradFn grad_g;    // lower oracle, draw xi
  NoisyValueFn g_value;  // lower value oracle, draw xi

  ProblemMeta meta;

  void check_dims(const Vector& x, const Vector& y) const {
    if (x.size() != m || y.size() != n)
      throw DimensionError("problem '" + name + "' expects (m, n) = (" +
                           std::to_string(m) + ", " + std::to_string(n) +
                           "), got (" + std::to_string(x.size()) + ", " +
                           std::to_string(y.size()) + ")");
  }
  void check_dims(const Vector& x, const Vector& y, const Vector& z) const {
    check_dims(x, y);
    if (z.size() != p)
      throw DimensionError("problem '" + name + "' expects p = " +
                           std::to_string(p) + ", got " +
                           std::to_string(z.size()));
  }
};

/// 1/2 sum_i [H_i(x, y)]_+^2.
inline double constraint_violation(const Vector& h) {
  return 0.5 * positive_part(h).squaredNorm();
}

inline double constraint_violation(const ProblemSpec& spec, const Vector& x,
                                   const Vector& y) {
  spec.check_dims(x, y);
  return constraint_violation(spec.H_values(x, y));
}

}  // namespace blevel
