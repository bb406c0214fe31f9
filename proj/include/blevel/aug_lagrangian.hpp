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

#include "blevel/core.hpp"

namespace blevel {

/// Parameters of the augmented Lagrangian and of its proximal regularization.
struct ALParams {
  /// Penalty parameter, > 0.
  double gamma1 = 1.0;
  /// Moreau regularization in the multiplier, >= 0.
  double gamma2 = 1.0;

  void validate() const {
    if (!(gamma1 > 0)) throw ConfigError("gamma1 must be > 0");
    if (!(gamma2 >= 0)) throw ConfigError("gamma2 must be >= 0");
  }
};

/// (1 / (2 gamma1)) sum_i ([gamma1 z_i + h_i]_+^2 - gamma1^2 z_i^2).
inline double al_penalty(const Vector& z, const Vector& h, double gamma1) {
  if (!(gamma1 > 0)) throw ConfigError("gamma1 must be > 0");
  if (z.size() != h.size())
    throw DimensionError("al_penalty: z and H lengths differ");
  const Vector s = positive_part(gamma1 * z + h);
  return (s.squaredNorm() - gamma1 * gamma1 * z.squaredNorm()) / (2.0 * gamma1);
}

inline double al_penalty(const ProblemSpec& spec, const Vector& x,
                         const Vector& y, const Vector& z, double gamma1) {
  spec.check_dims(x, y, z);
  return al_penalty(z, spec.H_values(x, y), gamma1);
}

inline double al_value(const ProblemSpec& spec, const Vector& x,
                       const Vector& y, const Vector& z, double gamma1) {
  return spec.G_value(x, y) + al_penalty(spec, x, y, z, gamma1);
}

inline double al_value_stoch(const ProblemSpec& spec, const Vector& x,
                             const Vector& y, const Vector& z, double gamma1,
                             DrawKey xi) {
  return spec.g_value(x, y, xi) + al_penalty(spec, x, y, z, gamma1);
}

/// Gradient of the augmented Lagrangian in (x, y, z).
struct ALGrad {
  Vector gx;
  Vector gy;
  Vector gz;
};

/// max(z + h / gamma1, 0): the multiplier weight on each constraint gradient.
inline Vector al_weights(const Vector& z, const Vector& h, double gamma1) {
  return positive_part(gamma1 * z + h) / gamma1;
}

/// [gamma1 z + h]_+ - gamma1 z, written as max(-gamma1 z, h).
inline Vector al_grad_z(const Vector& z, const Vector& h, double gamma1) {
  return (-gamma1 * z).cwiseMax(h);
}

namespace detail {

inline ALGrad al_grad_from(const ProblemSpec& spec, const Vector& x,
                           const Vector& y, const Vector& z, double gamma1,
                           const GradSample& g) {
  if (!(gamma1 > 0)) throw ConfigError("gamma1 must be > 0");
  const Vector h = spec.H_values(x, y);
  ALGrad out{g.gx, g.gy, al_grad_z(z, h, gamma1)};
  if (spec.p > 0) {
    const Vector wts = al_weights(z, h, gamma1);
    const ConstraintJacobian J = spec.jac_H(x, y);
    out.gx.noalias() += J.dx.transpose() * wts;
    out.gy.noalias() += J.dy.transpose() * wts;
  }
  return out;
}

}  // namespace detail

inline ALGrad al_grad(const ProblemSpec& spec, const Vector& x,
                      const Vector& y, const Vector& z, double gamma1) {
  spec.check_dims(x, y, z);
  return detail::al_grad_from(spec, x, y, z, gamma1, spec.grad_G(x, y));
}

/// Only the grad G part is noisy; the penalty is deterministic.
inline ALGrad al_grad_stoch(const ProblemSpec& spec, const Vector& x,
                            const Vector& y, const Vector& z, double gamma1,
                            DrawKey xi) {
  spec.check_dims(x, y, z);
  return detail::al_grad_from(spec, x, y, z, gamma1, spec.grad_g(x, y, xi));
}

/// G + sum_i z_i H_i.
inline double lagrangian_value(const ProblemSpec& spec, const Vector& x,
                               const Vector& y, const Vector& z) {
  spec.check_dims(x, y, z);
  return spec.G_value(x, y) + z.dot(spec.H_values(x, y));
}

// ----------------------------------------------------------------------------
// Saddle objective l(x, z, w, lambda) = L(x, w, lambda) - gamma2/2 |lambda - z|^2
// ----------------------------------------------------------------------------

inline double ell_value(const ProblemSpec& spec, const Vector& x,
                        const Vector& z, const Vector& w, const Vector& lambda,
                        const ALParams& params) {
  spec.check_dims(x, w, z);
  if (lambda.size() != spec.p)
    throw DimensionError("ell_value: lambda has wrong length");
  return al_value(spec, x, w, lambda, params.gamma1) -
         0.5 * params.gamma2 * (lambda - z).squaredNorm();
}

inline double ell_value_stoch(const ProblemSpec& spec, const Vector& x,
                              const Vector& z, const Vector& w,
                              const Vector& lambda, const ALParams& params,
                              DrawKey xi) {
  spec.check_dims(x, w, z);
  return al_value_stoch(spec, x, w, lambda, params.gamma1, xi) -
         0.5 * params.gamma2 * (lambda - z).squaredNorm();
}

/// Gradient of l in (x, w, lambda).
struct EllGrad {
  Vector gx;
  Vector gw;
  Vector glambda;
};

namespace detail {

inline EllGrad ell_grad_from(const ALGrad& al, const Vector& z,
                             const Vector& lambda, double gamma2) {
  return {al.gx, al.gy, al.gz - gamma2 * (lambda - z)};
}

}  // namespace detail

inline EllGrad ell_grad(const ProblemSpec& spec, const Vector& x,
                        const Vector& z, const Vector& w, const Vector& lambda,
                        const ALParams& params) {
  if (z.size() != lambda.size())
    throw DimensionError("ell_grad: z and lambda lengths differ");
  return detail::ell_grad_from(al_grad(spec, x, w, lambda, params.gamma1), z,
                               lambda, params.gamma2);
}

inline EllGrad ell_grad_stoch(const ProblemSpec& spec, const Vector& x,
                              const Vector& z, const Vector& w,
                              const Vector& lambda, const ALParams& params,
                              DrawKey xi) {
  if (z.size() != lambda.size())
    throw DimensionError("ell_grad: z and lambda lengths differ");
  return detail::ell_grad_from(
      al_grad_stoch(spec, x, w, lambda, params.gamma1, xi), z, lambda,
      params.gamma2);
}

inline Vector ell_grad_w(const ProblemSpec& spec, const Vector& x,
                         const Vector& z, const Vector& w, const Vector& lambda,
                         const ALParams& params) {
  return ell_grad(spec, x, z, w, lambda, params).gw;
}

inline Vector ell_grad_w_stoch(const ProblemSpec& spec, const Vector& x,
                               const Vector& z, const Vector& w,
                               const Vector& lambda, const ALParams& params,
                               DrawKey xi) {
  return ell_grad_stoch(spec, x, z, w, lambda, params, xi).gw;
}

/// max(-gamma1 lambda, H(x, w)) - gamma2 (lambda - z); deterministic.
inline Vector ell_grad_lambda(const ProblemSpec& spec, const Vector& x,
                              const Vector& z, const Vector& w,
                              const Vector& lambda, const ALParams& params) {
  spec.check_dims(x, w, z);
  if (lambda.size() != spec.p)
    throw DimensionError("ell_grad_lambda: lambda has wrong length");
  return al_grad_z(lambda, spec.H_values(x, w), params.gamma1) -
         params.gamma2 * (lambda - z);
}

}  // namespace blevel
