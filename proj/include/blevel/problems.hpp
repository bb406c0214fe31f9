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
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "blevel/core.hpp"
#include "blevel/oracles.hpp"
#include "blevel/rng.hpp"

namespace blevel {

// ----------------------------------------------------------------------------
// Toy problem
//   F(x, y) = exp(2 - y) / (2 + cos 6x) + 1/2 log((4x - 2)^2 + 1)
//   G(x, y) = (y - 2x)^2,  H(x, y) = y - x,  X = Y = [0, 3]
// ----------------------------------------------------------------------------

namespace toy {

inline double F(double x, double y) {
  const double t = 4 * x - 2;
  return std::exp(2 - y) / (2 + std::cos(6 * x)) + 0.5 * std::log(t * t + 1);
}

inline double dFdx(double x, double y) {
  const double den = 2 + std::cos(6 * x);
  const double t = 4 * x - 2;
  return std::exp(2 - y) * 6 * std::sin(6 * x) / (den * den) +
         4 * t / (t * t + 1);
}

inline double dFdy(double x, double y) {
  return -std::exp(2 - y) / (2 + std::cos(6 * x));
}

}  // namespace toy

inline ProblemSpec make_toy(double sigma = 0.1) {
  if (!(sigma >= 0)) throw ConfigError("toy noise sigma must be >= 0");
  ProblemSpec s;
  s.name = "toy";
  s.m = s.n = s.p = 1;
  s.X = Box::uniform(1, 0.0, 3.0);
  s.Y = Box::uniform(1, 0.0, 3.0);
  s.F_value = [](const Vector& x, const Vector& y) { return toy::F(x[0], y[0]); };
  s.G_value = [](const Vector& x, const Vector& y) {
    const double d = y[0] - 2 * x[0];
    return d * d;
  };
  s.H_values = [](const Vector& x, const Vector& y) {
    return Vector::Constant(1, y[0] - x[0]);
  };
  s.grad_F = [](const Vector& x, const Vector& y) {
    return GradSample{Vector::Constant(1, toy::dFdx(x[0], y[0])),
                      Vector::Constant(1, toy::dFdy(x[0], y[0]))};
  };
  s.grad_G = [](const Vector& x, const Vector& y) {
    const double d = y[0] - 2 * x[0];
    return GradSample{Vector::Constant(1, -4 * d), Vector::Constant(1, 2 * d)};
  };
  s.jac_H = [](const Vector&, const Vector&) {
    return ConstraintJacobian{Matrix::Constant(1, 1, -1.0),
                              Matrix::Constant(1, 1, 1.0)};
  };
  s.grad_f = make_gaussian_oracle(s.grad_F, sigma);
  s.grad_g = make_gaussian_oracle(s.grad_G, sigma);
  s.g_value = make_gaussian_value_oracle(s.G_value, 1, 1, sigma);

  s.meta.mu_G = 2.0;
  s.meta.M_H0 = 3.0;
  s.meta.M_G1 = 6.0 * std::sqrt(20.0);  // max |y - 2x| = 6 on the box
  s.meta.sigma_f = sigma;
  s.meta.sigma_g = sigma;
  s.meta.y_star = [](const Vector& x) { return x; };
  LowerQP qp;
  qp.Q = Matrix::Constant(1, 1, 2.0);
  qp.P = Matrix::Constant(1, 1, -4.0);
  qp.q = Vector::Zero(1);
  qp.A = Matrix::Constant(1, 1, 1.0);
  qp.Bx = Matrix::Constant(1, 1, -1.0);
  qp.c = Vector::Zero(1);
  s.meta.lower_qp = qp;
  return s;
}

// ----------------------------------------------------------------------------
// Random quadratic family
//   F(x, y) = 1/2 |x - x_c|^2 + 1/2 |y - y_c|^2
//   G(x, y) = 1/2 y'Qy + y'Px + q'y,  H(x, y) = A y + Bx x + c
// ----------------------------------------------------------------------------

struct QuadDims {
  Eigen::Index m = 2;
  Eigen::Index n = 2;
  Eigen::Index p = 2;
};

/// Everything needed to rebuild a quadratic instance.
struct QuadInstance {
  QuadDims dims;
  std::uint64_t seed = 0;
  double sigma_f = 0.0;
  double sigma_g = 0.0;
  Box X;
  Box Y;
  LowerQP qp;
  Vector x_c;
  Vector y_c;
  Vector slater_point;
};

inline QuadInstance generate_quad(QuadDims dims, std::uint64_t seed,
                                  double sigma_f = 0.0, double sigma_g = 0.0) {
  if (dims.m < 1 || dims.n < 1)
    throw ConfigError("quad instance needs m, n >= 1");
  if (dims.p < 0 || dims.p > 8)
    throw ConfigError("quad instance supports 0 <= p <= 8");
  if (dims.n > 6) throw ConfigError("quad instance supports n <= 6");
  if (!(sigma_f >= 0) || !(sigma_g >= 0))
    throw ConfigError("noise levels must be >= 0");
  const Eigen::Index m = dims.m, n = dims.n, p = dims.p;
  RngStream rng(seed, 0x7175616467656eULL);
  auto gauss = [&](Eigen::Index r, Eigen::Index c) {
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.normal();
    return M;
  };

  QuadInstance inst;
  inst.dims = dims;
  inst.seed = seed;
  inst.sigma_f = sigma_f;
  inst.sigma_g = sigma_g;
  inst.X = Box::uniform(m, -1.0, 1.0);
  inst.Y = Box::uniform(n, -3.0, 3.0);

  const Matrix M = gauss(n, n);
  inst.qp.Q = M * M.transpose() / static_cast<double>(n) +
              0.5 * Matrix::Identity(n, n);
  inst.qp.P = 0.5 * gauss(n, m);
  inst.slater_point = rng.uniform_in(Box::uniform(n, -0.5, 0.5));
  inst.qp.A = gauss(p, n);
  inst.qp.Bx = 0.3 * gauss(p, m);
  inst.qp.c.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double worst_x = inst.qp.Bx.row(i).cwiseAbs().sum();
    inst.qp.c[i] = -inst.qp.A.row(i).dot(inst.slater_point) - worst_x - 0.2;
  }
  // Place the unconstrained minimizer at x = 0 outside the feasible set so
  // that constraints bind on part of X.
  Vector dir = Vector::Zero(n);
  for (Eigen::Index i = 0; i < p; ++i)
    dir += inst.qp.A.row(i).transpose() / inst.qp.A.row(i).norm();
  if (p == 0 || dir.norm() < 1e-8) dir = Vector::Ones(n);
  const Vector y_target = inst.slater_point + 1.5 * dir / dir.norm();
  inst.qp.q = -inst.qp.Q * y_target;
  inst.x_c = rng.uniform_in(inst.X);
  inst.y_c = rng.uniform_in(Box::uniform(n, -2.0, 2.0));
  return inst;
}

/// Smallest eigenvalue of Q.
inline double quad_mu_G(const QuadInstance& inst) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.qp.Q);
  return es.eigenvalues().minCoeff();
}

inline ProblemSpec make_quad(const QuadInstance& inst) {
  const Eigen::Index m = inst.dims.m, n = inst.dims.n, p = inst.dims.p;
  const LowerQP qp = inst.qp;
  const Vector x_c = inst.x_c, y_c = inst.y_c;

  ProblemSpec s;
  s.name = "quad";
  s.m = m;
  s.n = n;
  s.p = p;
  s.X = inst.X;
  s.Y = inst.Y;
  s.F_value = [x_c, y_c](const Vector& x, const Vector& y) {
    return 0.5 * (x - x_c).squaredNorm() + 0.5 * (y - y_c).squaredNorm();
  };
  s.grad_F = [x_c, y_c](const Vector& x, const Vector& y) {
    return GradSample{x - x_c, y - y_c};
  };
  s.G_value = [qp](const Vector& x, const Vector& y) {
    return 0.5 * y.dot(qp.Q * y) + y.dot(qp.P * x) + qp.q.dot(y);
  };
  s.grad_G = [qp](const Vector& x, const Vector& y) {
    return GradSample{qp.P.transpose() * y, qp.Q * y + qp.P * x + qp.q};
  };
  s.H_values = [qp](const Vector& x, const Vector& y) -> Vector {
    return qp.A * y + qp.Bx * x + qp.c;
  };
  s.jac_H = [qp](const Vector&, const Vector&) {
    return ConstraintJacobian{qp.Bx, qp.A};
  };
  s.grad_f = make_gaussian_oracle(s.grad_F, inst.sigma_f);
  s.grad_g = make_gaussian_oracle(s.grad_G, inst.sigma_g);
  s.g_value = make_gaussian_value_oracle(s.G_value, m, n, inst.sigma_g);

  s.meta.mu_G = quad_mu_G(inst);
  s.meta.sigma_f = inst.sigma_f;
  s.meta.sigma_g = inst.sigma_g;
  s.meta.lower_qp = qp;

  // sup |H_i| by interval arithmetic over the boxes.
  double mh = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    double lo = qp.c[i], hi = qp.c[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = qp.A(i, j) * s.Y.lower[j], b = qp.A(i, j) * s.Y.upper[j];
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const double a = qp.Bx(i, j) * s.X.lower[j], b = qp.Bx(i, j) * s.X.upper[j];
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    mh = std::max({mh, std::abs(lo), std::abs(hi)});
  }
  s.meta.M_H0 = mh;

  // grad G is affine, so its norm peaks at a corner of X x Y.
  double mg = 0.0;
  const long corners = 1L << (m + n);
  for (long c = 0; c < corners; ++c) {
    Vector x(m), y(n);
    for (Eigen::Index j = 0; j < m; ++j)
      x[j] = (c >> j) & 1 ? s.X.upper[j] : s.X.lower[j];
    for (Eigen::Index j = 0; j < n; ++j)
      y[j] = (c >> (m + j)) & 1 ? s.Y.upper[j] : s.Y.lower[j];
    const GradSample g = s.grad_G(x, y);
    mg = std::max(mg, std::sqrt(g.gx.squaredNorm() + g.gy.squaredNorm()));
  }
  s.meta.M_G1 = mg;
  return s;
}

inline ProblemSpec make_quad(QuadDims dims, std::uint64_t seed,
                             double sigma_f = 0.0, double sigma_g = 0.0) {
  return make_quad(generate_quad(dims, seed, sigma_f, sigma_g));
}

// ----------------------------------------------------------------------------
// JSON round trip
// ----------------------------------------------------------------------------

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline nlohmann::json to_json(const Matrix& M) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array for a vector");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                               Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError("matrix has wrong number of rows");
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError("matrix has wrong number of columns");
    for (Eigen::Index c = 0; c < cols; ++c)
      M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

inline nlohmann::json to_json(const QuadInstance& inst) {
  return {{"m", inst.dims.m},
          {"n", inst.dims.n},
          {"p", inst.dims.p},
          {"seed", inst.seed},
          {"sigma_f", inst.sigma_f},
          {"sigma_g", inst.sigma_g},
          {"X", {{"lower", to_json(inst.X.lower)}, {"upper", to_json(inst.X.upper)}}},
          {"Y", {{"lower", to_json(inst.Y.lower)}, {"upper", to_json(inst.Y.upper)}}},
          {"Q", to_json(inst.qp.Q)},
          {"P", to_json(inst.qp.P)},
          {"q", to_json(inst.qp.q)},
          {"A", to_json(inst.qp.A)},
          {"Bx", to_json(inst.qp.Bx)},
          {"c", to_json(inst.qp.c)},
          {"x_c", to_json(inst.x_c)},
          {"y_c", to_json(inst.y_c)},
          {"slater_point", to_json(inst.slater_point)}};
}

inline QuadInstance quad_from_json(const nlohmann::json& j) {
  try {
    QuadInstance inst;
    inst.dims = {j.at("m").get<Eigen::Index>(), j.at("n").get<Eigen::Index>(),
                 j.at("p").get<Eigen::Index>()};
    const Eigen::Index m = inst.dims.m, n = inst.dims.n, p = inst.dims.p;
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.sigma_f = j.at("sigma_f").get<double>();
    inst.sigma_g = j.at("sigma_g").get<double>();
    inst.X = Box(vector_from_json(j.at("X").at("lower")),
                 vector_from_json(j.at("X").at("upper")));
    inst.Y = Box(vector_from_json(j.at("Y").at("lower")),
                 vector_from_json(j.at("Y").at("upper")));
    inst.qp.Q = matrix_from_json(j.at("Q"), n, n);
    inst.qp.P = matrix_from_json(j.at("P"), n, m);
    inst.qp.q = vector_from_json(j.at("q"));
    inst.qp.A = p > 0 ? matrix_from_json(j.at("A"), p, n) : Matrix(0, n);
    inst.qp.Bx = p > 0 ? matrix_from_json(j.at("Bx"), p, m) : Matrix(0, m);
    inst.qp.c = vector_from_json(j.at("c"));
    inst.x_c = vector_from_json(j.at("x_c"));
    inst.y_c = vector_from_json(j.at("y_c"));
    inst.slater_point = vector_from_json(j.at("slater_point"));
    if (inst.X.size() != m || inst.Y.size() != n || inst.qp.q.size() != n ||
        inst.qp.c.size() != p || inst.x_c.size() != m || inst.y_c.size() != n ||
        inst.slater_point.size() != n)
      throw DimensionError("quad instance JSON has inconsistent dimensions");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad quad instance JSON: ") + e.what());
  }
}

}  // namespace blevel
