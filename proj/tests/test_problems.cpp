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


#include <cmath>

#include <gtest/gtest.h>

#include "blevel/problems.hpp"
#include "blevel/reference.hpp"
#include "test_util.hpp"

namespace blevel {
namespace {

using testing::fd_gradient;
using testing::rel_error;

Vector c1(double v) { return Vector::Constant(1, v); }

void check_gradients(const ProblemSpec& spec, int points) {
  RngStream rng(11, 11);
  for (int t = 0; t < points; ++t) {
    const JointPoint u = testing::random_interior_point(spec, rng, 1.0);
    const Vector v = testing::concat(u.x, u.y);
    auto at = [&](const Vector& w) { return std::make_pair(Vector(w.head(spec.m)), Vector(w.tail(spec.n))); };
    const auto fF = [&](const Vector& w) { auto [x, y] = at(w); return spec.F_value(x, y); };
    const auto fG = [&](const Vector& w) { auto [x, y] = at(w); return spec.G_value(x, y); };
    const GradSample gF = spec.grad_F(u.x, u.y), gG = spec.grad_G(u.x, u.y);
    EXPECT_LE(rel_error(testing::concat(gF.gx, gF.gy), fd_gradient(fF, v)), 1e-6) << spec.name;
    EXPECT_LE(rel_error(testing::concat(gG.gx, gG.gy), fd_gradient(fG, v)), 1e-6) << spec.name;
    const ConstraintJacobian J = spec.jac_H(u.x, u.y);
    for (Eigen::Index i = 0; i < spec.p; ++i) {
      const auto fH = [&](const Vector& w) { auto [x, y] = at(w); return spec.H_values(x, y)[i]; };
      Vector row(spec.m + spec.n);
      row << J.dx.row(i).transpose(), J.dy.row(i).transpose();
      EXPECT_LE(rel_error(row, fd_gradient(fH, v)), 1e-6);
    }
  }
}

TEST(Toy, ObjectiveValue) {
  const ProblemSpec toy = make_toy();
  EXPECT_NEAR(toy.F_value(c1(1), c1(1)),
              std::exp(1.0) / (2 + std::cos(6.0)) + 0.5 * std::log(5.0), 1e-14);
  EXPECT_EQ(toy.G_value(c1(1), c1(0)), 4.0);
  EXPECT_EQ(toy.H_values(c1(1), c1(2))[0], 1.0);
}

TEST(Toy, GradientsMatchFiniteDifferences) { check_gradients(make_toy(), 50); }

TEST(Toy, LowerSolutionMap) {
  const ProblemSpec toy = make_toy();
  EXPECT_EQ(toy.meta.y_star(c1(2.5))[0], 2.5);
  EXPECT_NEAR(solve_lower(toy, c1(2.5)).point[0], 2.5, 1e-9);
  EXPECT_EQ(*toy.meta.mu_G, 2.0);
}

TEST(Toy, RejectsNegativeNoise) { EXPECT_THROW(make_toy(-0.1), ConfigError); }

TEST(Toy, OraclesAreUnbiasedWithRequestedSpread) {
  const ProblemSpec toy = make_toy(0.5);
  const int N = 20000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    const double v = toy.grad_g(c1(1), c1(1.5), static_cast<DrawKey>(i) * 7919 + 1).gy[0];
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / N;
  EXPECT_NEAR(mean, toy.grad_G(c1(1), c1(1.5)).gy[0], 4 * 0.5 / std::sqrt(N));
  EXPECT_NEAR(std::sqrt(s2 / N - mean * mean), 0.5, 0.02);
}

TEST(Quad, GradientsMatchFiniteDifferences) {
  check_gradients(make_quad({2, 2, 2}, 1), 30);
  check_gradients(make_quad({3, 4, 5}, 2), 30);
}

TEST(Quad, SlaterPointIsStrictlyFeasible) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const QuadInstance inst = generate_quad({2, 3, 4}, seed);
    const ProblemSpec spec = make_quad(inst);
    RngStream rng(seed, 3);
    for (int t = 0; t < 20; ++t) {
      const Vector x = rng.uniform_in(spec.X);
      EXPECT_LT(spec.H_values(x, inst.slater_point).maxCoeff(), -0.1);
    }
  }
}

TEST(Quad, StrongConvexity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const QuadInstance inst = generate_quad({2, 3, 2}, seed);
    EXPECT_GE(quad_mu_G(inst), 0.1);
    EXPECT_EQ(*make_quad(inst).meta.mu_G, quad_mu_G(inst));
  }
}

TEST(Quad, UnconstrainedSolutionIsAffineInX) {
  const QuadInstance inst = generate_quad({2, 2, 0}, 4);
  const ProblemSpec spec = make_quad(inst);
  RngStream rng(1, 1);
  int checked = 0;
  for (int t = 0; t < 50; ++t) {
    const Vector x = rng.uniform_in(spec.X);
    const Vector y = -inst.qp.Q.ldlt().solve(inst.qp.P * x + inst.qp.q);
    if (!spec.Y.contains(y)) continue;
    EXPECT_LE((solve_lower(spec, x).point - y).norm(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Quad, SameSeedSameInstance) {
  const auto a = to_json(generate_quad({2, 2, 2}, 9));
  const auto b = to_json(generate_quad({2, 2, 2}, 9));
  const auto c = to_json(generate_quad({2, 2, 2}, 10));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Quad, JsonRoundTrip) {
  const QuadInstance inst = generate_quad({3, 2, 4}, 12, 0.1, 0.2);
  const QuadInstance back = quad_from_json(nlohmann::json::parse(to_json(inst).dump()));
  EXPECT_EQ(to_json(back), to_json(inst));
  const ProblemSpec a = make_quad(inst), b = make_quad(back);
  RngStream rng(1, 1);
  for (int t = 0; t < 10; ++t) {
    const Vector x = rng.uniform_in(a.X), y = rng.uniform_in(a.Y);
    EXPECT_EQ(a.G_value(x, y), b.G_value(x, y));
    EXPECT_EQ(a.H_values(x, y), b.H_values(x, y));
  }
}

TEST(Quad, RejectsBadDimensions) {
  EXPECT_THROW(generate_quad({0, 2, 2}, 1), ConfigError);
  EXPECT_THROW(generate_quad({2, 2, 9}, 1), ConfigError);
  EXPECT_THROW(generate_quad({2, 7, 2}, 1), ConfigError);
  EXPECT_THROW(generate_quad({2, 2, 2}, 1, -1.0), ConfigError);
  EXPECT_THROW(quad_from_json(nlohmann::json::parse("{\"m\": 2}")), ConfigError);
}

TEST(Quad, BoundsHoldOnBoxes) {
  const ProblemSpec spec = make_quad({2, 2, 3}, 6);
  RngStream rng(2, 2);
  for (int t = 0; t < 1000; ++t) {
    const Vector x = rng.uniform_in(spec.X), y = rng.uniform_in(spec.Y);
    EXPECT_LE(spec.H_values(x, y).cwiseAbs().maxCoeff(), *spec.meta.M_H0 + 1e-12);
    const GradSample g = spec.grad_G(x, y);
    EXPECT_LE(std::sqrt(g.gx.squaredNorm() + g.gy.squaredNorm()), *spec.meta.M_G1 + 1e-12);
  }
}

}  // namespace
}  // namespace blevel
