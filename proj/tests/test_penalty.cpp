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

#include "blevel/penalty.hpp"
#include "blevel/problems.hpp"
#include "blevel/reference.hpp"
#include "test_util.hpp"

namespace blevel {
namespace {

using testing::concat;
using testing::rel_error;

Vector c1(double v) { return Vector::Constant(1, v); }

/// F = 2, G = 0, H = (1, 1) with m = n = 1.
ProblemSpec constant_spec() {
  ProblemSpec s;
  s.name = "constant";
  s.m = s.n = 1;
  s.p = 2;
  s.X = s.Y = Box::uniform(1, 0, 1);
  s.F_value = [](const Vector&, const Vector&) { return 2.0; };
  s.G_value = [](const Vector&, const Vector&) { return 0.0; };
  s.H_values = [](const Vector&, const Vector&) { return Vector::Ones(2); };
  s.grad_F = s.grad_G = [](const Vector&, const Vector&) {
    return GradSample{Vector::Zero(1), Vector::Zero(1)};
  };
  s.jac_H = [](const Vector&, const Vector&) {
    return ConstraintJacobian{Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  };
  s.grad_f = s.grad_g = [](const Vector&, const Vector&, DrawKey) {
    return GradSample{Vector::Zero(1), Vector::Zero(1)};
  };
  s.g_value = [](const Vector&, const Vector&, DrawKey) { return 0.0; };
  return s;
}

TEST(GhatValue, ToyPlugIn) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(1), c1(2), c1(0)};
  EXPECT_DOUBLE_EQ(ghat_value(toy, u, c1(1), c1(0), {1.0, 0.0}), -1.0);
}

TEST(GhatValue, ZeroWhenInnerPointIsYWithInactivePenalty) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(2), c1(1), c1(0.4)};  // H = -1
  EXPECT_EQ(ghat_value(toy, u, u.y, c1(0), {1.0, 0.0}), 0.0);
}

TEST(GhatValue, VanishesAtLowerSolutionWithReferenceSaddle) {
  for (const ProblemSpec& spec : {make_toy(0.0), make_quad({2, 2, 2}, 4)}) {
    RngStream rng(5, 5);
    for (int t = 0; t < 10; ++t) {
      const Vector x = rng.uniform_in(spec.X);
      const ReferenceSolution low = solve_lower(spec, x);
      const ALParams params{1.0, 0.5};
      const ReferenceSolution sad = solve_saddle(spec, x, low.multiplier, params);
      const JointPoint u{x, low.point, low.multiplier};
      // E <= v with equality at z = lambda*(x).
      EXPECT_NEAR(ghat_value(spec, u, sad.point, sad.multiplier, params), 0.0, 1e-8);
    }
  }
}

TEST(GhatGrad, ZeroNoiseAtReferenceSaddleEqualsExactGradient) {
  for (const ProblemSpec& spec : {make_toy(0.0), make_quad({2, 2, 2}, 4, 0.0, 0.0)}) {
    RngStream rng(6, 6);
    for (int t = 0; t < 20; ++t) {
      const JointPoint u = testing::random_interior_point(spec, rng, 3.0);
      const ALParams params{1.0, 0.7};
      const ReferenceSolution sad = solve_saddle(spec, u.x, u.z, params);
      RngStream batch(t, 1);
      const PsiGrad g = ghat_grad(spec, u, sad.point, sad.multiplier, params, 3, batch);
      const PsiGrad e = exact_ghat_grad(spec, u, params);
      EXPECT_LE(rel_error(concat(g.gx, g.gy, g.gz), concat(e.gx, e.gy, e.gz)), 1e-6);
    }
  }
}

TEST(GhatGrad, MatchedMultiplierGivesZeroGz) {
  const ProblemSpec spec = make_quad({2, 2, 2}, 4);
  const JointPoint u{Vector::Zero(2), Vector::Zero(2), Vector::Constant(2, 0.3)};
  RngStream rng(1, 1);
  EXPECT_EQ(ghat_grad(spec, u, Vector::Zero(2), u.z, {1, 2}, 1, rng).gz, Vector::Zero(2));
}

TEST(GhatGrad, ZeroBatchThrows) {
  const ProblemSpec toy = make_toy(0.1);
  RngStream rng(1, 1);
  EXPECT_THROW(ghat_grad(toy, {c1(1), c1(1), c1(0)}, c1(1), c1(0), {1, 1}, 0, rng), ConfigError);
}

TEST(GhatGrad, VarianceShrinksWithBatch) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(1), c1(1.5), c1(0.5)};
  auto variance = [&](long q) {
    const int N = 4000;
    double s1 = 0, s2 = 0;
    RngStream rng(q, 2);
    for (int i = 0; i < N; ++i) {
      const double v = ghat_grad(toy, u, c1(1.2), c1(2.0), {1, 1}, q, rng).gy[0];
      s1 += v;
      s2 += v * v;
    }
    return s2 / N - (s1 / N) * (s1 / N);
  };
  const double ratio = variance(1) / variance(100);
  EXPECT_GT(ratio, 100 / 1.5);
  EXPECT_LT(ratio, 100 * 1.5);
}

TEST(GhatGrad, AdditiveNoiseCancelsInX) {
  // The same draw enters both x-gradients, so Gaussian noise cancels there.
  const ProblemSpec toy = make_toy(0.5);
  const JointPoint u{c1(1), c1(1.5), c1(0.5)};
  RngStream a(1, 1), b(2, 2);
  const double ga = ghat_grad(toy, u, c1(1.2), c1(2.0), {1, 1}, 1, a).gx[0];
  const double gb = ghat_grad(toy, u, c1(1.2), c1(2.0), {1, 1}, 1, b).gx[0];
  EXPECT_NEAR(ga, gb, 1e-12);
}

TEST(PsiValue, Examples) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(2), c1(1), c1(0)};
  EXPECT_EQ(psi_value(toy, u, u.y, c1(0), {3, 4}, {1, 0}), toy.F_value(u.x, u.y));
  const ProblemSpec s = constant_spec();
  const JointPoint v{c1(0.5), c1(0.5), Vector::Zero(2)};
  EXPECT_DOUBLE_EQ(ghat_value(s, v, c1(0.5), Vector::Zero(2), {1, 0}), -1.0);
  EXPECT_DOUBLE_EQ(psi_value(s, v, c1(0.5), Vector::Zero(2), {1, 1}, {1, 0}), 2.0);
}

TEST(PsiGrad, NoPenaltyReducesToUpperGradient) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(1.3), c1(0.7), c1(0.5)};
  RngStream ru(3, 1), rl(3, 2), ru2(3, 1);
  const PsiGrad g = psi_grad(toy, u, c1(1.0), c1(1.0), {0, 0}, {1, 1}, 5, 2, ru, rl);
  const GradSample f = batch_mean_grad(toy.grad_f, u.x, u.y, 5, ru2);
  EXPECT_EQ(g.gx, f.gx);
  EXPECT_EQ(g.gy, f.gy);
  EXPECT_EQ(g.gz, c1(0));
}

TEST(PsiGrad, ConsumesExactlyRAndQDraws) {
  const ProblemSpec toy = make_toy(0.1);
  const JointPoint u{c1(1.3), c1(0.7), c1(0.5)};
  RngStream ru(3, 1), rl(3, 2);
  psi_grad(toy, u, c1(1.0), c1(1.0), {1, 1}, {1, 1}, 7, 4, ru, rl);
  EXPECT_EQ(ru.counter(), 7u);
  EXPECT_EQ(rl.counter(), 4u);
}

TEST(PsiGrad, FeasiblePointHasNoConstraintPenaltyGradient) {
  const ProblemSpec spec = make_quad({2, 2, 2}, 4, 0.1, 0.1);
  RngStream rng(8, 8);
  int checked = 0;
  while (checked < 100) {
    const JointPoint u = testing::random_interior_point(spec, rng, 2.0);
    if (!(spec.H_values(u.x, u.y).array() <= 0).all()) continue;
    const SampleBatch batch{rng.next_keys(2), rng.next_keys(2)};
    const PsiGrad a = psi_grad(spec, u, u.y, u.z, {1, 0}, {1, 1}, batch);
    const PsiGrad b = psi_grad(spec, u, u.y, u.z, {1, 5}, {1, 1}, batch);
    EXPECT_EQ(a, b);
    ++checked;
  }
}

TEST(PsiGrad, ZeroNoiseAtReferenceSaddleIsDeterministicPenalizedGradient) {
  const ProblemSpec spec = make_quad({2, 2, 2}, 4, 0.0, 0.0);
  const JointPoint u{Vector::Constant(2, 0.3), Vector::Constant(2, 0.8), Vector::Constant(2, 0.6)};
  const ALParams params{1.0, 1.0};
  const PenaltyParams pen{2.0, 3.0};
  const ReferenceSolution sad = solve_saddle(spec, u.x, u.z, params);
  const PsiGrad exact = exact_penalized_grad(spec, u, pen, params);
  for (long r : {1L, 7L}) {
    RngStream ru(r, 1), rl(r, 2);
    const PsiGrad g = psi_grad(spec, u, sad.point, sad.multiplier, pen, params, r, 3, ru, rl);
    EXPECT_LE(std::sqrt(squared_distance(g, exact)), 1e-12 * (1 + std::sqrt(exact.squared_norm())));
  }
}

TEST(PsiGrad, MatchesFiniteDifferencesOfExactPenalizedObjective) {
  for (const ProblemSpec& spec : {make_toy(0.0), make_quad({2, 2, 2}, 4, 0.0, 0.0)}) {
    RngStream rng(9, 9);
    const ALParams params{1.0, 1.0};
    const PenaltyParams pen{1.5, 2.0};
    int checked = 0;
    while (checked < 10) {
      const JointPoint u = testing::random_interior_point(spec, rng, 2.0);
      if (spec.H_values(u.x, u.y).cwiseAbs().minCoeff() <= 1e-3) continue;
      const ReferenceSolution sad = solve_saddle(spec, u.x, u.z, params);
      const SampleBatch batch{rng.next_keys(1), rng.next_keys(1)};
      const PsiGrad g = psi_grad(spec, u, sad.point, sad.multiplier, pen, params, batch);
      const auto f = [&](const Vector& v) {
        return exact_penalized_value(spec, testing::split(v, spec.m, spec.n, spec.p), pen, params);
      };
      const Vector fd = testing::fd_gradient(f, concat(u.x, u.y, u.z));
      EXPECT_LE(rel_error(concat(g.gx, g.gy, g.gz), fd), 1e-5) << spec.name;
      ++checked;
    }
  }
}

TEST(PsiGradExpected, MatchesMeanOfStochasticGradients) {
  const ProblemSpec toy = make_toy(0.3);
  const JointPoint u{c1(1.3), c1(0.7), c1(0.5)};
  const PsiGrad e = psi_grad_expected(toy, u, c1(1.1), c1(0.9), {1, 1}, {1, 1});
  PsiGrad acc{Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)};
  const int N = 40000;
  RngStream ru(1, 1), rl(1, 2);
  for (int i = 0; i < N; ++i) acc += psi_grad(toy, u, c1(1.1), c1(0.9), {1, 1}, {1, 1}, 1, 1, ru, rl);
  acc *= 1.0 / N;
  EXPECT_NEAR(acc.gx[0], e.gx[0], 4 * 0.3 / std::sqrt(N));
  EXPECT_NEAR(acc.gy[0], e.gy[0], 4 * 0.3 * std::sqrt(2.0) / std::sqrt(N));
  EXPECT_NEAR(acc.gz[0], e.gz[0], 1e-9);
}

}  // namespace
}  // namespace blevel
