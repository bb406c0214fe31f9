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
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "blevel/diagnostics.hpp"
#include "blevel/problems.hpp"
#include "blevel/salvf.hpp"
#include "test_util.hpp"

namespace blevel {
namespace {

Vector c1(double v) { return Vector::Constant(1, v); }

OuterConfig toy_config(long K = 300) {
  OuterConfig c;
  c.K = K;
  c.alpha = 0.02;
  c.r = c.q = 1;
  c.pen = {2.0, 40.0};
  c.al = {1.0, 0.05};
  c.inner.s = 20;
  c.inner.eta = 0.5;
  c.inner.rho = 20.0;
  c.B = 10.0;
  c.init = InitMode::kUniform;
  return c;
}

TEST(SelectIndex, FrequenciesFollowStepSizes) {
  const std::vector<double> alphas{1, 2, 3, 4};
  std::vector<double> counts(4, 0);
  RngStream rng(1, 1);
  const int N = 100000;
  for (int i = 0; i < N; ++i) counts[select_index(alphas, rng)] += 1;
  double chi2 = 0;
  for (int k = 0; k < 4; ++k) {
    const double expect = N * alphas[k] / 10.0;
    chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
  }
  const boost::math::chi_squared_distribution<double> dist(3);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3);
}

TEST(SelectIndex, SingleStepAlwaysZero) {
  RngStream rng(1, 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_index({0.3}, rng), 0);
}

TEST(SelectIndex, RejectsBadSteps) {
  RngStream rng(1, 1);
  EXPECT_THROW(select_index({}, rng), ConfigError);
  EXPECT_THROW(select_index({1.0, 0.0}, rng), ConfigError);
}

TEST(SelectIndex, DecreasingStepsFavourEarlyIterates) {
  OuterConfig c;
  c.alpha = 1;
  c.step_schedule = StepSchedule::kCubeRoot;
  std::vector<double> alphas;
  for (long k = 0; k < 1000; ++k) alphas.push_back(c.step(k));
  RngStream rng(2, 2);
  long early = 0;
  const int N = 20000;
  for (int i = 0; i < N; ++i) early += select_index(alphas, rng) < 500;
  double mass = 0, total = 0;
  for (long k = 0; k < 1000; ++k) (k < 500 ? mass : total) += alphas[k];
  const double p_early = mass / (mass + total);
  EXPECT_GT(p_early, 0.5);
  EXPECT_NEAR(static_cast<double>(early) / N, p_early, 0.015);
}

TEST(Salvf, SingleIterationOutputsInitialPoint) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(1);
  const RunTrace t = salvf_run(toy, c, 3);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.R, 0);
  EXPECT_EQ(t.uR, initial_point(toy, c, 3));
}

TEST(Salvf, NoPenaltyIsProjectedGradientOnF) {
  const ProblemSpec toy = make_toy(0.0);
  OuterConfig c = toy_config(50);
  c.pen = {0.0, 0.0};
  c.alpha = 0.05;
  c.init = InitMode::kCenter;
  const RunTrace t = salvf_run(toy, c, 1);
  Vector x = toy.X.center(), y = toy.Y.center();
  for (long k = 0; k < c.K; ++k) {
    const auto& rec = t.records[static_cast<std::size_t>(k)];
    EXPECT_NEAR(rec.u.x[0], x[0], 1e-12);
    EXPECT_NEAR(rec.u.y[0], y[0], 1e-12);
    EXPECT_EQ(rec.u.z[0], 0.0);
    const GradSample g = toy.grad_F(x, y);
    x = project_box(x - c.alpha * g.gx, toy.X);
    y = project_box(y - c.alpha * g.gy, toy.Y);
  }
}

TEST(Salvf, IteratesStayInDomain) {
  for (const ProblemSpec& spec : {make_toy(0.5), make_quad({2, 2, 2}, 3, 0.5, 0.5)}) {
    OuterConfig c = toy_config(300);
    c.alpha = 0.2;
    c.B.reset();
    const JointDomain dom = joint_domain(spec, c);
    const RunTrace t = salvf_run(spec, c, 9);
    for (const auto& rec : t.records) EXPECT_TRUE(dom.contains(rec.u)) << spec.name;
    EXPECT_TRUE(dom.contains(t.u_final));
  }
}

TEST(Salvf, SampleAccountingIsExact) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(40);
  c.r = 3;
  c.q = 2;
  c.inner.s = 7;
  c.feasibility_refine = true;
  c.s_refine = 11;
  const RunTrace t = salvf_run(toy, c, 5);
  EXPECT_EQ(t.upper_samples, 40 * 3);
  EXPECT_EQ(t.lower_samples, 40 * (7 + 2) + 11);
  EXPECT_EQ(t.records.back().upper_samples, 120);
  EXPECT_EQ(t.records.back().lower_samples, 40 * 9);
}

TEST(Salvf, DeterministicPerSeed) {
  const ProblemSpec spec = make_quad({2, 2, 2}, 3, 0.2, 0.2);
  const OuterConfig c = toy_config(100);
  const RunTrace a = salvf_run(spec, c, 11);
  const RunTrace b = salvf_run(spec, c, 11);
  const RunTrace d = salvf_run(spec, c, 12);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].u, b.records[k].u);
    EXPECT_EQ(a.records[k].step_norm2, b.records[k].step_norm2);
  }
  EXPECT_EQ(a.R, b.R);
  EXPECT_FALSE(a.u_final == d.u_final);
}

TEST(Salvf, DivergenceAbortCarriesPartialTrace) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(50);
  c.divergence_threshold = 1e-6;
  try {
    salvf_run(toy, c, 1);
    FAIL() << "expected RunAborted";
  } catch (const RunAborted& e) {
    EXPECT_EQ(e.iteration(), 0);
    EXPECT_TRUE(e.partial().records.empty());
  }
}

TEST(Salvf, ConfigValidation) {
  const ProblemSpec toy = make_toy(0.1);
  auto bad = [&](auto mutate) {
    OuterConfig c = toy_config(10);
    mutate(c);
    EXPECT_THROW(salvf_run(toy, c, 1), ConfigError);
  };
  bad([](OuterConfig& c) { c.K = 0; });
  bad([](OuterConfig& c) { c.alpha = 0; });
  bad([](OuterConfig& c) { c.r = 0; });
  bad([](OuterConfig& c) { c.q = 0; });
  bad([](OuterConfig& c) { c.inner.s = 0; });
  bad([](OuterConfig& c) { c.B = -1.0; });
  bad([](OuterConfig& c) { c.pen.c1 = -1; });
  bad([](OuterConfig& c) {
    c.init = InitMode::kCustom;
    c.u0 = JointPoint{c1(5), c1(1), c1(0)};
  });
}

TEST(Salvf, TheoryModeWarnsOnLargeStep) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(5);
  c.theory_mode = true;
  c.L_psi = 100.0;
  EXPECT_EQ(salvf_run(toy, c, 1).warnings.size(), 1u);
  c.L_psi = 1.0;
  EXPECT_TRUE(salvf_run(toy, c, 1).warnings.empty());
}

TEST(Salvf, RecordsSaddleGapWhenAsked) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(20);
  c.record_saddle_gap = true;
  for (const auto& rec : salvf_run(toy, c, 1).records) {
    EXPECT_TRUE(std::isfinite(rec.saddle_gap));
    EXPECT_GE(rec.saddle_gap, 0.0);
  }
}

TEST(Salvf, NoiselessToyApproachesHyperobjectiveMinimizer) {
  const ProblemSpec toy = make_toy(0.0);
  OuterConfig c = toy_config(2500);
  c.init = InitMode::kCenter;
  const RunTrace t = salvf_run(toy, c, 1);
  // Finite penalties move the fixed point to about 0.887.
  EXPECT_NEAR(t.u_final.x[0], 0.98622, 0.15);
  EXPECT_LT(t.records.back().cviol, 1e-2);
}

TEST(FeasibilityRefine, RecoversLowerSolutionOnToy) {
  const ProblemSpec toy = make_toy(0.0);
  OuterConfig c = toy_config();
  c.s_refine = 10000;
  RngStream rng(1, 1);
  const auto [y, z] = feasibility_refine(toy, c1(1), c, c1(1.5), rng);
  EXPECT_LE(std::abs(y[0] - 1.0), 0.05);
  EXPECT_GE(z[0], 0.0);
}

TEST(FeasibilityRefine, ZeroIterationsReturnsWarmStart) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config();
  c.s_refine = 0;
  RngStream rng(1, 1);
  const auto [y, z] = feasibility_refine(toy, c1(1), c, c1(2.25), rng);
  EXPECT_EQ(y[0], 2.25);
  EXPECT_EQ(z[0], 0.0);
}

TEST(FeasibilityRefine, RejectsPointOutsideX) {
  const ProblemSpec toy = make_toy(0.1);
  RngStream rng(1, 1);
  EXPECT_THROW(feasibility_refine(toy, c1(4), toy_config(), c1(1), rng), ConfigError);
}

TEST(FeasibilityRefine, RarelyIncreasesViolation) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config(300);
  c.feasibility_refine = true;
  c.s_refine = 2000;
  int ok = 0;
  const int N = 40;
  for (int seed = 0; seed < N; ++seed) {
    const RunTrace t = salvf_run(toy, c, seed);
    const double before = constraint_violation(toy, t.uR.x, t.uR.y);
    const double after = constraint_violation(toy, t.uR.x, *t.y_refined);
    ok += after <= before + 1e-12;
  }
  EXPECT_GE(ok, 0.9 * N);
}

TEST(InitialPoint, Modes) {
  const ProblemSpec toy = make_toy(0.1);
  OuterConfig c = toy_config();
  c.init = InitMode::kCenter;
  EXPECT_EQ(initial_point(toy, c, 1), (JointPoint{c1(1.5), c1(1.5), c1(0)}));
  c.init = InitMode::kUniform;
  EXPECT_EQ(initial_point(toy, c, 1), initial_point(toy, c, 1));
  EXPECT_FALSE(initial_point(toy, c, 1) == initial_point(toy, c, 2));
  c.init = InitMode::kCustom;
  EXPECT_THROW(initial_point(toy, c, 1), ConfigError);
  c.u0 = JointPoint{c1(1), c1(2), c1(3)};
  EXPECT_EQ(initial_point(toy, c, 1), *c.u0);
}

// Largest gradient-difference ratio over random close pairs.
double sampled_smoothness(const ProblemSpec& spec, const OuterConfig& c) {
  RngStream rng(5, StreamRole::kProbe, 0);
  double L = 0.0;
  for (int t = 0; t < 200; ++t) {
    const JointPoint u = blevel::testing::random_interior_point(spec, rng, 5.0, 1e-2);
    JointPoint v = u;
    v.x[0] += rng.uniform(-1e-3, 1e-3);
    v.y[0] += rng.uniform(-1e-3, 1e-3);
    v.z[0] += rng.uniform(-1e-3, 1e-3);
    const PsiGrad a = exact_penalized_grad(spec, u, c.pen, c.al);
    const PsiGrad b = exact_penalized_grad(spec, v, c.pen, c.al);
    L = std::max(L, std::sqrt(squared_distance(a, b) / squared_distance(u, v)));
  }
  return L;
}

TEST(StationarityProxy, LastQuarterBelowFirstOnNoiselessToy) {
  const ProblemSpec toy = make_toy(0.0);
  OuterConfig c = toy_config(2000);
  c.inner.s = 200;
  c.init = InitMode::kCenter;
  const double L = sampled_smoothness(toy, c);
  c.alpha = 0.9 / (2.0 * L);
  const RunTrace t = salvf_run(toy, c, 1);
  const auto quarter = static_cast<std::ptrdiff_t>(t.records.size() / 4);
  RunTrace head = t, tail = t;
  head.records.resize(static_cast<std::size_t>(quarter));
  tail.records.erase(tail.records.begin(), tail.records.end() - quarter);
  EXPECT_LT(stationarity_proxy(tail), stationarity_proxy(head));
}

}  // namespace
}  // namespace blevel
