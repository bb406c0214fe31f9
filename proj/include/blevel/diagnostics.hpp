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
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "blevel/core.hpp"
#include "blevel/reference.hpp"
#include "blevel/salvf.hpp"

namespace blevel {

enum class ProxyWeighting {
  kAuto,          // uniform for constant steps, step-weighted otherwise
  kUniform,       // (1/K) sum (1/alpha_k) |u^{k+1} - u^k|^2
  kStepWeighted,  // (1/sum alpha_k) sum (1/alpha_k) |u^{k+1} - u^k|^2
};

inline double stationarity_proxy(const RunTrace& trace,
                                 ProxyWeighting weighting = ProxyWeighting::kAuto) {
  if (trace.records.empty()) throw ConfigError("stationarity_proxy: empty trace");
  bool constant = true;
  double sum = 0.0, alpha_sum = 0.0;
  for (const auto& r : trace.records) {
    if (!(r.alpha > 0)) throw ConfigError("stationarity_proxy: step must be > 0");
    constant = constant && r.alpha == trace.records.front().alpha;
    sum += r.step_norm2 / r.alpha;
    alpha_sum += r.alpha;
  }
  if (weighting == ProxyWeighting::kAuto)
    weighting = constant ? ProxyWeighting::kUniform : ProxyWeighting::kStepWeighted;
  if (weighting == ProxyWeighting::kUniform)
    return sum / static_cast<double>(trace.records.size());
  return sum / alpha_sum;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log x, log y)
};

/// Least squares of log y on log x.
inline RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionError("fit_rate: length mismatch");
  if (xs.size() < 2) throw ConfigError("fit_rate needs at least 2 points");
  RateFit fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0) || !(ys[i] > 0))
      throw ConfigError("fit_rate: data must be positive");
    fit.points.emplace_back(std::log(xs[i]), std::log(ys[i]));
    mx += fit.points.back().first;
    my += fit.points.back().second;
  }
  const double n = static_cast<double>(xs.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [lx, ly] : fit.points) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (sxx == 0.0) throw ConfigError("fit_rate: abscissae are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

/// G(x, y) - v(x).
inline double lower_gap(const ProblemSpec& spec, const Vector& x, const Vector& y,
                        const ReferenceSolution& ref) {
  return spec.G_value(x, y) - ref.value;
}

inline double lower_gap(const ProblemSpec& spec, const Vector& x, const Vector& y) {
  return lower_gap(spec, x, y, solve_lower(spec, x));
}

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw ConfigError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double iqr(const std::vector<double>& v) {
  return quantile(v, 0.75) - quantile(v, 0.25);
}

/// Two-sided exact binomial sign test of `successes` out of `trials`
/// against probability 1/2.
inline double sign_test(long successes, long trials) {
  if (trials <= 0) return 1.0;
  if (successes < 0 || successes > trials)
    throw ConfigError("sign_test: successes out of range");
  const boost::math::binomial_distribution<double> dist(static_cast<double>(trials), 0.5);
  const double k = static_cast<double>(successes);
  const double lower = boost::math::cdf(dist, k);
  const double upper = successes == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1));
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

/// Paired comparison of the spread of two samples: a seed counts as a win
/// for B when B's value is closer to B's median than A's value is to A's.
struct SpreadComparison {
  double median_a = 0.0;
  double median_b = 0.0;
  double iqr_a = 0.0;
  double iqr_b = 0.0;
  /// iqr_b / iqr_a.
  double ratio = 0.0;
  long wins_b = 0;
  long trials = 0;  // ties are dropped
  double p_value = 1.0;
};

inline SpreadComparison compare_spread(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw ConfigError("compare_spread needs paired nonempty samples");
  SpreadComparison c;
  c.median_a = median(a);
  c.median_b = median(b);
  c.iqr_a = iqr(a);
  c.iqr_b = iqr(b);
  c.ratio = c.iqr_a > 0 ? c.iqr_b / c.iqr_a
                        : (c.iqr_b > 0 ? std::numeric_limits<double>::infinity() : 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = std::abs(a[i] - c.median_a);
    const double db = std::abs(b[i] - c.median_b);
    if (da == db) continue;
    ++c.trials;
    if (db < da) ++c.wins_b;
  }
  c.p_value = sign_test(c.wins_b, c.trials);
  return c;
}

}  // namespace blevel
