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

#include <memory>
#include <vector>

#include "blevel/core.hpp"
#include "blevel/rng.hpp"

namespace blevel {

/// exact_grad + N(0, sigma^2 I), drawn from rng.
inline GradSample gaussian_grad_oracle(const GradSample& exact_grad,
                                       double sigma, RngStream& rng) {
  if (!(sigma >= 0)) throw ConfigError("noise level sigma must be >= 0");
  GradSample out = exact_grad;
  if (sigma == 0.0) return out;
  for (Eigen::Index i = 0; i < out.gx.size(); ++i) out.gx[i] += sigma * rng.normal();
  for (Eigen::Index i = 0; i < out.gy.size(); ++i) out.gy[i] += sigma * rng.normal();
  BLEVEL_DEBUG_FINITE(out.gx, "oracle gradient");
  BLEVEL_DEBUG_FINITE(out.gy, "oracle gradient");
  return out;
}

/// Keyed form: the noise is a pure function of the key.
inline GradSample gaussian_grad_oracle(const GradSample& exact_grad,
                                       double sigma, DrawKey key) {
  RngStream rng = noise_stream(key);
  return gaussian_grad_oracle(exact_grad, sigma, rng);
}

/// The raw noise vector (xi_x, xi_y) behind a key.
inline GradSample gaussian_noise(Eigen::Index m, Eigen::Index n, double sigma,
                                 DrawKey key) {
  return gaussian_grad_oracle(GradSample{Vector::Zero(m), Vector::Zero(n)},
                              sigma, key);
}

/// Additive-Gaussian oracle around an exact gradient.
inline NoisyGradFn make_gaussian_oracle(GradFn exact, double sigma) {
  if (!(sigma >= 0)) throw ConfigError("noise level sigma must be >= 0");
  return [exact = std::move(exact), sigma](const Vector& x, const Vector& y,
                                           DrawKey key) {
    return gaussian_grad_oracle(exact(x, y), sigma, key);
  };
}

/// Value oracle consistent with make_gaussian_oracle:
/// g(x, y; xi) = G(x, y) + <xi, (x, y)>, so grad g = grad G + xi.
inline NoisyValueFn make_gaussian_value_oracle(ScalarFn exact, Eigen::Index m,
                                               Eigen::Index n, double sigma) {
  return [exact = std::move(exact), m, n, sigma](const Vector& x,
                                                 const Vector& y, DrawKey key) {
    const GradSample xi = gaussian_noise(m, n, sigma, key);
    return exact(x, y) + xi.gx.dot(x) + xi.gy.dot(y);
  };
}

/// Finite-sum oracle: uniform-with-replacement choice of one component.
inline NoisyGradFn make_finite_sum_oracle(std::vector<GradFn> components) {
  if (components.empty()) throw ConfigError("finite-sum oracle needs components");
  auto shared = std::make_shared<const std::vector<GradFn>>(std::move(components));
  return [shared](const Vector& x, const Vector& y, DrawKey key) {
    RngStream rng = noise_stream(key);
    return (*shared)[rng.uniform_index(shared->size())](x, y);
  };
}

/// Mean of the oracle over the given keys (replayable batch).
inline GradSample batch_mean_grad(const NoisyGradFn& oracle, const Vector& x,
                                  const Vector& y,
                                  const std::vector<DrawKey>& keys) {
  if (keys.empty()) throw ConfigError("batch size must be >= 1");
  GradSample acc = oracle(x, y, keys[0]);
  for (std::size_t l = 1; l < keys.size(); ++l) {
    const GradSample s = oracle(x, y, keys[l]);
    acc.gx += s.gx;
    acc.gy += s.gy;
  }
  const double inv = 1.0 / static_cast<double>(keys.size());
  acc.gx *= inv;
  acc.gy *= inv;
  return acc;
}

/// Mean of `batch` fresh draws from rng.
inline GradSample batch_mean_grad(const NoisyGradFn& oracle, const Vector& x,
                                  const Vector& y, long batch, RngStream& rng) {
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  return batch_mean_grad(oracle, x, y,
                         rng.next_keys(static_cast<std::size_t>(batch)));
}

}  // namespace blevel
