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
#include <numbers>
#include <vector>

#include "blevel/core.hpp"

namespace blevel {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Roles of the independent sample streams of one run.
enum class StreamRole : std::uint64_t {
  kInner = 1,       // xi^k, inner loop
  kUpper = 2,       // zeta^k
  kLowerOuter = 3,  // xi-tilde^k
  kIndex = 4,       // output index R
  kRefine = 5,      // feasibility refinement
  kInit = 6,        // random u^0
  kProbe = 7,       // test-only probes
};

inline constexpr std::uint64_t stream_id(StreamRole role, std::uint64_t k) {
  return (static_cast<std::uint64_t>(role) << 56) ^ (k & 0x00ffffffffffffffULL);
}

/// Counter-based random stream: the i-th output is a pure function of
/// (seed, stream_id, i). Copying a stream copies its position.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter),
        base_(hash_combine(splitmix64(seed), stream)) {}

  RngStream(std::uint64_t seed, StreamRole role, std::uint64_t k)
      : RngStream(seed, stream_id(role, k)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return hash_combine(base_, counter_++); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ConfigError("uniform_index: empty range");
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Box-Muller; one pair per two uniforms, cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Vector normal_vector(Eigen::Index dim) {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  Vector uniform_in(const Box& b) {
    Vector v(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
      v[i] = uniform(b.lower[i], b.upper[i]);
    return v;
  }

  /// Key for one oracle draw.
  DrawKey next_key() { return next_u64(); }

  std::vector<DrawKey> next_keys(std::size_t count) {
    std::vector<DrawKey> keys(count);
    for (auto& k : keys) k = next_key();
    return keys;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint64_t base_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream that expands one draw key into the noise it stands for.
inline RngStream noise_stream(DrawKey key) {
  return RngStream(key, 0x6e6f697365ULL);
}

}  // namespace blevel
