// SPDX-License-Identifier: Apache-2.0
//
// xoshiro256** seeded through splitmix64. Children derived with split() are
// independent streams, so components can draw from their own generator
// without perturbing each other's sequences.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace coral8 {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Rng split(std::uint64_t stream);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace coral8
