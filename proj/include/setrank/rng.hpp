// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace setrank {

// splitmix64 finalizer, used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Combines a base seed with a stream id into a new seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic random source. All sampling goes through the explicit
// helpers below instead of <random> distributions so that sequences are
// reproducible bit-for-bit regardless of the standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), unbiased via rejection. n must be > 0.
  Eigen::Index uniform_index(Eigen::Index n);

  // Fisher-Yates shuffle driven by uniform_index.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (Eigen::Index i = static_cast<Eigen::Index>(v.size()) - 1; i > 0; --i) {
      Eigen::Index j = uniform_index(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

private:
  std::uint64_t state_[4];
  std::uint64_t rotl(std::uint64_t x, int k) const;
};

}  // namespace setrank
