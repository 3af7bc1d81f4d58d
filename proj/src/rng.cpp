// SPDX-License-Identifier: Apache-2.0
#include "setrank/rng.hpp"

#include <stdexcept>

namespace setrank {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

Rng::Rng(std::uint64_t seed) {
  // xoshiro256** seeded through splitmix64, per the reference construction.
  std::uint64_t s = seed;
  for (auto& part : state_) {
    s = splitmix64(s);
    part = s;
  }
}

std::uint64_t Rng::rotl(std::uint64_t x, int k) const {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

Eigen::Index Rng::uniform_index(Eigen::Index n) {
  if (n <= 0) {
    throw std::invalid_argument("Rng::uniform_index: n must be positive");
  }
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x = next_u64();
  while (x >= limit) {
    x = next_u64();
  }
  return static_cast<Eigen::Index>(x % un);
}

}  // namespace setrank
