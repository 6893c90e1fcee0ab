// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace semc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with all distributions implemented locally, so streams are
/// identical across platforms and standard-library versions. State is four
/// words and serializes trivially into checkpoints.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller; consumes exactly two draws per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  /// Standard Gumbel(0, 1) noise.
  double gumbel() {
    const double u = std::max(uniform(), 1e-300);
    return -std::log(-std::log(std::min(u, 1.0 - 1e-16)));
  }

  /// Uniform integer in [0, n). Modulo bias is below 2^-32 for any n that
  /// fits in 32 bits, which covers every use in this project.
  std::int64_t uniform_int(std::int64_t n) {
    return std::int64_t(next_u64() % std::uint64_t(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; forking does not advance this generator.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t sm = s_[0] ^ rotl(s_[3], 7) ^ (0x632be59bd9b4e019ULL * (stream + 1));
    Rng child(0);
    for (auto& w : child.s_) w = splitmix64(sm);
    return child;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = std::int64_t(v.size()) - 1; i > 0; --i) {
      std::swap(v[std::size_t(i)], v[std::size_t(uniform_int(i + 1))]);
    }
  }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace semc
