#pragma once

// Seeded random streams with reproducible substream derivation.
// Every scalar draw consumes exactly one engine output, so a stream's
// state after k draws is identical on every platform.

#include <cmath>
#include <cstdint>
#include <random>

namespace ldet {

// Mixing function used to spread seed entropy and derive substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  // Independent stream addressed by (seed, salt); used to keep training,
  // characterization and test draws on disjoint substreams.
  RngStream derive(std::uint64_t salt) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(salt + 0x51ed2701a3c5e0f7ULL)));
  }

  std::uint64_t raw() { return eng_(); }

  // Uniform on the open interval (0,1); safe under log().
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // Standard normal via the inverse CDF; one draw consumed.
  double gaussian();

  // Laplace(0,1) via inverse CDF; one draw consumed.
  double laplace() {
    const double v = uniform() - 0.5;
    const double s = (v < 0.0) ? -1.0 : 1.0;
    return -s * std::log(1.0 - 2.0 * (v < 0.0 ? -v : v));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, m); one draw consumed.
  std::uint64_t below(std::uint64_t m) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(m)) % m;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace ldet
