#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace relayrd {

// Counter-based generator (splitmix64). Restart i of a solve seeds its own
// generator with seed + i, so results are independent of execution order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1); never returns 0 so logs stay finite.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Dirichlet(1,...,1) draw via normalized exponentials.
  std::vector<double> dirichlet(std::size_t k) {
    std::vector<double> v(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      v[i] = -std::log(uniform());
      sum += v[i];
    }
    for (std::size_t i = 0; i < k; ++i) v[i] /= sum;
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace relayrd
