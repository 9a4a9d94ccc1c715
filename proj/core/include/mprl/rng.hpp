#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mprl {

/// Deterministic xoshiro256++ generator seeded through splitmix64.
/// The algorithm is fixed, so a seed produces the same stream on every
/// platform; nothing in the project uses <random> distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform integer in [0, n). Rejection sampling, so the result is
  /// unbiased for every n. n must be > 0.
  uint64_t below(uint64_t n);

  /// Standard normal via Box-Muller; the spare value is cached.
  double gauss();

  /// Independent stream derived from this generator's seed and a tag.
  Rng fork(uint64_t stream_tag) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<uint64_t, 4> state_{};
  uint64_t seed_ = 0;
  double gauss_spare_ = 0.0;
  bool has_gauss_spare_ = false;
};

}  // namespace mprl
