#include "mprl/rng.hpp"

#include <cmath>

#include "mprl/error.hpp"

namespace mprl {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
  uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

uint64_t Rng::below(uint64_t n) {
  require(n > 0, ErrorKind::Contract, "Rng::below requires n > 0");
  uint64_t threshold = -n % n;  // reject the biased low range
  for (;;) {
    uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::gauss() {
  if (has_gauss_spare_) {
    has_gauss_spare_ = false;
    return gauss_spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  gauss_spare_ = radius * std::sin(angle);
  has_gauss_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::fork(uint64_t stream_tag) const {
  uint64_t mix = seed_;
  uint64_t a = splitmix64(mix);
  mix ^= 0x6a09e667f3bcc909ULL + stream_tag;
  uint64_t b = splitmix64(mix);
  return Rng(a ^ rotl(b, 31) ^ stream_tag);
}

}  // namespace mprl
