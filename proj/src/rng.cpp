#include "nf/rng.hpp"

#include <cmath>

namespace nf {

double CounterRng::nextNormal() {
  const double u1 = nextUniformOpen();
  const double u2 = nextUniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed ^ (tag * 0xD1B54A32575A1AC5ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nf
