#pragma once

#include <cstdint>

namespace nf {

/// Counter-based deterministic generator. Each output is a pure function of
/// (seed, counter), so the stream can be resumed bit-exactly by restoring the
/// counter. The mixer is the splitmix64 finalizer over seed + k * golden.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t nextU64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double nextUniform() {
    return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; never zero, so it is safe under log.
  double nextUniformOpen() {
    return static_cast<double>((nextU64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (cosine branch). Consumes exactly two
  /// counter increments per draw; no rejection loop.
  double nextNormal();

  /// Uniform integer in [0, n), n > 0. Multiply-shift reduction; consumes
  /// exactly one counter increment.
  std::uint64_t nextBelow(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(nextU64()) * n) >> 64);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Derives an independent stream seed from a base seed and a stream tag, so
/// unrelated consumers (init, batching, noise) never share counters.
std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t tag);

}  // namespace nf
