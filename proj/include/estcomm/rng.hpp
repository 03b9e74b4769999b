#pragma once

#include <cstdint>
#include <limits>

namespace estcomm {

/// Counter-based, splittable generator. The n-th output is a pure function of
/// (key, n), so a stream can be forked into independent children by index
/// without touching shared state. The mixing function is the SplitMix64
/// finalizer.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  /// Independent stream for trial `index` of experiment `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(seed).split(index); }

  /// Child stream; does not advance this generator.
  Rng split(std::uint64_t index) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ULL));
    child.counter_ = 0;
    return child;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Rademacher signs drawn 64 at a time.
class SignStream {
 public:
  explicit SignStream(Rng& rng) : rng_(rng) {}
  double next() {
    if (left_ == 0) {
      bits_ = rng_.next();
      left_ = 64;
    }
    const double s = (bits_ & 1ULL) ? 1.0 : -1.0;
    bits_ >>= 1;
    --left_;
    return s;
  }

 private:
  Rng& rng_;
  std::uint64_t bits_ = 0;
  int left_ = 0;
};

}  // namespace estcomm
