#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace tabail {

/// SplitMix64 finalizer. Used to derive independent child keys from a
/// parent key and a counter, so that streams never depend on draw order.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over a label, for turning names (experiment, algorithm) into keys.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A seeded random stream with a splittable key.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Conversions to doubles and integers are done here rather than
/// through <random> distributions, whose algorithms are implementation
/// defined, so results are bit-identical across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix64(seed)), engine_(key_) {}

  std::uint64_t key() const noexcept { return key_; }

  /// Child stream keyed by (this key, counter). Does not advance this stream.
  RngStream derive(std::uint64_t counter) const {
    return RngStream(key_ ^ mix64(counter + 0x632be59bd9b4e019ULL));
  }
  RngStream derive(std::string_view label) const { return derive(hash_label(label)); }

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Inverse-CDF draw from an unnormalized non-negative weight vector.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("RngStream::categorical: no positive weight");
    const double u = uniform() * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      cum += weights[i];
      last_positive = i;
      if (u < cum) return i;
    }
    return last_positive;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace tabail
