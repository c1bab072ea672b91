#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace morel {

/// Counter-based random stream.
///
/// Every draw is a pure function of (key, counter), so a stream can be
/// reproduced from its key alone and child streams can be derived by name or
/// index without touching the parent's position. Outputs are identical on
/// every platform because no standard-library distribution is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t hash(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  Rng split(std::string_view name) const { return from_key(mix(key_ ^ mix(hash(name)))); }
  Rng split(std::uint64_t index) const {
    return from_key(mix(key_ + mix(index ^ 0x243f6a8885a308d3ULL)));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++ * 0xd1b54a32d192ed03ULL)); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal() {
    // Box-Muller without caching keeps the stream position a function of the
    // number of draws only.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double exponential() { return -std::log(uniform()); }

  /// Samples an index from a probability vector (need not be normalized).
  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // rounding: land on the last index with positive mass
    for (std::size_t i = probs.size(); i-- > 0;)
      if (probs[i] > 0.0) return i;
    return probs.size() - 1;
  }

 private:
  static Rng from_key(std::uint64_t key) {
    Rng r;
    r.key_ = key;
    return r;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace morel
