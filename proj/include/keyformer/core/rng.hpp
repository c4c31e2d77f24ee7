#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

/// Portable pseudo-random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard (the 10000th draw of a default-seeded engine is
/// 9981545732273789042). Distributions are implemented here rather than taken
/// from <random>, because the standard distributions are not bit-reproducible
/// across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased uniform integer in [0, n). Requires n > 0.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal via Box-Muller; each call consumes two uniforms.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  /// SplitMix64 mix of a base seed with a list of salts. Used to derive
  /// independent per-subject / per-batch / per-triplet streams.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> salts);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace core
KEYFORMER_END_NAMESPACE
