#pragma once

#include <cstdint>
#include <random>

namespace cfl {

/// Deterministic random stream used for every stochastic quantity in the
/// simulator. All transforms are inverse-CDF / Box-Muller on top of a
/// mt19937_64 engine, so a given seed reproduces the exact same draw
/// sequence on every run.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  /// Uniform draw in the open interval (0, 1).
  double uniform();

  /// Standard normal draw (Box-Muller, pairs cached).
  double normal();

  /// Exponential draw with the given rate (mean 1/rate).
  double exponential(double rate);

  /// Number of transmissions until the first success, support {1, 2, ...}.
  /// `success` is the per-attempt success probability (1 - erasure prob).
  int geometric_trials(double success);

  /// Derive an independent child stream. Advances this stream.
  RandomStream spawn();

  std::uint64_t next_u64();

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer, used to decorrelate user-facing seeds and to derive
/// labeled substreams deterministically.
std::uint64_t mix_seed(std::uint64_t x);

/// Combine a base seed with a stream label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t label);

}  // namespace cfl
