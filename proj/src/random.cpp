#include "cfl/random.hpp"

#include <cmath>

namespace cfl {

std::uint64_t mix_seed(std::uint64_t x) {
  // SplitMix64 finalizer (Steele, Lea, Flood 2014).
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t label) {
  return mix_seed(base ^ mix_seed(label));
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(mix_seed(seed)) {}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() {
  // 53 mantissa bits, shifted into the open interval so log() is safe.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

double RandomStream::exponential(double rate) {
  return -std::log(uniform()) / rate;
}

int RandomStream::geometric_trials(double success) {
  if (success >= 1.0) return 1;
  const double fail = 1.0 - success;
  // P(N > k) = fail^k on support {1, 2, ...}.
  const double draws = std::floor(std::log(uniform()) / std::log(fail));
  return 1 + static_cast<int>(draws);
}

RandomStream RandomStream::spawn() { return RandomStream(mix_seed(engine_())); }

}  // namespace cfl
