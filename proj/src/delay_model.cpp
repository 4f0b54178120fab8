#include "cfl/delay_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cfl {

namespace {

void check_profile(const DeviceProfile& profile) {
  if (profile.per_point_compute_time <= 0.0 ||
      profile.memory_access_rate <= 0.0 || profile.packet_time < 0.0 ||
      profile.erasure_prob < 0.0 || profile.erasure_prob >= 1.0 ||
      profile.local_points < 0) {
    throw std::invalid_argument("invalid device profile (device " +
                                std::to_string(profile.device_id) + ")");
  }
}

}  // namespace

DelaySample sample_delay(const DeviceProfile& profile, int load,
                         RandomStream& rng) {
  check_profile(profile);
  if (load < 0) throw std::invalid_argument("negative load");
  if (load > profile.local_points) {
    throw std::invalid_argument(
        "load " + std::to_string(load) + " exceeds capacity " +
        std::to_string(profile.local_points) + " of device " +
        std::to_string(profile.device_id));
  }

  DelaySample s;
  if (load > 0) {
    s.compute_fixed = load * profile.per_point_compute_time;
    s.compute_stochastic = rng.exponential(profile.memory_access_rate / load);
  }
  const double success = 1.0 - profile.erasure_prob;
  s.n_down = rng.geometric_trials(success);
  s.n_up = rng.geometric_trials(success);
  s.total = s.compute_fixed + s.compute_stochastic +
            (s.n_down + s.n_up) * profile.packet_time;
  return s;
}

double expected_delay(const DeviceProfile& profile, int load) {
  check_profile(profile);
  if (load < 0) throw std::invalid_argument("negative load");
  return load * (profile.per_point_compute_time +
                 1.0 / profile.memory_access_rate) +
         2.0 * profile.packet_time / (1.0 - profile.erasure_prob);
}

double return_probability(const DeviceProfile& profile, int load, double t) {
  check_profile(profile);
  if (load < 1) throw std::invalid_argument("return_probability needs load >= 1");
  if (std::isinf(t)) return 1.0;

  const double fixed = load * profile.per_point_compute_time;
  const double rate = profile.memory_access_rate / load;
  const double tau = profile.packet_time;
  const double p = profile.erasure_prob;

  if (tau == 0.0) {
    // Communication is free; only the shifted exponential matters.
    if (t <= fixed) return 0.0;
    return 1.0 - std::exp(-rate * (t - fixed));
  }
  if (t < fixed + 2.0 * tau) return 0.0;

  const double q = 1.0 - p;
  const long k_max = static_cast<long>(std::floor((t - fixed) / tau));
  double sum = 0.0;
  double mass_seen = 0.0;
  double p_pow = 1.0;  // p^(k-2)
  for (long k = 2; k <= k_max; ++k) {
    const double pk = static_cast<double>(k - 1) * p_pow * q * q;
    const double slack = t - fixed - static_cast<double>(k) * tau;
    sum += pk * (1.0 - std::exp(-rate * slack));
    mass_seen += pk;
    if (1.0 - mass_seen < 1e-16) break;  // negligible tail
    p_pow *= p;
  }
  if (sum < 0.0) return 0.0;
  if (sum > 1.0) return 1.0;
  return sum;
}

}  // namespace cfl
