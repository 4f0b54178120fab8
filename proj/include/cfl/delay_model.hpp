#pragma once

#include <cstdint>

#include "cfl/random.hpp"

namespace cfl {

/// Compute and link parameters of one participant. The same struct models
/// the central server as a pseudo-device with tau = 0 and erasure_prob = 0
/// (its parity gradients never cross a wireless link).
struct DeviceProfile {
  int device_id = 0;
  double per_point_compute_time = 0.0;  // a, seconds per data point
  double memory_access_rate = 0.0;      // mu, 1/seconds
  double packet_time = 0.0;             // tau, seconds per packet
  double erasure_prob = 0.0;            // p in [0, 1)
  int local_points = 0;                 // ell, capacity in data points
};

/// One realization of the round-trip delay of a device processing `load`
/// points: deterministic compute, stochastic compute (memory access),
/// and download/upload transmission counts.
struct DelaySample {
  double compute_fixed = 0.0;
  double compute_stochastic = 0.0;
  int n_down = 1;
  int n_up = 1;
  double total = 0.0;
};

/// Draw one round-trip delay. Compute time is load * a plus an exponential
/// term with rate mu / load; each link direction retransmits geometrically
/// with success probability 1 - p. load = 0 samples communication only.
/// Throws std::invalid_argument when load exceeds the profile capacity.
DelaySample sample_delay(const DeviceProfile& profile, int load,
                         RandomStream& rng);

/// Mean round-trip delay: load * (a + 1/mu) + 2 * tau / (1 - p).
double expected_delay(const DeviceProfile& profile, int load);

/// P{T <= t} for a device processing `load` >= 1 points, evaluated
/// analytically. The transmission-count sum N_down + N_up of two iid
/// geometrics is negative binomial: P{N = k} = (k-1) p^(k-2) (1-p)^2 for
/// k >= 2, and each term is weighted by the exponential CDF evaluated at
/// the time left after fixed compute and k packet slots.
double return_probability(const DeviceProfile& profile, int load, double t);

}  // namespace cfl
