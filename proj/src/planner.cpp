#include "cfl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace cfl {

double expected_return(const DeviceProfile& profile, int load, double t) {
  if (load < 0) throw std::invalid_argument("negative load");
  if (load == 0) return 0.0;
  return load * return_probability(profile, load, t);
}

int optimal_device_load(const DeviceProfile& profile, double t, int cap) {
  if (cap < 1) throw std::invalid_argument("cap must be >= 1");
  int best_load = 0;
  double best_return = 0.0;
  for (int load = 1; load <= cap; ++load) {
    const double r = expected_return(profile, load, t);
    if (r > best_return) {
      best_return = r;
      best_load = load;
    }
  }
  return best_load;
}

ReturnCurve return_curve(const DeviceProfile& profile, double t, int cap) {
  ReturnCurve curve;
  curve.device_id = profile.device_id;
  curve.deadline = t;
  curve.load_values.resize(cap);
  curve.expected_returns.resize(cap);
  for (int load = 1; load <= cap; ++load) {
    curve.load_values[load - 1] = load;
    curve.expected_returns[load - 1] = expected_return(profile, load, t);
  }
  return curve;
}

namespace {

struct SearchSpec {
  const std::vector<DeviceProfile>* profiles;
  const DeviceProfile* server;
  int total_points = 0;   // m
  int parity_cap = 0;     // c_up for plan(); ignored when fixed
  int fixed_parity = -1;  // >= 0 pins c (plan_with_fixed_delta)
};

double device_cap_return(const DeviceProfile& profile, double t) {
  if (profile.local_points == 0) return 0.0;
  const int load = optimal_device_load(profile, t, profile.local_points);
  return expected_return(profile, load, t);
}

double server_return(const SearchSpec& spec, double t) {
  if (spec.fixed_parity >= 0) {
    if (spec.fixed_parity == 0) return 0.0;
    return expected_return(*spec.server, spec.fixed_parity, t);
  }
  if (spec.parity_cap == 0) return 0.0;
  const int load = optimal_device_load(*spec.server, t, spec.parity_cap);
  return expected_return(*spec.server, load, t);
}

double aggregate_return(const SearchSpec& spec, double t) {
  double sum = server_return(spec, t);
  for (const auto& profile : *spec.profiles) {
    sum += device_cap_return(profile, t);
  }
  return sum;
}

LoadPlan solve(const SearchSpec& spec, const PlanOptions& options) {
  const int m = spec.total_points;
  const double target = static_cast<double>(m);
  // The aggregate may approach m only asymptotically (no parity overshoot
  // available), so feasibility is tested against a slightly slackened target.
  const double slack_target = target * (1.0 - options.feasibility_slack);

  long cap_sum = (spec.fixed_parity >= 0) ? spec.fixed_parity : spec.parity_cap;
  for (const auto& p : *spec.profiles) cap_sum += p.local_points;
  if (cap_sum < m) {
    throw PlanError("plan infeasible: device capacity plus parity cap " +
                    std::to_string(cap_sum) + " cannot cover " +
                    std::to_string(m) + " points");
  }

  LoadPlan result;
  result.tolerance = options.tolerance;
  result.parity_cap = (spec.fixed_parity >= 0) ? spec.fixed_parity : spec.parity_cap;

  if (m == 0) {
    result.per_device_load.assign(spec.profiles->size(), 0);
    return result;
  }

  double hi = 1.0;
  int doublings = 0;
  while (aggregate_return(spec, hi) < slack_target) {
    hi *= 2.0;
    if (++doublings > options.max_doublings) {
      throw PlanError("deadline search failed to bracket the return target");
    }
  }
  double lo = 0.0;
  while (hi - lo > options.time_resolution) {
    const double mid = 0.5 * (lo + hi);
    if (aggregate_return(spec, mid) >= slack_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double t_star = hi;

  result.epoch_deadline = t_star;
  result.per_device_load.reserve(spec.profiles->size());
  for (const auto& profile : *spec.profiles) {
    const int load = profile.local_points == 0
                         ? 0
                         : optimal_device_load(profile, t_star,
                                               profile.local_points);
    result.per_device_load.push_back(load);
  }
  if (spec.fixed_parity >= 0) {
    result.parity_count = spec.fixed_parity;
  } else {
    result.parity_count =
        spec.parity_cap == 0
            ? 0
            : optimal_device_load(*spec.server, t_star, spec.parity_cap);
  }
  result.expected_aggregate_return = aggregate_return(spec, t_star);
  result.redundancy_delta = static_cast<double>(result.parity_count) / m;

  if (result.expected_aggregate_return >= target &&
      result.expected_aggregate_return <= target + options.tolerance) {
    result.band = PlanBand::kInBand;
  } else if (result.expected_aggregate_return > target + options.tolerance) {
    result.band = PlanBand::kOvershoot;
  } else {
    result.band = PlanBand::kAsymptotic;
  }
  return result;
}

int total_points(const std::vector<DeviceProfile>& profiles) {
  int m = 0;
  for (const auto& p : profiles) m += p.local_points;
  return m;
}

}  // namespace

LoadPlan plan(const std::vector<DeviceProfile>& profiles,
              const DeviceProfile& server_profile, int parity_cap,
              const PlanOptions& options) {
  if (parity_cap < 0) throw std::invalid_argument("negative parity cap");
  const int m = total_points(profiles);
  if (m == 0) throw std::invalid_argument("no device holds any data");
  SearchSpec spec{&profiles, &server_profile, m, parity_cap, -1};
  return solve(spec, options);
}

LoadPlan plan_with_fixed_delta(const std::vector<DeviceProfile>& profiles,
                               const DeviceProfile& server_profile,
                               double delta, const PlanOptions& options) {
  if (delta < 0.0 || delta >= 1.0) {
    throw std::invalid_argument("delta must lie in [0, 1)");
  }
  const int m = total_points(profiles);
  if (m == 0) throw std::invalid_argument("no device holds any data");
  const int c = static_cast<int>(std::lround(delta * m));
  if (c > server_profile.local_points) {
    throw PlanError("fixed parity count " + std::to_string(c) +
                    " exceeds server capacity " +
                    std::to_string(server_profile.local_points));
  }
  SearchSpec spec{&profiles, &server_profile, m, c, c};
  return solve(spec, options);
}

}  // namespace cfl
