#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cfl/delay_model.hpp"

namespace cfl {

/// Thrown when no epoch deadline can make the expected aggregate return
/// reach the total number of raw data points.
class PlanError : public std::runtime_error {
 public:
  explicit PlanError(const std::string& what) : std::runtime_error(what) {}
};

/// Where the expected aggregate return at t* landed relative to the
/// [m, m + eps] band. `asymptotic` marks the degenerate case where the
/// aggregate only approaches m in the limit (e.g. no parity budget) and the
/// search accepted m * (1 - slack).
enum class PlanBand { kInBand, kOvershoot, kAsymptotic };

struct LoadPlan {
  std::vector<int> per_device_load;  // systematic points per device
  int parity_count = 0;              // c, parity rows processed by the server
  double epoch_deadline = 0.0;       // t*, seconds
  double tolerance = 1.0;            // eps of the return band
  int parity_cap = 0;                // c_up
  double expected_aggregate_return = 0.0;
  double redundancy_delta = 0.0;     // c / m
  PlanBand band = PlanBand::kInBand;
};

/// Expected individual return curve over a load grid at a fixed deadline.
struct ReturnCurve {
  int device_id = 0;
  double deadline = 0.0;
  std::vector<int> load_values;
  std::vector<double> expected_returns;
};

struct PlanOptions {
  double tolerance = 1.0;          // eps on the aggregate return
  double time_resolution = 1e-3;   // bisection stops below this bracket width
  double feasibility_slack = 1e-6; // relative slack for asymptotic targets
  int max_doublings = 80;
};

/// E[R_i(t; load)] = load * P{T_i <= t}; zero for load = 0.
double expected_return(const DeviceProfile& profile, int load, double t);

/// Exhaustive integer argmax of expected_return over {0, ..., cap};
/// ties break toward the smaller load.
int optimal_device_load(const DeviceProfile& profile, double t, int cap);

ReturnCurve return_curve(const DeviceProfile& profile, double t, int cap);

/// Smallest deadline t* such that the devices' optimal returns plus the
/// server's optimal parity return cover all m raw points; fixes the parity
/// count c and the per-device systematic loads at that deadline.
LoadPlan plan(const std::vector<DeviceProfile>& profiles,
              const DeviceProfile& server_profile, int parity_cap,
              const PlanOptions& options = {});

/// Same search with the parity count pinned to round(delta * m); the server
/// return is capped at exactly c instead of being optimized.
LoadPlan plan_with_fixed_delta(const std::vector<DeviceProfile>& profiles,
                               const DeviceProfile& server_profile,
                               double delta, const PlanOptions& options = {});

}  // namespace cfl
