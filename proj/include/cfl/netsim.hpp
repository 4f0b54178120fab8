#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "cfl/delay_model.hpp"
#include "cfl/encoder.hpp"
#include "cfl/planner.hpp"
#include "cfl/trainer.hpp"

namespace cfl {

/// Population parameters: device i ranked r gets MAC rate
/// (1 - nu_comp)^r * base_mac_rate and link rate (1 - nu_link)^r *
/// base_link_rate, with compute and link ranks assigned by independent
/// random permutations.
struct HeterogeneityConfig {
  int n_devices = 24;
  double nu_comp = 0.0;
  double nu_link = 0.0;
  double base_mac_rate = 1536e3;   // MAC operations per second
  double base_link_rate = 216e3;   // bits per second
  int model_dim = 500;             // d
  int points_per_device = 300;     // ell
  double erasure_prob = 0.1;       // p, all links
  double header_overhead = 0.1;    // fraction added to each packet
  int bits_per_value = 32;
  double server_mac_multiplier = 10.0;
  std::uint64_t assignment_seed = 0;

  int total_points() const { return n_devices * points_per_device; }
  /// One packet carries a d-vector (model or partial gradient).
  double packet_bits() const {
    return (1.0 + header_overhead) * bits_per_value * model_dim;
  }
};

/// Linear ground truth y = X beta + z with iid standard normal X.
struct SyntheticProblem {
  Eigen::MatrixXd features;   // m x d
  Eigen::VectorXd labels;     // m
  Eigen::VectorXd beta_true;  // d
  Eigen::VectorXd noise;      // m
  double snr_db = 0.0;
  std::vector<LocalDataset> partitions;  // contiguous, one per device
};

struct ArrivalRecord {
  int device_id = 0;
  double delay = 0.0;
  bool returned = false;
};

struct EpochTrace {
  int epoch = 0;
  double deadline = 0.0;  // infinity for uncoded epochs
  std::vector<ArrivalRecord> arrivals;
  double epoch_duration = 0.0;
  double cumulative_time = 0.0;
  double nmse = 0.0;
  int returns = 0;  // devices whose gradient arrived in time
};

struct StopRule {
  int max_epochs = 3000;
  double nmse_target = 0.0;  // stop once nmse <= target (0 disables)
  double divergence_nmse = 1e6;
};

/// Derive per-device profiles and the server pseudo-profile from the
/// population parameters: a_i = d / MACR_i, mu_i = 2 / a_i (50% memory
/// access overhead), tau_i = packet_bits / link_rate_i. The server runs at
/// server_mac_multiplier times the fastest device with tau = 0, p = 0.
std::pair<std::vector<DeviceProfile>, DeviceProfile> build_profiles(
    const HeterogeneityConfig& config);

/// Generate the regression instance and its contiguous per-device split.
/// Noise variance is set so that ||X beta||^2 / ||z||^2 matches the target
/// SNR; snr_db = +infinity produces exactly zero noise.
SyntheticProblem synthesize_problem(int n_devices, int points_per_device,
                                    int model_dim, double snr_db,
                                    RandomStream& rng);

/// Uncoded federated learning: every epoch waits for all m partial
/// gradients, so the epoch duration is the max over device delays.
std::vector<EpochTrace> run_uncoded(const SyntheticProblem& problem,
                                    const std::vector<DeviceProfile>& profiles,
                                    double learning_rate, const StopRule& stop,
                                    RandomStream& rng);

/// One-time cost of shipping every device's c parity rows (d+1 values per
/// row) to the server; devices upload in parallel, each over its own link,
/// and the expected retransmission inflation 1/(1-p) is charged.
double parity_upload_delay(const std::vector<DeviceProfile>& profiles,
                           int parity_count, int model_dim);

/// Coded federated learning: devices are encoded once up front (cost
/// charged as parity_upload_delay), then every epoch lasts exactly the
/// planned deadline and aggregates the parity gradient with whichever
/// systematic gradients arrived in time.
std::vector<EpochTrace> run_coded(const SyntheticProblem& problem,
                                  const std::vector<DeviceProfile>& profiles,
                                  const DeviceProfile& server_profile,
                                  const LoadPlan& plan, double learning_rate,
                                  const StopRule& stop, RandomStream& rng,
                                  GeneratorFamily family =
                                      GeneratorFamily::kGaussian);

/// Expected bits moved per training epoch (model download + gradient
/// upload for every participating device, retransmissions included).
double per_epoch_bits(const std::vector<DeviceProfile>& profiles,
                      const HeterogeneityConfig& config,
                      const std::vector<int>* loads = nullptr);

/// Total bits of the one-time parity transfer, all devices.
double parity_transfer_bits(const std::vector<DeviceProfile>& profiles,
                            const LoadPlan& plan,
                            const HeterogeneityConfig& config);

/// Ratio of total bits moved by the coded run to the uncoded run, both
/// measured to convergence (possibly fractional epoch counts).
double communication_load(const LoadPlan& plan,
                          const HeterogeneityConfig& config,
                          const std::vector<DeviceProfile>& profiles,
                          double coded_epochs, double uncoded_epochs);

}  // namespace cfl
