#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfl/netsim.hpp"

namespace cfl {

enum class RunMode { kUncoded, kCoded, kBoth };

/// Exit codes shared by the library entry points and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitDivergence = 4;

struct ExperimentConfig {
  HeterogeneityConfig net;
  double learning_rate = 0.0085;
  double snr_db = 0.0;
  std::vector<double> delta_grid{0.13, 0.16, 0.28};
  std::vector<double> nmse_targets{3e-4};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";
  RunMode mode = RunMode::kBoth;
  int max_epochs = 3000;
  int parity_cap = 0;          // c_up for the `plan` command
  double eps_return = 1.0;     // eps of the deadline search band
  bool fixed_assignment = false;  // reuse net.assignment_seed for every run
  int histogram_epochs = 500;
};

/// The reference configuration: 24 devices, d = 500, 300 points each,
/// learning rate 0.0085, 1536 KMAC/s and 216 kbit/s base rates, 10% packet
/// header, p = 0.1, server 10x the fastest device. Noise is unit variance
/// per sample (snr_db = 10 log10(d), about 27 dB over the synthetic
/// signal), which puts the least-squares error floor near 1.4e-4 so the
/// usual NMSE targets are reachable. The parity cap is 0.28 * m.
ExperimentConfig paper_config();

ExperimentConfig load_config_file(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);
std::string plan_to_json(const LoadPlan& plan);

/// One simulated training run, uniquely identified by (mode, delta, seed).
struct RunResult {
  std::string run_id;
  RunMode mode = RunMode::kUncoded;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::optional<LoadPlan> plan;
  double parity_delay = 0.0;
  std::vector<EpochTrace> traces;
};

/// Build profiles + problem for a seed and run one mode. Coded runs plan
/// with plan_with_fixed_delta(delta); delta = 0 degenerates to an uncoded
/// run. All randomness derives from the seed.
RunResult run_single(const ExperimentConfig& config, std::uint64_t seed,
                     RunMode mode, double delta);

/// First time at which the NMSE trace crosses the target, linearly
/// interpolated between epochs; nullopt when the run never reaches it.
std::optional<double> convergence_time(const std::vector<EpochTrace>& traces,
                                       double target);
/// Same crossing expressed in (fractional) epochs past epoch 0.
std::optional<double> convergence_epochs(const std::vector<EpochTrace>& traces,
                                         double target);

double median(std::vector<double> values);

/// Gain and communication-load summary of one sweep cell at one delta.
struct CellSummary {
  double nu_comp = 0.0;
  double nu_link = 0.0;
  double delta = 0.0;
  double nmse_target = 0.0;
  int n_seeds = 0;
  int uncoded_converged = 0;
  int coded_converged = 0;
  double uncoded_time = 0.0;      // median wall-clock to target
  double coded_time = 0.0;        // median wall-clock incl. parity upload
  double coded_train_time = 0.0;  // median excluding the parity upload
  double gain_total = 0.0;        // uncoded_time / coded_time
  double gain_training = 0.0;     // uncoded_time / coded_train_time
  double comm_load_ratio = 0.0;   // coded bits / uncoded bits, median
};

/// Evaluate one (nu_comp, nu_link, delta, target) cell over the config's
/// seeds. Uncoded runs are shared across deltas by the sweep driver.
CellSummary summarize_cell(const ExperimentConfig& config, double nu_comp,
                           double nu_link, double delta, double nmse_target);

/// Run `jobs` indexed tasks on up to `threads` workers (CFL_SIM_THREADS
/// caps the count; 0 picks the hardware default).
void parallel_for(int jobs, int threads, const std::function<void(int)>& fn);
int thread_budget();

/// plan | train | histogram | sweep entry points; each returns an exit
/// code and writes CSV + JSON manifests under config.output_dir.
int cmd_plan(const ExperimentConfig& config, std::optional<double> delta,
             std::ostream& out);
int cmd_train(const ExperimentConfig& config, std::ostream& out);
int cmd_histogram(const ExperimentConfig& config, double delta,
                  std::ostream& out);
int cmd_sweep(const ExperimentConfig& config,
              const std::vector<double>& nu_grid, std::ostream& out);

}  // namespace cfl
