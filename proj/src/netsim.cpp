#include "cfl/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cfl {

namespace {

std::vector<int> random_permutation(int n, RandomStream& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = std::min(static_cast<int>(rng.uniform() * (i + 1)), i);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace

std::pair<std::vector<DeviceProfile>, DeviceProfile> build_profiles(
    const HeterogeneityConfig& config) {
  if (config.n_devices <= 0 || config.model_dim <= 0 ||
      config.points_per_device < 0) {
    throw std::invalid_argument("invalid heterogeneity config");
  }
  RandomStream rng(derive_seed(config.assignment_seed, 0x70726f66));
  const auto compute_rank = random_permutation(config.n_devices, rng);
  const auto link_rank = random_permutation(config.n_devices, rng);

  std::vector<DeviceProfile> profiles(config.n_devices);
  for (int i = 0; i < config.n_devices; ++i) {
    const double mac_rate =
        std::pow(1.0 - config.nu_comp, compute_rank[i]) * config.base_mac_rate;
    const double link_rate =
        std::pow(1.0 - config.nu_link, link_rank[i]) * config.base_link_rate;
    DeviceProfile& p = profiles[i];
    p.device_id = i;
    p.per_point_compute_time = config.model_dim / mac_rate;
    p.memory_access_rate = 2.0 / p.per_point_compute_time;
    p.packet_time = config.packet_bits() / link_rate;
    p.erasure_prob = config.erasure_prob;
    p.local_points = config.points_per_device;
  }

  DeviceProfile server;
  server.device_id = config.n_devices;
  const double server_mac = config.server_mac_multiplier * config.base_mac_rate;
  server.per_point_compute_time = config.model_dim / server_mac;
  server.memory_access_rate = 2.0 / server.per_point_compute_time;
  server.packet_time = 0.0;
  server.erasure_prob = 0.0;
  server.local_points = config.total_points();
  return {std::move(profiles), server};
}

SyntheticProblem synthesize_problem(int n_devices, int points_per_device,
                                    int model_dim, double snr_db,
                                    RandomStream& rng) {
  if (n_devices <= 0 || points_per_device <= 0 || model_dim <= 0) {
    throw std::invalid_argument("problem dimensions must be positive");
  }
  const int m = n_devices * points_per_device;
  SyntheticProblem problem;
  problem.snr_db = snr_db;
  problem.features.resize(m, model_dim);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < model_dim; ++j) problem.features(r, j) = rng.normal();
  }
  problem.beta_true.resize(model_dim);
  for (int j = 0; j < model_dim; ++j) problem.beta_true(j) = rng.normal();

  const Eigen::VectorXd signal = problem.features * problem.beta_true;
  problem.noise = Eigen::VectorXd::Zero(m);
  if (!std::isinf(snr_db)) {
    const double snr_linear = std::pow(10.0, snr_db / 10.0);
    for (int r = 0; r < m; ++r) problem.noise(r) = rng.normal();
    // Scale the draw so the realized signal-to-noise ratio hits the target
    // exactly; the chi-square wobble of ||z||^2 would otherwise dominate at
    // small m.
    problem.noise *= std::sqrt(signal.squaredNorm() / snr_linear) /
                     problem.noise.norm();
  }
  problem.labels = signal + problem.noise;

  problem.partitions.resize(n_devices);
  for (int i = 0; i < n_devices; ++i) {
    LocalDataset& local = problem.partitions[i];
    local.features =
        problem.features.middleRows(i * points_per_device, points_per_device);
    local.labels =
        problem.labels.segment(i * points_per_device, points_per_device);
  }
  return problem;
}

namespace {

struct LoopGuard {
  double divergence_nmse;
  void check(double value, int epoch) const {
    if (!std::isfinite(value) || value > divergence_nmse) {
      throw DivergenceError("nmse " + std::to_string(value) +
                            " exceeded the divergence guard at epoch " +
                            std::to_string(epoch));
    }
  }
};

}  // namespace

std::vector<EpochTrace> run_uncoded(const SyntheticProblem& problem,
                                    const std::vector<DeviceProfile>& profiles,
                                    double learning_rate, const StopRule& stop,
                                    RandomStream& rng) {
  const int n = static_cast<int>(profiles.size());
  if (static_cast<int>(problem.partitions.size()) != n) {
    throw std::invalid_argument("profiles and data partitions disagree");
  }
  std::vector<RandomStream> device_rng;
  device_rng.reserve(n);
  for (int i = 0; i < n; ++i) device_rng.push_back(rng.spawn());

  int m = 0;
  std::vector<std::vector<int>> full_sets(n);
  for (int i = 0; i < n; ++i) {
    full_sets[i].resize(problem.partitions[i].features.rows());
    std::iota(full_sets[i].begin(), full_sets[i].end(), 0);
    m += static_cast<int>(full_sets[i].size());
  }

  ModelState state{Eigen::VectorXd::Zero(problem.beta_true.size()),
                   learning_rate, 0};
  const LoopGuard guard{stop.divergence_nmse};
  std::vector<EpochTrace> traces;
  traces.push_back(EpochTrace{0, std::numeric_limits<double>::infinity(), {},
                              0.0, 0.0, nmse(state.beta, problem.beta_true),
                              0});

  double cumulative = 0.0;
  for (int epoch = 1; epoch <= stop.max_epochs; ++epoch) {
    EpochTrace trace;
    trace.epoch = epoch;
    trace.deadline = std::numeric_limits<double>::infinity();

    std::vector<PartialGradient> received;
    received.reserve(n);
    double slowest = 0.0;
    for (int i = 0; i < n; ++i) {
      const int load = profiles[i].local_points;
      const DelaySample sample = sample_delay(profiles[i], load, device_rng[i]);
      slowest = std::max(slowest, sample.total);
      trace.arrivals.push_back({profiles[i].device_id, sample.total, true});
      PartialGradient g =
          systematic_gradient(problem.partitions[i], full_sets[i], state.beta);
      g.source = profiles[i].device_id;
      received.push_back(std::move(g));
    }
    PartialGradient no_parity;
    no_parity.vector = Eigen::VectorXd::Zero(state.beta.size());
    state = aggregate_and_step(state, received, no_parity, m);

    cumulative += slowest;
    trace.epoch_duration = slowest;
    trace.cumulative_time = cumulative;
    trace.nmse = nmse(state.beta, problem.beta_true);
    trace.returns = n;
    guard.check(trace.nmse, epoch);
    traces.push_back(std::move(trace));
    if (stop.nmse_target > 0.0 && traces.back().nmse <= stop.nmse_target) break;
  }
  return traces;
}

double parity_upload_delay(const std::vector<DeviceProfile>& profiles,
                           int parity_count, int model_dim) {
  if (parity_count == 0) return 0.0;
  double worst = 0.0;
  for (const auto& profile : profiles) {
    if (profile.local_points == 0) continue;
    // c rows of d+1 values each; tau covers d values per packet.
    const double serialize = parity_count * profile.packet_time *
                             (model_dim + 1.0) / model_dim;
    worst = std::max(worst, serialize / (1.0 - profile.erasure_prob));
  }
  return worst;
}

std::vector<EpochTrace> run_coded(const SyntheticProblem& problem,
                                  const std::vector<DeviceProfile>& profiles,
                                  const DeviceProfile& server_profile,
                                  const LoadPlan& plan, double learning_rate,
                                  const StopRule& stop, RandomStream& rng,
                                  GeneratorFamily family) {
  const int n = static_cast<int>(profiles.size());
  if (static_cast<int>(problem.partitions.size()) != n ||
      static_cast<int>(plan.per_device_load.size()) != n) {
    throw std::invalid_argument("plan/profiles/data size mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (plan.per_device_load[i] > profiles[i].local_points) {
      throw std::invalid_argument("plan load exceeds capacity of device " +
                                  std::to_string(profiles[i].device_id));
    }
  }
  const int c = plan.parity_count;
  if (c > server_profile.local_points) {
    throw std::invalid_argument("parity count exceeds server capacity");
  }

  std::vector<RandomStream> device_rng;
  device_rng.reserve(n);
  for (int i = 0; i < n; ++i) device_rng.push_back(rng.spawn());
  RandomStream server_rng = rng.spawn();
  RandomStream encode_rng = rng.spawn();

  const int d = static_cast<int>(problem.beta_true.size());
  int m = 0;
  for (const auto& part : problem.partitions) {
    m += static_cast<int>(part.features.rows());
  }

  // One-shot distributed encoding. Each device picks its punctured points,
  // weighs its data, and ships c parity rows; only the composite survives
  // at the server.
  CompositeParity composite;
  std::vector<LocalDataset> systematic_data(n);
  std::vector<std::vector<int>> systematic_full(n);
  if (c > 0) {
    std::vector<EncodedShard> shards;
    shards.reserve(n);
    for (int i = 0; i < n; ++i) {
      RandomStream dev_enc = encode_rng.spawn();
      const int load = plan.per_device_load[i];
      const auto sys_set = choose_systematic_set(
          static_cast<int>(problem.partitions[i].features.rows()), load,
          dev_enc);
      const Eigen::VectorXd weights = build_weights(
          profiles[i], load, plan.epoch_deadline, sys_set);
      auto [shard, priv] =
          encode_local(problem.partitions[i], weights, sys_set, c, family,
                       dev_enc, profiles[i].device_id);
      shards.push_back(std::move(shard));
      systematic_data[i].features.resize(load, d);
      systematic_data[i].labels.resize(load);
      for (int k = 0; k < load; ++k) {
        systematic_data[i].features.row(k) =
            problem.partitions[i].features.row(sys_set[k]);
        systematic_data[i].labels(k) = problem.partitions[i].labels(sys_set[k]);
      }
      systematic_full[i].resize(load);
      std::iota(systematic_full[i].begin(), systematic_full[i].end(), 0);
    }
    composite = accumulate_parity(shards);
  } else {
    for (int i = 0; i < n; ++i) {
      const int load = plan.per_device_load[i];
      RandomStream dev_enc = encode_rng.spawn();
      const auto sys_set = choose_systematic_set(
          static_cast<int>(problem.partitions[i].features.rows()), load,
          dev_enc);
      if (load == static_cast<int>(problem.partitions[i].features.rows())) {
        systematic_data[i] = problem.partitions[i];
      } else {
        systematic_data[i].features.resize(load, d);
        systematic_data[i].labels.resize(load);
        for (int k = 0; k < load; ++k) {
          systematic_data[i].features.row(k) =
              problem.partitions[i].features.row(sys_set[k]);
          systematic_data[i].labels(k) =
              problem.partitions[i].labels(sys_set[k]);
        }
      }
      systematic_full[i].resize(load);
      std::iota(systematic_full[i].begin(), systematic_full[i].end(), 0);
    }
  }

  const double upload_delay = parity_upload_delay(profiles, c, d);
  const double t_star = plan.epoch_deadline;

  ModelState state{Eigen::VectorXd::Zero(d), learning_rate, 0};
  const LoopGuard guard{stop.divergence_nmse};
  std::vector<EpochTrace> traces;
  traces.push_back(EpochTrace{0, t_star, {}, 0.0, upload_delay,
                              nmse(state.beta, problem.beta_true), 0});

  double cumulative = upload_delay;
  for (int epoch = 1; epoch <= stop.max_epochs; ++epoch) {
    EpochTrace trace;
    trace.epoch = epoch;
    trace.deadline = t_star;

    std::vector<PartialGradient> received;
    received.reserve(n);
    for (int i = 0; i < n; ++i) {
      const int load = plan.per_device_load[i];
      if (load == 0) continue;
      const DelaySample sample = sample_delay(profiles[i], load, device_rng[i]);
      const bool returned = sample.total <= t_star;
      trace.arrivals.push_back({profiles[i].device_id, sample.total, returned});
      if (!returned) continue;
      PartialGradient g = systematic_gradient(systematic_data[i],
                                              systematic_full[i], state.beta);
      g.source = profiles[i].device_id;
      received.push_back(std::move(g));
    }

    PartialGradient parity;
    parity.vector = Eigen::VectorXd::Zero(d);
    if (c > 0) {
      const DelaySample server_sample =
          sample_delay(server_profile, c, server_rng);
      if (server_sample.total <= t_star) {
        parity = parity_gradient(composite, state.beta);
      }
    }

    state = aggregate_and_step(state, received, parity, m);

    cumulative += t_star;
    trace.epoch_duration = t_star;
    trace.cumulative_time = cumulative;
    trace.nmse = nmse(state.beta, problem.beta_true);
    trace.returns = static_cast<int>(received.size());
    guard.check(trace.nmse, epoch);
    traces.push_back(std::move(trace));
    if (stop.nmse_target > 0.0 && traces.back().nmse <= stop.nmse_target) break;
  }
  return traces;
}

double per_epoch_bits(const std::vector<DeviceProfile>& profiles,
                      const HeterogeneityConfig& config,
                      const std::vector<int>* loads) {
  double bits = 0.0;
  for (size_t i = 0; i < profiles.size(); ++i) {
    if (loads != nullptr && (*loads)[i] == 0) continue;
    // Model download plus gradient upload, inflated by retransmissions.
    bits += 2.0 * config.packet_bits() / (1.0 - profiles[i].erasure_prob);
  }
  return bits;
}

double parity_transfer_bits(const std::vector<DeviceProfile>& profiles,
                            const LoadPlan& plan,
                            const HeterogeneityConfig& config) {
  if (plan.parity_count == 0) return 0.0;
  double bits = 0.0;
  const double row_bits = (1.0 + config.header_overhead) *
                          config.bits_per_value * (config.model_dim + 1.0);
  for (const auto& profile : profiles) {
    if (profile.local_points == 0) continue;
    bits += plan.parity_count * row_bits / (1.0 - profile.erasure_prob);
  }
  return bits;
}

double communication_load(const LoadPlan& plan,
                          const HeterogeneityConfig& config,
                          const std::vector<DeviceProfile>& profiles,
                          double coded_epochs, double uncoded_epochs) {
  const double uncoded_bits =
      uncoded_epochs * per_epoch_bits(profiles, config, nullptr);
  if (uncoded_bits <= 0.0) {
    throw std::invalid_argument("uncoded run transferred no data");
  }
  const double coded_bits =
      parity_transfer_bits(profiles, plan, config) +
      coded_epochs * per_epoch_bits(profiles, config, &plan.per_device_load);
  return coded_bits / uncoded_bits;
}

}  // namespace cfl
