#include "cfl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cfl {

namespace {

using nlohmann::json;

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kUncoded: return "uncoded";
    case RunMode::kCoded: return "coded";
    case RunMode::kBoth: return "both";
  }
  return "?";
}

void write_atomic(const std::filesystem::path& path,
                  const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

json heterogeneity_to_json(const HeterogeneityConfig& net) {
  return json{{"n_devices", net.n_devices},
              {"nu_comp", net.nu_comp},
              {"nu_link", net.nu_link},
              {"base_mac_rate", net.base_mac_rate},
              {"base_link_rate", net.base_link_rate},
              {"model_dim", net.model_dim},
              {"points_per_device", net.points_per_device},
              {"erasure_prob", net.erasure_prob},
              {"header_overhead", net.header_overhead},
              {"bits_per_value", net.bits_per_value},
              {"server_mac_multiplier", net.server_mac_multiplier},
              {"assignment_seed", net.assignment_seed}};
}

}  // namespace

ExperimentConfig paper_config() {
  ExperimentConfig config;
  config.net = HeterogeneityConfig{};
  config.learning_rate = 0.0085;
  config.snr_db = 10.0 * std::log10(config.net.model_dim);
  config.delta_grid = {0.13, 0.16, 0.28};
  config.nmse_targets = {3e-4};
  config.seeds = {1, 2, 3, 4, 5};
  config.max_epochs = 3000;
  config.parity_cap =
      static_cast<int>(std::lround(0.28 * config.net.total_points()));
  return config;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error: " + std::string(e.what()));
  }
  ExperimentConfig config = j.value("paper_defaults", true)
                                ? paper_config()
                                : ExperimentConfig{};
  auto& net = config.net;
  if (j.contains("n_devices")) net.n_devices = j["n_devices"];
  if (j.contains("nu_comp")) net.nu_comp = j["nu_comp"];
  if (j.contains("nu_link")) net.nu_link = j["nu_link"];
  if (j.contains("base_mac_rate")) net.base_mac_rate = j["base_mac_rate"];
  if (j.contains("base_link_rate")) net.base_link_rate = j["base_link_rate"];
  if (j.contains("model_dim")) net.model_dim = j["model_dim"];
  if (j.contains("points_per_device"))
    net.points_per_device = j["points_per_device"];
  if (j.contains("erasure_prob")) net.erasure_prob = j["erasure_prob"];
  if (j.contains("header_overhead"))
    net.header_overhead = j["header_overhead"];
  if (j.contains("bits_per_value")) net.bits_per_value = j["bits_per_value"];
  if (j.contains("server_mac_multiplier"))
    net.server_mac_multiplier = j["server_mac_multiplier"];
  if (j.contains("assignment_seed")) {
    net.assignment_seed = j["assignment_seed"];
    config.fixed_assignment = true;
  }
  if (j.contains("fixed_assignment"))
    config.fixed_assignment = j["fixed_assignment"];
  if (j.contains("learning_rate")) config.learning_rate = j["learning_rate"];
  if (j.contains("snr_db")) {
    if (j["snr_db"].is_string() && j["snr_db"] == "inf") {
      config.snr_db = std::numeric_limits<double>::infinity();
    } else {
      config.snr_db = j["snr_db"];
    }
  }
  if (j.contains("delta_grid"))
    config.delta_grid = j["delta_grid"].get<std::vector<double>>();
  if (j.contains("nmse_targets"))
    config.nmse_targets = j["nmse_targets"].get<std::vector<double>>();
  if (j.contains("seeds"))
    config.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("output_dir")) config.output_dir = j["output_dir"];
  if (j.contains("mode")) {
    const std::string m = j["mode"];
    if (m == "uncoded") config.mode = RunMode::kUncoded;
    else if (m == "coded") config.mode = RunMode::kCoded;
    else if (m == "both") config.mode = RunMode::kBoth;
    else throw std::invalid_argument("unknown mode " + m);
  }
  if (j.contains("max_epochs")) config.max_epochs = j["max_epochs"];
  if (j.contains("parity_cap")) config.parity_cap = j["parity_cap"];
  if (j.contains("eps_return")) config.eps_return = j["eps_return"];
  if (j.contains("histogram_epochs"))
    config.histogram_epochs = j["histogram_epochs"];

  for (double delta : config.delta_grid) {
    if (delta < 0.0 || delta >= 1.0) {
      throw std::invalid_argument("delta_grid values must lie in [0, 1)");
    }
  }
  if (config.seeds.empty()) {
    throw std::invalid_argument("at least one seed is required");
  }
  return config;
}

std::string config_to_json(const ExperimentConfig& config) {
  json j = heterogeneity_to_json(config.net);
  j["learning_rate"] = config.learning_rate;
  j["snr_db"] = std::isinf(config.snr_db) ? json("inf") : json(config.snr_db);
  j["delta_grid"] = config.delta_grid;
  j["nmse_targets"] = config.nmse_targets;
  j["seeds"] = config.seeds;
  j["output_dir"] = config.output_dir;
  j["mode"] = mode_name(config.mode);
  j["max_epochs"] = config.max_epochs;
  j["parity_cap"] = config.parity_cap;
  j["eps_return"] = config.eps_return;
  j["fixed_assignment"] = config.fixed_assignment;
  j["histogram_epochs"] = config.histogram_epochs;
  return j.dump(2);
}

std::string plan_to_json(const LoadPlan& plan) {
  json j;
  j["per_device_load"] = plan.per_device_load;
  j["parity_count"] = plan.parity_count;
  j["epoch_deadline_s"] = plan.epoch_deadline;
  j["tolerance"] = plan.tolerance;
  j["parity_cap"] = plan.parity_cap;
  j["expected_aggregate_return"] = plan.expected_aggregate_return;
  j["redundancy_delta"] = plan.redundancy_delta;
  switch (plan.band) {
    case PlanBand::kInBand: j["band"] = "in_band"; break;
    case PlanBand::kOvershoot: j["band"] = "overshoot"; break;
    case PlanBand::kAsymptotic: j["band"] = "asymptotic"; break;
  }
  return j.dump(2);
}

namespace {

HeterogeneityConfig net_for_seed(const ExperimentConfig& config,
                                 std::uint64_t seed) {
  HeterogeneityConfig net = config.net;
  if (!config.fixed_assignment) {
    net.assignment_seed = derive_seed(seed, 0x61737369);
  }
  return net;
}

double min_target(const ExperimentConfig& config) {
  double t = 0.0;
  for (double x : config.nmse_targets) t = (t == 0.0) ? x : std::min(t, x);
  return t;
}

}  // namespace

RunResult run_single(const ExperimentConfig& config, std::uint64_t seed,
                     RunMode mode, double delta) {
  if (mode == RunMode::kBoth) {
    throw std::invalid_argument("run_single needs a concrete mode");
  }
  const HeterogeneityConfig net = net_for_seed(config, seed);
  auto [profiles, server] = build_profiles(net);

  RandomStream problem_rng(derive_seed(seed, 0x70726f62));
  const SyntheticProblem problem =
      synthesize_problem(net.n_devices, net.points_per_device, net.model_dim,
                         config.snr_db, problem_rng);

  StopRule stop;
  stop.max_epochs = config.max_epochs;
  stop.nmse_target = min_target(config);

  RunResult result;
  result.mode = mode;
  result.delta = (mode == RunMode::kUncoded) ? 0.0 : delta;
  result.seed = seed;

  std::ostringstream id;
  id << mode_name(mode) << "_d" << result.delta << "_s" << seed;
  result.run_id = id.str();

  if (mode == RunMode::kUncoded || delta == 0.0) {
    RandomStream rng(derive_seed(seed, 0x756e636f));
    result.mode = RunMode::kUncoded;
    result.traces =
        run_uncoded(problem, profiles, config.learning_rate, stop, rng);
    return result;
  }

  PlanOptions options;
  options.tolerance = config.eps_return;
  LoadPlan plan = plan_with_fixed_delta(profiles, server, delta, options);
  result.plan = plan;
  result.parity_delay =
      parity_upload_delay(profiles, plan.parity_count, net.model_dim);
  RandomStream rng(derive_seed(seed, 0x636f6465));
  result.traces = run_coded(problem, profiles, server, plan,
                            config.learning_rate, stop, rng);
  return result;
}

std::optional<double> convergence_time(const std::vector<EpochTrace>& traces,
                                       double target) {
  for (size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].nmse <= target) {
      if (i == 0) return traces[i].cumulative_time;
      const auto& prev = traces[i - 1];
      const auto& cur = traces[i];
      const double span = cur.nmse - prev.nmse;
      const double frac = (span == 0.0) ? 1.0 : (target - prev.nmse) / span;
      return prev.cumulative_time +
             frac * (cur.cumulative_time - prev.cumulative_time);
    }
  }
  return std::nullopt;
}

std::optional<double> convergence_epochs(const std::vector<EpochTrace>& traces,
                                         double target) {
  for (size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].nmse <= target) {
      if (i == 0) return 0.0;
      const auto& prev = traces[i - 1];
      const auto& cur = traces[i];
      const double span = cur.nmse - prev.nmse;
      const double frac = (span == 0.0) ? 1.0 : (target - prev.nmse) / span;
      return (prev.epoch - traces[0].epoch) + frac * (cur.epoch - prev.epoch);
    }
  }
  return std::nullopt;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int thread_budget() {
  if (const char* env = std::getenv("CFL_SIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CellSummary summarize_cell(const ExperimentConfig& config, double nu_comp,
                           double nu_link, double delta, double nmse_target) {
  ExperimentConfig cell = config;
  cell.net.nu_comp = nu_comp;
  cell.net.nu_link = nu_link;
  cell.nmse_targets = {nmse_target};

  CellSummary summary;
  summary.nu_comp = nu_comp;
  summary.nu_link = nu_link;
  summary.delta = delta;
  summary.nmse_target = nmse_target;
  summary.n_seeds = static_cast<int>(cell.seeds.size());

  std::vector<double> uncoded_times, coded_times, coded_train_times, ratios;
  for (const std::uint64_t seed : cell.seeds) {
    const RunResult uncoded =
        run_single(cell, seed, RunMode::kUncoded, 0.0);
    const RunResult coded = run_single(cell, seed, RunMode::kCoded, delta);
    const auto tu = convergence_time(uncoded.traces, nmse_target);
    const auto tc = convergence_time(coded.traces, nmse_target);
    if (tu) ++summary.uncoded_converged;
    if (tc) ++summary.coded_converged;
    uncoded_times.push_back(
        tu ? *tu : std::numeric_limits<double>::infinity());
    coded_times.push_back(tc ? *tc
                             : std::numeric_limits<double>::infinity());
    coded_train_times.push_back(
        tc ? *tc - coded.parity_delay
           : std::numeric_limits<double>::infinity());
    if (tu && tc && coded.plan) {
      const auto eu = convergence_epochs(uncoded.traces, nmse_target);
      const auto ec = convergence_epochs(coded.traces, nmse_target);
      const HeterogeneityConfig net = net_for_seed(cell, seed);
      auto [profiles, server] = build_profiles(net);
      ratios.push_back(
          communication_load(*coded.plan, net, profiles, *ec, *eu));
    }
  }
  summary.uncoded_time = median(uncoded_times);
  summary.coded_time = median(coded_times);
  summary.coded_train_time = median(coded_train_times);
  summary.gain_total = summary.uncoded_time / summary.coded_time;
  summary.gain_training = summary.uncoded_time / summary.coded_train_time;
  summary.comm_load_ratio = ratios.empty() ? 0.0 : median(ratios);
  return summary;
}

namespace {

std::string traces_to_csv(const RunResult& run,
                          const ExperimentConfig& config) {
  std::ostringstream csv;
  csv << "run_id,mode,delta,nu_comp,nu_link,epoch,cumulative_time_s,nmse,"
         "returns\n";
  for (const auto& t : run.traces) {
    csv << run.run_id << ',' << mode_name(run.mode) << ','
        << fmt_double(run.delta) << ',' << fmt_double(config.net.nu_comp)
        << ',' << fmt_double(config.net.nu_link) << ',' << t.epoch << ','
        << fmt_double(t.cumulative_time) << ',' << fmt_double(t.nmse) << ','
        << t.returns << '\n';
  }
  return csv.str();
}

std::string run_manifest(const RunResult& run, const ExperimentConfig& config,
                         const std::string& csv_name) {
  json j;
  j["run_id"] = run.run_id;
  j["mode"] = mode_name(run.mode);
  j["delta"] = run.delta;
  j["seed"] = run.seed;
  j["parity_upload_delay_s"] = run.parity_delay;
  j["csv"] = csv_name;
  j["config"] = json::parse(config_to_json(config));
  if (run.plan) j["plan"] = json::parse(plan_to_json(*run.plan));
  return j.dump(2);
}

}  // namespace

int cmd_plan(const ExperimentConfig& config, std::optional<double> delta,
             std::ostream& out) {
  try {
    ExperimentConfig cfg = config;
    if (cfg.parity_cap <= 0) cfg.parity_cap = cfg.net.total_points();
    const HeterogeneityConfig net = net_for_seed(cfg, cfg.seeds.front());
    auto [profiles, server] = build_profiles(net);
    PlanOptions options;
    options.tolerance = cfg.eps_return;
    const LoadPlan result =
        delta ? plan_with_fixed_delta(profiles, server, *delta, options)
              : plan(profiles, server, cfg.parity_cap, options);

    out << "parity rows c        : " << result.parity_count << "\n"
        << "redundancy delta     : " << result.redundancy_delta << "\n"
        << "epoch deadline t* (s): " << result.epoch_deadline << "\n"
        << "expected return      : " << result.expected_aggregate_return
        << " of " << net.total_points() << "\n"
        << "device loads         :";
    for (int load : result.per_device_load) out << ' ' << load;
    out << "\n";

    const auto dir = std::filesystem::path(cfg.output_dir);
    write_atomic(dir / "plan.json", plan_to_json(result));
    write_atomic(dir / "plan_manifest.json", config_to_json(cfg));
    return kExitOk;
  } catch (const PlanError& e) {
    out << "planning infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    out << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

int cmd_train(const ExperimentConfig& config, std::ostream& out) {
  try {
    const auto dir = std::filesystem::path(config.output_dir);
    std::vector<std::pair<RunMode, double>> jobs;
    if (config.mode != RunMode::kCoded) jobs.push_back({RunMode::kUncoded, 0.0});
    if (config.mode != RunMode::kUncoded) {
      for (double delta : config.delta_grid) {
        if (delta > 0.0) jobs.push_back({RunMode::kCoded, delta});
      }
    }
    std::vector<std::pair<std::pair<RunMode, double>, std::uint64_t>> cells;
    for (const auto& job : jobs) {
      for (const auto seed : config.seeds) cells.push_back({job, seed});
    }
    std::mutex mutex;
    parallel_for(static_cast<int>(cells.size()), thread_budget(), [&](int i) {
      const auto [job, seed] = cells[i];
      const RunResult run = run_single(config, seed, job.first, job.second);
      const std::string csv_name = "train_" + run.run_id + ".csv";
      write_atomic(dir / csv_name, traces_to_csv(run, config));
      write_atomic(dir / ("train_" + run.run_id + ".manifest.json"),
                   run_manifest(run, config, csv_name));
      std::lock_guard<std::mutex> lock(mutex);
      out << run.run_id << ": " << run.traces.size() - 1 << " epochs, final nmse "
          << run.traces.back().nmse << "\n";
    });
    return kExitOk;
  } catch (const DivergenceError& e) {
    out << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const PlanError& e) {
    out << "planning infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    out << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

namespace {

/// Delay-only simulation of epoch times. For the uncoded mode the epoch
/// ends when the last of the m partial gradients lands; for the coded mode
/// the epoch lasts t_star and cover_time records when the systematic
/// returns would have covered m - c points (infinity when they never do).
struct EpochTimes {
  std::vector<double> durations;
  std::vector<double> cover_times;
};

EpochTimes simulate_epoch_times(const std::vector<DeviceProfile>& profiles,
                                const LoadPlan* plan, int epochs,
                                RandomStream& rng) {
  const int n = static_cast<int>(profiles.size());
  std::vector<RandomStream> device_rng;
  device_rng.reserve(n);
  for (int i = 0; i < n; ++i) device_rng.push_back(rng.spawn());

  int m = 0;
  for (const auto& p : profiles) m += p.local_points;
  const int needed = plan ? m - plan->parity_count : m;

  EpochTimes result;
  result.durations.reserve(epochs);
  result.cover_times.reserve(epochs);
  for (int e = 0; e < epochs; ++e) {
    std::vector<std::pair<double, int>> arrivals;  // (delay, points)
    for (int i = 0; i < n; ++i) {
      const int load = plan ? plan->per_device_load[i] : profiles[i].local_points;
      if (load == 0) continue;
      const DelaySample s = sample_delay(profiles[i], load, device_rng[i]);
      arrivals.push_back({s.total, load});
    }
    std::sort(arrivals.begin(), arrivals.end());
    double cover = std::numeric_limits<double>::infinity();
    int points = 0;
    for (const auto& [delay, load] : arrivals) {
      points += load;
      if (points >= needed) {
        cover = delay;
        break;
      }
    }
    result.cover_times.push_back(cover);
    result.durations.push_back(plan ? plan->epoch_deadline
                                    : (arrivals.empty() ? 0.0
                                                        : arrivals.back().first));
  }
  return result;
}

}  // namespace

int cmd_histogram(const ExperimentConfig& config, double delta,
                  std::ostream& out) {
  try {
    const HeterogeneityConfig net = net_for_seed(config, config.seeds.front());
    auto [profiles, server] = build_profiles(net);
    PlanOptions options;
    options.tolerance = config.eps_return;
    const LoadPlan coded_plan =
        plan_with_fixed_delta(profiles, server, delta, options);

    RandomStream uncoded_rng(derive_seed(config.seeds.front(), 0x68697374));
    RandomStream coded_rng(derive_seed(config.seeds.front(), 0x68697375));
    const EpochTimes uncoded = simulate_epoch_times(
        profiles, nullptr, config.histogram_epochs, uncoded_rng);
    const EpochTimes coded = simulate_epoch_times(
        profiles, &coded_plan, config.histogram_epochs, coded_rng);

    std::ostringstream csv;
    csv << "mode,delta,epoch,duration_s,cover_time_s\n";
    for (int e = 0; e < config.histogram_epochs; ++e) {
      csv << "uncoded,0," << e << ',' << fmt_double(uncoded.durations[e])
          << ',' << fmt_double(uncoded.cover_times[e]) << '\n';
    }
    for (int e = 0; e < config.histogram_epochs; ++e) {
      csv << "coded," << fmt_double(delta) << ',' << e << ','
          << fmt_double(coded.durations[e]) << ','
          << fmt_double(coded.cover_times[e]) << '\n';
    }
    const auto dir = std::filesystem::path(config.output_dir);
    write_atomic(dir / "epoch_times.csv", csv.str());

    json manifest = json::parse(config_to_json(config));
    manifest["delta"] = delta;
    manifest["plan"] = json::parse(plan_to_json(coded_plan));
    write_atomic(dir / "epoch_times.manifest.json", manifest.dump(2));

    std::vector<double> sorted = uncoded.durations;
    std::sort(sorted.begin(), sorted.end());
    const double p95 = sorted[static_cast<size_t>(0.95 * (sorted.size() - 1))];
    out << "uncoded median " << median(uncoded.durations) << " s, p95 " << p95
        << " s; coded deadline " << coded_plan.epoch_deadline << " s\n";
    return kExitOk;
  } catch (const PlanError& e) {
    out << "planning infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    out << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

int cmd_sweep(const ExperimentConfig& config,
              const std::vector<double>& nu_grid, std::ostream& out) {
  try {
    struct Cell {
      double nu_comp, nu_link, delta, target;
    };
    std::vector<Cell> cells;
    for (double nu_comp : nu_grid) {
      for (double nu_link : nu_grid) {
        for (double target : config.nmse_targets) {
          for (double delta : config.delta_grid) {
            if (delta > 0.0) cells.push_back({nu_comp, nu_link, delta, target});
          }
        }
      }
    }
    std::vector<CellSummary> summaries(cells.size());
    parallel_for(static_cast<int>(cells.size()), thread_budget(), [&](int i) {
      summaries[i] = summarize_cell(config, cells[i].nu_comp, cells[i].nu_link,
                                    cells[i].delta, cells[i].target);
    });

    std::ostringstream csv;
    csv << "nu_comp,nu_link,delta,nmse_target,n_seeds,uncoded_converged,"
           "coded_converged,uncoded_time_s,coded_time_s,coded_train_time_s,"
           "gain_total,gain_training,comm_load_ratio,best_delta\n";
    for (size_t i = 0; i < summaries.size(); ++i) {
      const auto& s = summaries[i];
      // Best delta per (cell, target) by training-time gain among deltas
      // whose coded runs actually reached the target.
      bool best = s.coded_converged * 2 > s.n_seeds;
      for (const auto& other : summaries) {
        if (other.nu_comp == s.nu_comp && other.nu_link == s.nu_link &&
            other.nmse_target == s.nmse_target &&
            other.coded_converged * 2 > other.n_seeds &&
            other.gain_training > s.gain_training) {
          best = false;
        }
      }
      csv << fmt_double(s.nu_comp) << ',' << fmt_double(s.nu_link) << ','
          << fmt_double(s.delta) << ',' << fmt_double(s.nmse_target) << ','
          << s.n_seeds << ',' << s.uncoded_converged << ','
          << s.coded_converged << ',' << fmt_double(s.uncoded_time) << ','
          << fmt_double(s.coded_time) << ',' << fmt_double(s.coded_train_time)
          << ',' << fmt_double(s.gain_total) << ','
          << fmt_double(s.gain_training) << ','
          << fmt_double(s.comm_load_ratio) << ',' << (best ? 1 : 0) << '\n';
      out << "(" << s.nu_comp << "," << s.nu_link << ") delta " << s.delta
          << " target " << s.nmse_target << ": gain " << s.gain_training
          << " (total " << s.gain_total << "), load ratio "
          << s.comm_load_ratio << "\n";
    }
    const auto dir = std::filesystem::path(config.output_dir);
    write_atomic(dir / "sweep.csv", csv.str());
    json manifest = json::parse(config_to_json(config));
    manifest["nu_grid"] = nu_grid;
    write_atomic(dir / "sweep.manifest.json", manifest.dump(2));
    return kExitOk;
  } catch (const DivergenceError& e) {
    out << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const PlanError& e) {
    out << "planning infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    out << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace cfl
