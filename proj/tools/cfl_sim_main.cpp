#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfl/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  bool paper = false;
  std::vector<double> deltas;
  std::optional<double> nu_comp;
  std::optional<double> nu_link;
  std::optional<int> n_seeds;
  std::vector<double> nmse_targets;
  std::optional<std::string> out_dir;
  std::optional<int> max_epochs;
  std::optional<int> parity_cap;
  std::optional<double> snr_db;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_flag("--paper", flags.paper,
                "start from the reference 24-device configuration");
  cmd->add_option("--delta", flags.deltas,
                  "coding redundancy delta = c/m (repeatable)");
  cmd->add_option("--nu-comp", flags.nu_comp, "compute heterogeneity factor");
  cmd->add_option("--nu-link", flags.nu_link, "link heterogeneity factor");
  cmd->add_option("--seeds", flags.n_seeds, "number of seeds (1..N)");
  cmd->add_option("--nmse-target", flags.nmse_targets,
                  "convergence NMSE target (repeatable)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--max-epochs", flags.max_epochs, "epoch cap per run");
  cmd->add_option("--parity-cap", flags.parity_cap,
                  "upper bound c_up on the server parity count");
  cmd->add_option("--snr", flags.snr_db, "SNR of the synthetic data in dB");
  cmd->add_option("--mode", flags.mode, "uncoded | coded | both");
}

cfl::ExperimentConfig build_config(const CommonFlags& flags) {
  cfl::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = cfl::load_config_file(flags.config_path);
  } else if (flags.paper) {
    config = cfl::paper_config();
  } else {
    config = cfl::paper_config();  // sensible defaults either way
  }
  if (flags.nu_comp) config.net.nu_comp = *flags.nu_comp;
  if (flags.nu_link) config.net.nu_link = *flags.nu_link;
  if (!flags.deltas.empty()) config.delta_grid = flags.deltas;
  if (flags.n_seeds) {
    config.seeds.clear();
    for (int s = 1; s <= *flags.n_seeds; ++s) config.seeds.push_back(s);
  }
  if (!flags.nmse_targets.empty()) config.nmse_targets = flags.nmse_targets;
  if (flags.out_dir) config.output_dir = *flags.out_dir;
  if (flags.max_epochs) config.max_epochs = *flags.max_epochs;
  if (flags.parity_cap) config.parity_cap = *flags.parity_cap;
  if (flags.snr_db) config.snr_db = *flags.snr_db;
  if (flags.mode) {
    if (*flags.mode == "uncoded") config.mode = cfl::RunMode::kUncoded;
    else if (*flags.mode == "coded") config.mode = cfl::RunMode::kCoded;
    else if (*flags.mode == "both") config.mode = cfl::RunMode::kBoth;
    else throw std::invalid_argument("unknown mode " + *flags.mode);
  }
  for (double delta : config.delta_grid) {
    if (delta < 0.0 || delta >= 1.0) {
      throw std::invalid_argument("delta must lie in [0, 1)");
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coded federated learning planner and simulator"};
  app.require_subcommand(1);

  CommonFlags plan_flags, train_flags, hist_flags, sweep_flags;
  std::vector<double> nu_grid{0.0, 0.1, 0.2};

  CLI::App* plan_cmd = app.add_subcommand(
      "plan", "compute the load distribution, parity count and deadline");
  add_common(plan_cmd, plan_flags);

  CLI::App* train_cmd = app.add_subcommand(
      "train", "simulate training and emit NMSE-vs-time traces");
  add_common(train_cmd, train_flags);

  CLI::App* hist_cmd = app.add_subcommand(
      "histogram", "simulate epoch completion times for both modes");
  add_common(hist_cmd, hist_flags);

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "coding gain and communication load over a heterogeneity grid");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--nu-grid", nu_grid,
                        "heterogeneity values swept on both axes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan_cmd->parsed()) {
      const auto config = build_config(plan_flags);
      std::optional<double> delta;
      if (!plan_flags.deltas.empty()) delta = plan_flags.deltas.front();
      return cfl::cmd_plan(config, delta, std::cout);
    }
    if (train_cmd->parsed()) {
      return cfl::cmd_train(build_config(train_flags), std::cout);
    }
    if (hist_cmd->parsed()) {
      const auto config = build_config(hist_flags);
      const double delta =
          hist_flags.deltas.empty() ? 0.13 : hist_flags.deltas.front();
      return cfl::cmd_histogram(config, delta, std::cout);
    }
    if (sweep_cmd->parsed()) {
      const auto config = build_config(sweep_flags);
      return cfl::cmd_sweep(config, nu_grid, std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cfl::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return cfl::kExitConfigError;
}
