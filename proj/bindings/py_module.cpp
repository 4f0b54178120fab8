#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cfl/experiment.hpp"

namespace py = pybind11;
using namespace cfl;

namespace {

py::dict trace_to_dict(const EpochTrace& t) {
  py::dict d;
  d["epoch"] = t.epoch;
  d["deadline"] = t.deadline;
  d["epoch_duration"] = t.epoch_duration;
  d["cumulative_time"] = t.cumulative_time;
  d["nmse"] = t.nmse;
  d["returns"] = t.returns;
  return d;
}

py::list traces_to_list(const std::vector<EpochTrace>& traces) {
  py::list out;
  for (const auto& t : traces) out.append(trace_to_dict(t));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coded federated learning planner and straggler simulator";

  py::register_exception<PlanError>(m, "PlanError");
  py::register_exception<DivergenceError>(m, "DivergenceError");

  py::class_<DeviceProfile>(m, "DeviceProfile")
      .def(py::init<>())
      .def_readwrite("device_id", &DeviceProfile::device_id)
      .def_readwrite("per_point_compute_time",
                     &DeviceProfile::per_point_compute_time)
      .def_readwrite("memory_access_rate", &DeviceProfile::memory_access_rate)
      .def_readwrite("packet_time", &DeviceProfile::packet_time)
      .def_readwrite("erasure_prob", &DeviceProfile::erasure_prob)
      .def_readwrite("local_points", &DeviceProfile::local_points);

  py::class_<LoadPlan>(m, "LoadPlan")
      .def_readonly("per_device_load", &LoadPlan::per_device_load)
      .def_readonly("parity_count", &LoadPlan::parity_count)
      .def_readonly("epoch_deadline", &LoadPlan::epoch_deadline)
      .def_readonly("expected_aggregate_return",
                    &LoadPlan::expected_aggregate_return)
      .def_readonly("redundancy_delta", &LoadPlan::redundancy_delta);

  py::class_<RandomStream>(m, "RandomStream")
      .def(py::init<std::uint64_t>())
      .def("uniform", &RandomStream::uniform)
      .def("normal", &RandomStream::normal);

  py::class_<HeterogeneityConfig>(m, "HeterogeneityConfig")
      .def(py::init<>())
      .def_readwrite("n_devices", &HeterogeneityConfig::n_devices)
      .def_readwrite("nu_comp", &HeterogeneityConfig::nu_comp)
      .def_readwrite("nu_link", &HeterogeneityConfig::nu_link)
      .def_readwrite("base_mac_rate", &HeterogeneityConfig::base_mac_rate)
      .def_readwrite("base_link_rate", &HeterogeneityConfig::base_link_rate)
      .def_readwrite("model_dim", &HeterogeneityConfig::model_dim)
      .def_readwrite("points_per_device",
                     &HeterogeneityConfig::points_per_device)
      .def_readwrite("erasure_prob", &HeterogeneityConfig::erasure_prob)
      .def_readwrite("header_overhead", &HeterogeneityConfig::header_overhead)
      .def_readwrite("bits_per_value", &HeterogeneityConfig::bits_per_value)
      .def_readwrite("server_mac_multiplier",
                     &HeterogeneityConfig::server_mac_multiplier)
      .def_readwrite("assignment_seed", &HeterogeneityConfig::assignment_seed)
      .def("total_points", &HeterogeneityConfig::total_points);

  m.def("expected_delay", &expected_delay, py::arg("profile"), py::arg("load"),
        "Mean round-trip delay: load * (a + 1/mu) + 2 tau / (1 - p)");
  m.def("return_probability", &return_probability, py::arg("profile"),
        py::arg("load"), py::arg("t"),
        "Analytic P{T <= t} at the given load");
  m.def(
      "sample_delay",
      [](const DeviceProfile& p, int load, RandomStream& rng) {
        const DelaySample s = sample_delay(p, load, rng);
        py::dict d;
        d["compute_fixed"] = s.compute_fixed;
        d["compute_stochastic"] = s.compute_stochastic;
        d["n_down"] = s.n_down;
        d["n_up"] = s.n_up;
        d["total"] = s.total;
        return d;
      },
      py::arg("profile"), py::arg("load"), py::arg("rng"));

  m.def("expected_return", &expected_return, py::arg("profile"),
        py::arg("load"), py::arg("t"));
  m.def("optimal_device_load", &optimal_device_load, py::arg("profile"),
        py::arg("t"), py::arg("cap"));
  m.def(
      "plan",
      [](const std::vector<DeviceProfile>& profiles,
         const DeviceProfile& server, int parity_cap) {
        return plan(profiles, server, parity_cap);
      },
      py::arg("profiles"), py::arg("server_profile"), py::arg("parity_cap"));
  m.def(
      "plan_with_fixed_delta",
      [](const std::vector<DeviceProfile>& profiles,
         const DeviceProfile& server, double delta) {
        return plan_with_fixed_delta(profiles, server, delta);
      },
      py::arg("profiles"), py::arg("server_profile"), py::arg("delta"));

  m.def(
      "build_profiles",
      [](const HeterogeneityConfig& config) {
        auto [profiles, server] = build_profiles(config);
        return py::make_tuple(profiles, server);
      },
      py::arg("config"));

  m.def(
      "synthesize_problem",
      [](int n_devices, int points_per_device, int model_dim, double snr_db,
         std::uint64_t seed) {
        RandomStream rng(seed);
        const SyntheticProblem p = synthesize_problem(
            n_devices, points_per_device, model_dim, snr_db, rng);
        py::dict d;
        d["features"] = p.features;
        d["labels"] = p.labels;
        d["beta_true"] = p.beta_true;
        d["noise"] = p.noise;
        return d;
      },
      py::arg("n_devices"), py::arg("points_per_device"), py::arg("model_dim"),
      py::arg("snr_db"), py::arg("seed"));

  m.def("nmse", &nmse, py::arg("beta_est"), py::arg("beta_true"));

  py::enum_<RunMode>(m, "RunMode")
      .value("UNCODED", RunMode::kUncoded)
      .value("CODED", RunMode::kCoded)
      .value("BOTH", RunMode::kBoth);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("net", &ExperimentConfig::net)
      .def_readwrite("learning_rate", &ExperimentConfig::learning_rate)
      .def_readwrite("snr_db", &ExperimentConfig::snr_db)
      .def_readwrite("delta_grid", &ExperimentConfig::delta_grid)
      .def_readwrite("nmse_targets", &ExperimentConfig::nmse_targets)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("mode", &ExperimentConfig::mode)
      .def_readwrite("max_epochs", &ExperimentConfig::max_epochs)
      .def_readwrite("parity_cap", &ExperimentConfig::parity_cap)
      .def_readwrite("fixed_assignment", &ExperimentConfig::fixed_assignment);

  m.def("paper_config", &paper_config,
        "Reference 24-device configuration with unit-variance noise");

  m.def(
      "run",
      [](const ExperimentConfig& config, std::uint64_t seed, RunMode mode,
         double delta) {
        const RunResult r = run_single(config, seed, mode, delta);
        py::dict d;
        d["run_id"] = r.run_id;
        d["delta"] = r.delta;
        d["seed"] = r.seed;
        d["parity_delay"] = r.parity_delay;
        d["traces"] = traces_to_list(r.traces);
        if (r.plan) {
          py::dict p;
          p["per_device_load"] = r.plan->per_device_load;
          p["parity_count"] = r.plan->parity_count;
          p["epoch_deadline"] = r.plan->epoch_deadline;
          p["redundancy_delta"] = r.plan->redundancy_delta;
          d["plan"] = p;
        }
        return d;
      },
      py::arg("config"), py::arg("seed"), py::arg("mode"), py::arg("delta"),
      "Simulate one training run; delta is ignored for the uncoded mode");

  m.def(
      "convergence_time",
      [](const py::list& traces, double target) -> py::object {
        std::vector<EpochTrace> ts;
        for (const auto& item : traces) {
          const py::dict d = item.cast<py::dict>();
          EpochTrace t;
          t.epoch = d["epoch"].cast<int>();
          t.cumulative_time = d["cumulative_time"].cast<double>();
          t.nmse = d["nmse"].cast<double>();
          ts.push_back(t);
        }
        const auto result = convergence_time(ts, target);
        if (!result) return py::none();
        return py::float_(*result);
      },
      py::arg("traces"), py::arg("target"));
}
