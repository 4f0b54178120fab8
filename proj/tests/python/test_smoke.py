"""Smoke tests for the python surface of the simulator."""

import math

import numpy as np
import pytest

import cfl_sim


def make_profile(load=300):
    p = cfl_sim.DeviceProfile()
    p.device_id = 0
    p.per_point_compute_time = 500.0 / 1536000.0
    p.memory_access_rate = 2.0 / p.per_point_compute_time
    p.packet_time = 17600.0 / 216000.0
    p.erasure_prob = 0.1
    p.local_points = load
    return p


def test_expected_delay_formula():
    p = make_profile()
    expected = 300 * (p.per_point_compute_time + 1.0 / p.memory_access_rate)
    expected += 2.0 * p.packet_time / 0.9
    assert cfl_sim.expected_delay(p, 300) == pytest.approx(expected)


def test_return_probability_monotone():
    p = make_profile()
    values = [cfl_sim.return_probability(p, 300, t) for t in (0.3, 0.5, 0.9, 2.0)]
    assert values == sorted(values)
    assert 0.0 <= values[0] and values[-1] <= 1.0


def test_sample_delay_matches_mean():
    p = make_profile()
    rng = cfl_sim.RandomStream(7)
    draws = [cfl_sim.sample_delay(p, 300, rng)["total"] for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(cfl_sim.expected_delay(p, 300), rel=0.05)


def test_plan_with_fixed_delta():
    config = cfl_sim.paper_config()
    config.net.nu_comp = 0.2
    config.net.nu_link = 0.2
    config.net.assignment_seed = 1
    profiles, server = cfl_sim.build_profiles(config.net)
    plan = cfl_sim.plan_with_fixed_delta(profiles, server, 0.13)
    assert plan.parity_count == 936
    assert plan.redundancy_delta == pytest.approx(0.13)
    assert plan.epoch_deadline > 0
    assert all(l <= 300 for l in plan.per_device_load)
    assert plan.expected_aggregate_return == pytest.approx(7200, abs=1.5)


def test_planned_capacity_plan():
    config = cfl_sim.paper_config()
    config.net.assignment_seed = 1
    profiles, server = cfl_sim.build_profiles(config.net)
    plan = cfl_sim.plan(profiles, server, config.parity_cap)
    assert 0 < plan.redundancy_delta <= 0.3


def test_synthesize_problem_snr():
    data = cfl_sim.synthesize_problem(24, 300, 40, 0.0, seed=3)
    X, beta = data["features"], data["beta_true"]
    signal = X @ beta
    realized = np.sum(signal**2) / np.sum(data["noise"] ** 2)
    assert 0.9 < realized < 1.1
    assert np.allclose(data["labels"], signal + data["noise"])


def test_uncoded_run_matches_numpy_descent():
    config = cfl_sim.paper_config()
    config.net.n_devices = 4
    config.net.model_dim = 12
    config.net.points_per_device = 30
    config.snr_db = 20.0
    config.learning_rate = 0.05
    config.max_epochs = 25
    config.nmse_targets = [1e-9]
    result = cfl_sim.run(config, seed=1, mode=cfl_sim.RunMode.UNCODED, delta=0.0)
    traces = result["traces"]
    assert traces[0]["nmse"] == pytest.approx(1.0)
    assert traces[-1]["nmse"] < traces[0]["nmse"]
    assert len(traces) == 26
    # Cumulative time is nondecreasing and starts at zero (no parity upload).
    times = [t["cumulative_time"] for t in traces]
    assert times[0] == 0.0
    assert all(b >= a for a, b in zip(times, times[1:]))


def test_coded_run_and_convergence_time():
    config = cfl_sim.paper_config()
    config.net.n_devices = 4
    config.net.model_dim = 12
    config.net.points_per_device = 30
    config.snr_db = float("inf")
    config.learning_rate = 0.3
    config.max_epochs = 600
    config.nmse_targets = [1e-6]
    result = cfl_sim.run(config, seed=2, mode=cfl_sim.RunMode.CODED, delta=0.2)
    assert result["plan"]["parity_count"] == 24
    assert result["parity_delay"] > 0
    traces = result["traces"]
    assert traces[-1]["nmse"] <= 1e-6
    t = cfl_sim.convergence_time(traces, 1e-3)
    assert t is not None and t > result["parity_delay"]


def test_nmse():
    truth = np.array([1.0, -2.0, 0.5])
    assert cfl_sim.nmse(truth, truth) == 0.0
    assert cfl_sim.nmse(np.zeros(3), truth) == pytest.approx(1.0)
    assert cfl_sim.nmse(2 * truth, truth) == pytest.approx(1.0)


def test_plan_error_surfaces_as_python_exception():
    config = cfl_sim.paper_config()
    config.net.assignment_seed = 1
    profiles, server = cfl_sim.build_profiles(config.net)
    server.local_points = 10
    with pytest.raises(cfl_sim.PlanError):
        cfl_sim.plan_with_fixed_delta(profiles, server, 0.5)
