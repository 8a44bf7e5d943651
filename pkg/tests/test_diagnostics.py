import numpy as np
import pytest

from decentgrad.diagnostics import (
    consensus_decay_check,
    consensus_error,
    disagreement,
    interpolated_state,
    lyapunov_value,
    write_trace_csv,
)
from decentgrad.engine import AlgorithmConfig, run
from decentgrad.errors import HistoryRangeError
from decentgrad.graph import Topology, build_ring
from decentgrad.mixing import metropolis
from decentgrad.oracle import median_problem
from decentgrad.schedule import StepSchedule


def median4():
    return median_problem([[0.0], [1.0], [2.0], [3.0]])


# --- consensus error ----------------------------------------------------------


def test_consensus_error_identical_columns():
    x = np.tile(np.array([[2.0], [5.0]]), (1, 6))
    assert consensus_error(x) == 0.0


def test_consensus_error_hand_value():
    # X(I-P) = [1, -1], Frobenius sqrt(2), divided by sqrt(2)
    assert consensus_error(np.array([[1.0, -1.0]])) == pytest.approx(1.0)


def test_consensus_error_homogeneous():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 5))
    for c in (0.5, -2.0, 7.0):
        assert consensus_error(c * x) == pytest.approx(abs(c) * consensus_error(x))


# --- disagreement ---------------------------------------------------------------


def test_disagreement_rank_one_is_zero():
    v = np.array([[1.0], [2.0], [-1.0]])
    z = v @ np.ones((1, 4))
    np.testing.assert_allclose(disagreement(z), np.zeros((3, 4)), atol=1e-15)


def test_disagreement_idempotent():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((4, 7))
    np.testing.assert_allclose(disagreement(disagreement(z)), disagreement(z), atol=1e-14)


def test_disagreement_row_sums_zero():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((5, 6))
    np.testing.assert_allclose(disagreement(z).sum(axis=1), np.zeros(5), atol=1e-12)


def test_disagreement_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = 10.0 * rng.standard_normal((3, 8))
        zbar = z @ np.full(8, 1.0 / 8)
        recon = np.outer(zbar, np.ones(8)) + disagreement(z)
        assert np.max(np.abs(recon - z)) < 1e-12


# --- lyapunov -------------------------------------------------------------------


def test_lyapunov_zero_aux_is_objective():
    prob = median4()
    x = np.array([1.5])
    for phi in ("half_sq_norm", "l1_norm"):
        assert lyapunov_value(prob, x, np.zeros(1), tau=2.0, phi=phi) == pytest.approx(
            prob.value(x)
        )


def test_lyapunov_half_sq_norm_value():
    prob = median4()
    x = np.array([1.5])
    got = lyapunov_value(prob, x, np.array([3.0, 4.0]), tau=2.0, phi="half_sq_norm")
    assert got == pytest.approx(prob.value(x) + 6.25)


def test_lyapunov_l1_value():
    prob = median4()
    x = np.array([1.5])
    got = lyapunov_value(prob, x, np.array([1.0, -1.0]), tau=1.0, phi="l1_norm")
    assert got == pytest.approx(prob.value(x) + 2.0)


# --- interpolated trajectory ------------------------------------------------------


def drift_problem():
    # a single agent far below its anchor: subgradient is always exactly -1,
    # so the average iterate drifts linearly upward by eta per step
    return median_problem([[1e9]])


def test_interpolated_linear_drift():
    prob = drift_problem()
    sched = StepSchedule("staircase", 1.0, boundaries=())
    w = metropolis(Topology(1, frozenset()))
    trace = run(prob, w, AlgorithmConfig("dsgd"), sched, 20, seed=1, history=64)
    x0 = trace.history.get(0)[0]
    for t in (0.0, 0.5, 3.0, 7.25, 18.999):
        u = interpolated_state(trace, sched, t)
        assert u[0] == pytest.approx(x0 + t, abs=1e-12)


def test_interpolated_exact_knots_and_midpoints():
    prob = median4()
    sched = StepSchedule("polynomial", 0.5, exponent=0.6)
    trace = run(prob, metropolis(build_ring(4)), AlgorithmConfig("dsgd"), sched, 30,
                seed=2, history=64)
    for k in (0, 3, 11):
        zk = trace.history.get(k)
        np.testing.assert_array_equal(
            interpolated_state(trace, sched, sched.cumulative_time(k)), zk
        )
        mid = sched.cumulative_time(k) + sched.eta(k) / 2
        expected = 0.5 * (zk + trace.history.get(k + 1))
        np.testing.assert_allclose(interpolated_state(trace, sched, mid), expected, atol=1e-14)


def test_interpolated_out_of_range():
    prob = drift_problem()
    sched = StepSchedule("staircase", 1.0, boundaries=())
    w = metropolis(Topology(1, frozenset()))
    trace = run(prob, w, AlgorithmConfig("dsgd"), sched, 10, seed=1, history=4)
    with pytest.raises(HistoryRangeError):
        interpolated_state(trace, sched, 0.5)  # evicted by the ring buffer
    with pytest.raises(HistoryRangeError):
        interpolated_state(trace, sched, 10.5)  # beyond the horizon
    no_hist = run(prob, w, AlgorithmConfig("dsgd"), sched, 10, seed=1)
    with pytest.raises(HistoryRangeError):
        interpolated_state(no_hist, sched, 0.0)


def test_history_ring_buffer_caps_memory():
    prob = drift_problem()
    sched = StepSchedule("staircase", 1.0, boundaries=())
    w = metropolis(Topology(1, frozenset()))
    trace = run(prob, w, AlgorithmConfig("dsgd"), sched, 50, seed=1, history=8)
    assert trace.history.states.shape[0] == 8
    assert trace.history.start == 43  # keeps iterates 43..50


# --- contraction decay check -------------------------------------------------------


def test_decay_check_on_dsgd_run():
    trace = run(
        median4(), metropolis(build_ring(4)), AlgorithmConfig("dsgd"),
        StepSchedule("polynomial", 0.3, exponent=0.6), 2000, seed=4,
    )
    report = consensus_decay_check(trace)
    assert report.violations == 0
    assert report.iterations_checked == 2000
    assert report.violation_fraction == 0.0


def test_decay_check_all_variants():
    for variant in ("dsgdm", "dsignsgd", "dsgd_t"):
        trace = run(
            median4(), metropolis(build_ring(4)), AlgorithmConfig(variant),
            StepSchedule("polynomial", 0.3, exponent=0.6), 800, seed=5,
        )
        assert consensus_decay_check(trace).violations == 0


def test_pure_consensus_geometric_decay():
    # with no step term the disagreement contracts at least by the factor each round
    from decentgrad.engine import consensus_step

    w = metropolis(build_ring(6))
    rng = np.random.default_rng(6)
    z = rng.standard_normal((3, 6))
    prev = consensus_error(z)
    for _ in range(40):
        z = consensus_step(z, w, np.zeros_like(z), eta=1.0)
        cur = consensus_error(z)
        assert cur <= w.contraction * prev + 1e-12
        prev = cur
    assert prev < 1e-3


def test_single_agent_consensus_identically_zero():
    prob = drift_problem()
    w = metropolis(Topology(1, frozenset()))
    trace = run(prob, w, AlgorithmConfig("dsgd"),
                StepSchedule("staircase", 1.0, boundaries=()), 50, seed=0)
    np.testing.assert_array_equal(trace.consensus, np.zeros_like(trace.consensus))
    np.testing.assert_array_equal(trace.perp_norm, np.zeros_like(trace.perp_norm))


# --- trace export --------------------------------------------------------------


def test_trace_csv_columns_and_round_trip(tmp_path):
    trace = run(
        median4(), metropolis(build_ring(4)), AlgorithmConfig("dsgdm"),
        StepSchedule("polynomial", 0.3, exponent=0.6), 40, seed=8,
    )
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "k,eta,lambda,f_avg,consensus_error,lyapunov,stationarity,z_norm"
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[3]) == trace.f_avg[0]  # repr round-trips exactly


def test_trace_csv_omits_absent_columns(tmp_path):
    trace = run(
        median4(), metropolis(build_ring(4)), AlgorithmConfig("dsgd"),
        StepSchedule("polynomial", 0.3, exponent=0.6), 40, seed=8,
        record_stationarity=False,
    )
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    header = path.read_text().splitlines()[0]
    assert header == "k,eta,lambda,f_avg,consensus_error,z_norm"
