import math

import numpy as np
import pytest

from decentgrad.schedule import StepSchedule, schedule_from_config


def constant(eta0=1.0):
    # staircase with no boundaries never decays: the test-only constant schedule
    return StepSchedule("staircase", eta0, boundaries=())


def test_polynomial_starts_at_eta0():
    s = StepSchedule("polynomial", 0.3, exponent=0.6)
    assert s.eta(0) == 0.3


def test_polynomial_exponent_bounds():
    for p in (0.0, -0.2, 1.2):
        with pytest.raises(ValueError):
            StepSchedule("polynomial", 0.1, exponent=p)
    StepSchedule("polynomial", 0.1, exponent=1.0)  # boundary p=1 allowed


def test_staircase_epoch_decay_protocol():
    # decay by 0.2 at the 60th/120th/160th boundary
    s = StepSchedule("staircase", 0.2, factor=0.2, boundaries=(60, 120, 160))
    for k, expected in [(0, 0.2), (59, 0.2), (60, 0.04), (119, 0.04), (120, 0.008),
                        (159, 0.008), (160, 0.0016), (500, 0.0016)]:
        assert s.eta(k) == pytest.approx(expected, rel=1e-12)


def test_staircase_boundary_validation():
    with pytest.raises(ValueError):
        StepSchedule("staircase", 0.2, boundaries=(10, 10))
    with pytest.raises(ValueError):
        StepSchedule("staircase", 0.2, boundaries=(-1, 5))
    with pytest.raises(ValueError):
        StepSchedule("staircase", 0.2, factor=1.5)


def test_eta_positive_and_nonincreasing():
    for s in (
        StepSchedule("polynomial", 0.5, exponent=0.6),
        StepSchedule("log_damped", 0.5),
        StepSchedule("staircase", 0.5, factor=0.5, boundaries=(3, 7)),
    ):
        vals = [s.eta(k) for k in range(200)]
        assert all(v > 0 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_polynomial_damping_spot_value():
    # eta_k*log(k) at k=1e6 is about 3.47e-3 * eta0 (direct evaluation)
    s = StepSchedule("polynomial", 1.0, exponent=0.6)
    val = s.eta(10**6) * math.log(10**6)
    assert val == pytest.approx(3.470e-3, rel=1e-3)
    # and at the 1e7 horizon it is far below the 0.01*eta0*log(2) envelope
    assert s.eta(10**7) * math.log(10**7) < 0.01 * 1.0 * math.log(2)


def test_log_damped_damping_is_monotone_toward_zero():
    # eta_k*log(k) decays like 1/log(k): slow, but strictly decreasing
    s = StepSchedule("log_damped", 1.0)
    checkpoints = [10**3, 10**4, 10**5, 10**6, 10**7]
    vals = [s.eta(k) * math.log(k) for k in checkpoints]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.06  # ~ln(1e7)/(1+ln(1e7+1))^2


def test_partial_sums_diverge():
    # lower bounds grow without any fixed ceiling over a long horizon
    poly = StepSchedule("polynomial", 1.0, exponent=0.6)
    logd = StepSchedule("log_damped", 1.0)
    assert poly.cumulative_time(10**6) > 600.0  # ~ K^0.4/0.4 = 250 at eta0=1... grows past this
    assert logd.cumulative_time(10**6) > 3000.0
    assert constant().cumulative_time(10**6) == pytest.approx(10**6)


def test_lambda_prefix_values():
    assert StepSchedule("polynomial", 0.7).cumulative_time(0) == 0.0
    assert constant(1.0).cumulative_time(5) == pytest.approx(5.0)
    s = StepSchedule("staircase", 0.2, factor=0.2, boundaries=(60, 120, 160))
    assert s.cumulative_time(2) == pytest.approx(0.4)


def test_lambda_strictly_increasing():
    s = StepSchedule("polynomial", 0.4, exponent=0.8)
    vals = [s.cumulative_time(i) for i in range(50)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_iteration_at_constant_is_floor():
    s = constant(1.0)
    assert s.iteration_at(3.5) == 3
    assert s.iteration_at(0.0) == 0
    assert s.iteration_at(7.0) == 7


def test_iteration_at_staircase():
    s = StepSchedule("staircase", 0.2, factor=0.2, boundaries=(60, 120, 160))
    assert s.iteration_at(0.3) == 1  # lam(1)=0.2 <= 0.3 < lam(2)=0.4


def test_round_trip_lambda_iteration():
    rng = np.random.default_rng(0)
    for s in (
        StepSchedule("polynomial", 0.9, exponent=0.6),
        StepSchedule("log_damped", 0.9),
        StepSchedule("staircase", 0.9, factor=0.3, boundaries=(5, 17)),
    ):
        for t in rng.uniform(0, 40, size=60):
            p = s.iteration_at(float(t))
            assert s.cumulative_time(p) <= t < s.cumulative_time(p + 1)


def test_negative_arguments_rejected():
    s = constant()
    with pytest.raises(ValueError):
        s.eta(-1)
    with pytest.raises(ValueError):
        s.cumulative_time(-2)
    with pytest.raises(ValueError):
        s.iteration_at(-0.5)


def test_theory_compliance_flags():
    assert StepSchedule("polynomial", 0.1).theory_compliant
    assert StepSchedule("log_damped", 0.1).theory_compliant
    stair = StepSchedule("staircase", 0.1, boundaries=(4,))
    assert not stair.theory_compliant
    assert "empirical-only" in stair.asymptotics_note


def test_schedule_from_config():
    s = schedule_from_config({"kind": "polynomial", "eta0": 0.3, "p": 0.7})
    assert (s.kind, s.eta0, s.exponent) == ("polynomial", 0.3, 0.7)
    s = schedule_from_config(
        {"kind": "staircase", "eta0": 0.2, "factor": 0.2, "boundaries": [60, 120, 160]}
    )
    assert s.boundaries == (60, 120, 160)
    with pytest.raises(ValueError):
        schedule_from_config({"kind": "cosine", "eta0": 0.1})
