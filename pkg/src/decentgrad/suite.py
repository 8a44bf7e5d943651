"""Verification battery: the end-to-end checks the CLI `suite` verb runs.

Each criterion returns a CriterionResult with a pass/fail flag and a one-line
detail string; expensive shared artifacts (the long median runs, the MLP
training campaign) are cached on the SuiteContext so criteria can share them.
"""

from __future__ import annotations

import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .diagnostics import RunTrace, consensus_decay_check
from .engine import AlgorithmConfig, StepEvent, run as engine_run
from .graph import Topology, build_complete, build_random_connected, build_ring
from .mixing import laplacian_weights, metropolis, validate
from .mlp import MlpSpec, loss_value, min_preactivation_gap, synthetic_regression
from .oracle import (
    AbsoluteDeviation,
    QuadraticPlusL1,
    finite_difference_gradient,
    l1_quadratic_problem,
    median_problem,
    relu_mlp_loss_and_subgrad,
    relu_mlp_problem,
)
from .runner import execute_compare
from .schedule import StepSchedule
from .streams import agent_stream, data_stream, init_stream

MEDIAN_ANCHORS = [[0.0], [1.0], [2.0], [3.0]]
MEDIAN_ITERS = 100_000
MEDIAN_ETA0 = 0.3
MEDIAN_SEED = 2026
ALL_VARIANTS = ("dsgd", "dsgdm", "dsignsgd", "dsgd_t")

MLP_SEEDS = [0, 1, 2, 3, 4]
MLP_ITERS = 1600  # 200 epoch-equivalents at 8 components per epoch
MLP_BOUNDARIES = [480, 960, 1280]  # epochs 60/120/160


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: str
    elapsed: float


def _mlp_config(variant: str) -> ExperimentConfig:
    eta0 = 0.02 if variant == "dsignsgd" else 0.2
    return ExperimentConfig(
        {
            "name": variant,
            "problem": {
                "kind": "relu_mlp",
                "widths": [8, 16, 1],
                "samples": 512,
                "batch": 16,
                "data_seed": 101,
                "noise_sigma": 0.05,
                "loss": "mse",
            },
            "topology": {"kind": "ring", "d": 4},
            "mixing": {"kind": "metropolis"},
            "algorithm": {"variant": variant},
            "schedule": {
                "kind": "staircase",
                "eta0": eta0,
                "factor": 0.2,
                "boundaries": MLP_BOUNDARIES,
            },
            "iterations": MLP_ITERS,
            "seed": MLP_SEEDS[0],
            "record_stride": 10,
        }
    )


@dataclass
class SuiteContext:
    """Caches the expensive shared runs between criteria."""

    workdir: Path | None = None
    _median: dict[str, tuple[RunTrace, float]] = field(default_factory=dict)
    _sign_grid_deviation: float | None = None
    _mlp: tuple | None = None  # (CompareResult, elapsed, dir_a, dir_b)
    _owns_workdir: bool = False

    def __post_init__(self) -> None:
        if self.workdir is None:
            self.workdir = Path(tempfile.mkdtemp(prefix="decentgrad_suite_"))
            self._owns_workdir = True

    def cleanup(self) -> None:
        if self._owns_workdir and self.workdir is not None:
            shutil.rmtree(self.workdir, ignore_errors=True)

    def median_run(self, variant: str) -> tuple[RunTrace, float]:
        if variant not in self._median:
            problem = median_problem(MEDIAN_ANCHORS)
            w = metropolis(build_ring(4))
            sched = StepSchedule("polynomial", MEDIAN_ETA0, exponent=0.6)
            observer = None
            if variant == "dsignsgd":
                worst = 0.0
                w_entries = w.entries

                def observer(ev: StepEvent) -> None:
                    nonlocal worst
                    disp = ev.x_after - ev.x_before @ w_entries
                    dev = np.minimum(
                        np.abs(disp), np.minimum(np.abs(disp - ev.eta), np.abs(disp + ev.eta))
                    )
                    worst = max(worst, float(dev.max()))

            start = time.perf_counter()
            trace = engine_run(
                problem, w, AlgorithmConfig(variant), sched, MEDIAN_ITERS, MEDIAN_SEED,
                record_stride=10, on_step=observer,
            )
            elapsed = time.perf_counter() - start
            if variant == "dsignsgd":
                self._sign_grid_deviation = worst
            self._median[variant] = (trace, elapsed)
        return self._median[variant]

    def sign_grid_deviation(self) -> float:
        self.median_run("dsignsgd")
        return self._sign_grid_deviation

    def mlp_campaign(self):
        if self._mlp is None:
            configs = [_mlp_config(v) for v in ALL_VARIANTS]
            dir_a = self.workdir / "mlp_a"
            dir_b = self.workdir / "mlp_b"
            start = time.perf_counter()
            result = execute_compare(configs, MLP_SEEDS, dir_a, render=False)
            elapsed = time.perf_counter() - start
            execute_compare(configs, MLP_SEEDS, dir_b, render=False)
            self._mlp = (result, elapsed, dir_a, dir_b)
        return self._mlp


# ---------------------------------------------------------------------------
# criteria


def criterion_mixing_invariants(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    topologies: list[Topology] = [build_ring(d) for d in range(2, 33)]
    topologies += [build_complete(d) for d in range(2, 33)]
    rng = np.random.default_rng(7)
    for s in range(50):
        d = int(rng.integers(2, 33))
        p = float(rng.uniform(0.05, 0.9))
        topologies.append(build_random_connected(d, p, seed=1000 + s))

    failures = []
    for t in topologies:
        deg_max = int(t.degrees().max())
        for label, w in (
            ("metropolis", metropolis(t)),
            ("laplacian", laplacian_weights(t, 0.75 / deg_max)),
        ):
            report = validate(w.entries, t)
            if not report.passed or not w.contraction < 1.0:
                failures.append(f"{label} on d={t.num_agents}: {report.failures()}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10.0
    detail = (
        f"{2 * len(topologies)} matrices checked in {elapsed:.2f}s"
        if not failures
        else "; ".join(failures[:3])
    )
    return CriterionResult(1, "mixing invariants", ok, detail, elapsed)


def criterion_spectral_spot_checks(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    c4 = metropolis(build_ring(4)).contraction
    c8 = metropolis(build_ring(8)).contraction
    want8 = (1 + 2 * np.cos(np.pi / 4)) / 3
    err4, err8 = abs(c4 - 1 / 3), abs(c8 - want8)
    ok = err4 <= 1e-10 and err8 <= 1e-10
    return CriterionResult(
        2,
        "spectral spot checks",
        ok,
        f"ring(4) err {err4:.1e}, ring(8) err {err8:.1e}",
        time.perf_counter() - start,
    )


def criterion_oracle_finite_differences(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(31)
    margin = 1e-4
    n_points = 1000
    worst = 0.0
    checked = {}

    def check(label, value_fn, grad_fn, draw_fn, gap_fn):
        nonlocal worst
        count = 0
        while count < n_points:
            x = draw_fn()
            if gap_fn(x) <= margin:
                continue
            fd = finite_difference_gradient(value_fn, x)
            g = grad_fn(x)
            rel = float(np.max(np.abs(g - fd) / (1.0 + np.abs(fd))))
            worst = max(worst, rel)
            if rel > 1e-5:
                return False
            count += 1
        checked[label] = count
        return True

    median_comp = AbsoluteDeviation(np.array([0.5, -1.0, 2.0]))
    ok = check(
        "median",
        median_comp.value,
        median_comp.subgrad,
        lambda: 3.0 * rng.standard_normal(3),
        median_comp.kink_gap,
    )

    quad_comp = QuadraticPlusL1(np.array([1.0, -0.5, 0.25]), lam=0.3)
    ok = ok and check(
        "l1_quadratic",
        quad_comp.value,
        quad_comp.subgrad,
        lambda: 3.0 * rng.standard_normal(3),
        quad_comp.kink_gap,
    )

    spec = MlpSpec(4, 5, 1)
    data_rng = data_stream(5)
    inputs, targets = synthetic_regression(spec, 8, data_rng)
    ok = ok and check(
        "relu_mlp",
        lambda p: loss_value(spec, p, inputs, targets),
        lambda p: relu_mlp_loss_and_subgrad(spec, p, inputs, targets)[1],
        lambda: spec.init_params(rng),
        lambda p: min_preactivation_gap(spec, p, inputs),
    )

    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    return CriterionResult(
        3,
        "oracle finite differences",
        ok,
        f"{sum(checked.values())} points, worst rel err {worst:.2e}, {elapsed:.1f}s",
        elapsed,
    )


def _single_agent_mixing():
    return metropolis(Topology(1, frozenset()))


def criterion_framework_reduction(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    iters = 200
    sched = StepSchedule("polynomial", 0.4, exponent=0.7)
    problems = {
        "dsgd": l1_quadratic_problem([[1.5]], lam=0.0),
        "dsgdm": l1_quadratic_problem([[-0.5]], lam=0.0),
        "dsgd_t": l1_quadratic_problem([[2.0]], lam=0.0),
    }
    details = []
    all_ok = True

    def scalar_sample(problem, rng, x):
        agent = problem.agents[0]
        j = agent.sample_component(rng)
        return agent.subgrad(j, np.array([x])).vector[0]

    for variant, problem in problems.items():
        seed = {"dsgd": 11, "dsgdm": 13, "dsgd_t": 17}[variant]
        states: list[tuple] = []
        engine_run(
            problem, _single_agent_mixing(),
            AlgorithmConfig(variant, tau=0.25 if variant == "dsgdm" else None),
            sched, iters, seed,
            on_step=lambda ev: states.append(
                (ev.x_after[0, 0], None if ev.aux_after is None else ev.aux_after[0, 0])
            ),
        )

        x = float(problem.initial_point(init_stream(seed))[0])
        rng = agent_stream(seed, 0)
        ref: list[tuple] = []
        if variant == "dsgd":
            for k in range(iters):
                d = scalar_sample(problem, rng, x)
                x = x - sched.eta(k) * d
                ref.append((x, None))
        elif variant == "dsgdm":
            tau = 0.25
            eta0 = sched.eta(0)
            d0 = scalar_sample(problem, rng, x)
            y = (1.0 - tau * eta0) * d0 + (tau * eta0) * d0
            for k in range(iters):
                eta = sched.eta(k)
                x = x - eta * y
                d = scalar_sample(problem, rng, x)
                y = (1.0 - tau * eta) * y + (tau * eta) * d
                ref.append((x, y))
        else:
            d_prev = scalar_sample(problem, rng, x)
            v = d_prev
            for k in range(iters):
                x = x - sched.eta(k) * v
                d = scalar_sample(problem, rng, x)
                v = v + d - d_prev
                d_prev = d
                ref.append((x, v))

        same = states == ref
        all_ok = all_ok and same
        details.append(f"{variant}: {'bitwise equal' if same else 'MISMATCH'}")
    return CriterionResult(
        4, "single-agent reduction", all_ok, "; ".join(details), time.perf_counter() - start
    )


def criterion_tracking_identity(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    problems = {
        "median": median_problem(MEDIAN_ANCHORS),
        "l1_quadratic": l1_quadratic_problem([[1.0], [0.5], [-0.5], [2.0]], lam=0.2),
        "relu_mlp": relu_mlp_problem((4, 8, 1), 4, 128, 8, data_seed=55),
    }
    w = metropolis(build_ring(4))
    sched = StepSchedule("polynomial", 0.2, exponent=0.6)
    gaps = {}
    for name, problem in problems.items():
        trace = engine_run(
            problem, w, AlgorithmConfig("dsgd_t"), sched, 10_000, seed=3,
            record_stride=100, record_stationarity=False,
        )
        gaps[name] = trace.tracking_gap
    ok = all(g is not None and g < 1e-9 for g in gaps.values())
    detail = ", ".join(f"{k}: max gap {v:.2e}" for k, v in gaps.items())
    return CriterionResult(5, "tracking identity", ok, detail, time.perf_counter() - start)


def criterion_consensus_decay(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    details = []
    ok = True
    for variant in ALL_VARIANTS:
        trace, elapsed = ctx.median_run(variant)
        report = consensus_decay_check(trace, slack=1e-9, tail=100)
        good = (
            report.violations == 0
            and report.tail_mean_consensus < 1e-3
            and not trace.diverged
            and elapsed < 60.0
        )
        ok = ok and good
        details.append(
            f"{variant}: tail {report.tail_mean_consensus:.1e}, "
            f"{report.violations} violations, {elapsed:.0f}s"
        )
    return CriterionResult(6, "consensus decay", ok, "; ".join(details), time.perf_counter() - start)


def brute_force_critical_interval(
    anchors: list[list[float]], lo: float = -5.0, hi: float = 10.0, resolution: float = 1e-3
) -> tuple[float, float]:
    """Grid argmin of the averaged objective; exact for this convex corpus."""
    grid = np.arange(lo, hi + resolution / 2, resolution)
    anchor_vals = np.asarray([a[0] for a in anchors])
    f_vals = np.mean(np.abs(grid[:, None] - anchor_vals[None, :]), axis=1)
    minimal = grid[f_vals <= f_vals.min() + 1e-9]
    return float(minimal.min()), float(minimal.max())


def criterion_critical_interval(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    lo, hi = brute_force_critical_interval(MEDIAN_ANCHORS)
    margin = 0.05
    details = [f"oracle interval [{lo:.3f}, {hi:.3f}]"]
    ok = True
    for variant in ALL_VARIANTS:
        trace, _ = ctx.median_run(variant)
        finals = trace.final_state.ravel()
        inside = bool(np.all((finals >= lo - margin) & (finals <= hi + margin)))
        ok = ok and inside
        details.append(f"{variant}: finals in [{finals.min():.3f}, {finals.max():.3f}]")
    return CriterionResult(
        7, "critical-point convergence", ok, "; ".join(details), time.perf_counter() - start
    )


def criterion_sign_step_structure(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    dev = ctx.sign_grid_deviation()
    ok = dev < 1e-12
    return CriterionResult(
        8,
        "sign step structure",
        ok,
        f"max distance of X_k+1 - X_k W coordinates from {{-eta,0,+eta}}: {dev:.2e}",
        time.perf_counter() - start,
    )


def criterion_mlp_training(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    result, elapsed, _, _ = ctx.mlp_campaign()
    details = []
    ok = elapsed < 300.0
    for method in result.methods:
        losses = method.metric_matrix("train_loss")
        consensus = method.metric_matrix("consensus_error")
        initial = float(losses[:, 0].mean())
        final = float(losses[:, -1].mean())
        drop = 1.0 - final / initial
        cons = float(consensus[:, -1].mean())
        good = drop >= 0.9 and cons < 1e-2 and method.diverged_count == 0
        ok = ok and good
        details.append(f"{method.name}: loss {initial:.3f}->{final:.4f} ({100 * drop:.1f}%), "
                       f"consensus {cons:.1e}")
    return CriterionResult(
        9, "mlp training analogue", ok, "; ".join(details) + f"; {elapsed:.0f}s",
        time.perf_counter() - start,
    )


def criterion_determinism(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    _, _, dir_a, dir_b = ctx.mlp_campaign()
    mismatches = []
    count = 0
    for variant in ALL_VARIANTS:
        for s in MLP_SEEDS:
            a = (dir_a / variant / f"seed_{s}" / "trace.csv").read_bytes()
            b = (dir_b / variant / f"seed_{s}" / "trace.csv").read_bytes()
            count += 1
            if a != b:
                mismatches.append(f"{variant}/seed_{s}")
    ok = not mismatches
    detail = f"{count} trace pairs byte-identical" if ok else "mismatch: " + ", ".join(mismatches)
    return CriterionResult(10, "determinism", ok, detail, time.perf_counter() - start)


def criterion_lyapunov_stability(ctx: SuiteContext) -> CriterionResult:
    start = time.perf_counter()
    details = []
    ok = True
    for variant in ("dsgdm", "dsignsgd"):
        trace, _ = ctx.median_run(variant)
        values = trace.lyapunov
        tail = values[-(len(values) // 4):]
        osc = float(tail.max() - tail.min())
        good = osc < 1e-3
        ok = ok and good
        details.append(f"{variant}: last-quarter oscillation {osc:.2e}")
    return CriterionResult(
        11, "lyapunov stability", ok, "; ".join(details), time.perf_counter() - start
    )


CRITERIA: list[tuple[int, str, Callable[[SuiteContext], CriterionResult]]] = [
    (1, "mixing invariants", criterion_mixing_invariants),
    (2, "spectral spot checks", criterion_spectral_spot_checks),
    (3, "oracle finite differences", criterion_oracle_finite_differences),
    (4, "single-agent reduction", criterion_framework_reduction),
    (5, "tracking identity", criterion_tracking_identity),
    (6, "consensus decay", criterion_consensus_decay),
    (7, "critical-point convergence", criterion_critical_interval),
    (8, "sign step structure", criterion_sign_step_structure),
    (9, "mlp training analogue", criterion_mlp_training),
    (10, "determinism", criterion_determinism),
    (11, "lyapunov stability", criterion_lyapunov_stability),
]


def run_suite(
    filter_substring: str | None = None, ctx: SuiteContext | None = None
) -> list[CriterionResult]:
    own_ctx = ctx is None
    if ctx is None:
        ctx = SuiteContext()
    try:
        results = []
        for number, name, func in CRITERIA:
            if filter_substring and filter_substring.lower() not in name.lower():
                continue
            results.append(func(ctx))
        return results
    finally:
        if own_ctx:
            ctx.cleanup()


def format_result(res: CriterionResult) -> str:
    status = "PASS" if res.passed else "FAIL"
    return f"[{res.number:2d}] {status} {res.name} ({res.elapsed:.1f}s): {res.details}"
