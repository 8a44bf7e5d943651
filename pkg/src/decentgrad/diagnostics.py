"""Measured quantities of a run: consensus error, disagreement, objective and
Lyapunov values, stationarity, and the piecewise-linear interpolated trajectory.

Everything here is a pure function over snapshots; the engine fills a
`RunTrace` and these helpers read it back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import HistoryRangeError
from .oracle import GlobalObjective, phi_value
from .schedule import StepSchedule

TRACE_COLUMNS = ("k", "eta", "lambda", "f_avg", "consensus_error", "lyapunov", "stationarity", "z_norm")


def consensus_error(x: np.ndarray) -> float:
    """(1/sqrt(d)) * ||X(I - P)||_F: RMS disagreement of columns from their mean."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    return float(np.linalg.norm(disagreement(x)) / np.sqrt(d))


def disagreement(z: np.ndarray) -> np.ndarray:
    """Z(I - P): each column minus the column average. Row sums are zero and
    Z = (Z e)·1ᵀ + disagreement(Z) reconstructs Z."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return z - np.mean(z, axis=1, keepdims=True)


def lyapunov_value(
    objective: GlobalObjective, x_avg: np.ndarray, y_avg: np.ndarray, tau: float, phi: str
) -> float:
    """f(x̄) + φ(ȳ)/τ, the descent function of the momentum family."""
    return objective.value(x_avg) + phi_value(phi, y_avg) / tau


@dataclass
class IterateHistory:
    """Average iterates retained for interpolation: rows k = start..start+len-1."""

    start: int
    states: np.ndarray  # (count, m)

    def get(self, k: int) -> np.ndarray:
        idx = k - self.start
        if not 0 <= idx < self.states.shape[0]:
            raise HistoryRangeError(
                f"iterate {k} outside retained history [{self.start}, "
                f"{self.start + self.states.shape[0] - 1}]"
            )
        return self.states[idx]


@dataclass
class RunTrace:
    """Per-record diagnostics plus per-iteration instrumentation of one run."""

    algorithm: str
    problem: str
    seed: int
    num_agents: int
    dimension: int
    contraction: float
    epoch_length: int
    iterations: int
    completed: int

    k: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    f_avg: np.ndarray
    consensus: np.ndarray
    z_norm: np.ndarray
    stationarity: np.ndarray | None = None
    lyapunov: np.ndarray | None = None
    f_agents: np.ndarray | None = None  # (records, d)

    # spectral norms per iteration: perp_norm[k] = ||Z_k(I-P)||, len completed+1;
    # step_norm[k] = ||eta_k (H_k + Xi_{k+1})||, len completed
    perp_norm: np.ndarray | None = None
    step_norm: np.ndarray | None = None

    tracking_gap: float | None = None
    diverged_at: int | None = None
    history: IterateHistory | None = None
    final_state: np.ndarray | None = None  # primal X at the last completed iteration

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def epoch_axis(self) -> np.ndarray:
        return self.k / float(self.epoch_length)

    def columns(self) -> dict[str, np.ndarray]:
        """Trace columns in export order, skipping absent optional ones."""
        cols: dict[str, np.ndarray] = {
            "k": self.k,
            "eta": self.eta,
            "lambda": self.lam,
            "f_avg": self.f_avg,
            "consensus_error": self.consensus,
        }
        if self.lyapunov is not None:
            cols["lyapunov"] = self.lyapunov
        if self.stationarity is not None:
            cols["stationarity"] = self.stationarity
        cols["z_norm"] = self.z_norm
        return cols


def write_trace_csv(trace: RunTrace, path: str | Path) -> None:
    """Fixed column order, full-precision repr values (byte-stable per run)."""
    cols = trace.columns()
    names = list(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in range(len(trace.k)):
            writer.writerow([repr(float(cols[c][r])) for c in names])


def interpolated_state(trace: RunTrace, schedule: StepSchedule, t: float) -> np.ndarray:
    """The continuous-time trajectory through the average iterates.

    u(lam(k) + s) = z̄_k + s·(z̄_{k+1} − z̄_k)/eta_k for s in [0, eta_k); needs
    the run to have retained its iterate history.
    """
    if trace.history is None:
        raise HistoryRangeError("run was executed without iterate history retention")
    if t < 0:
        raise HistoryRangeError(f"time must be >= 0, got {t}")
    k = schedule.iteration_at(t)
    s = t - schedule.cumulative_time(k)
    zk = trace.history.get(k)
    if s == 0.0:
        return zk.copy()
    zk1 = trace.history.get(k + 1)
    return zk + (s / schedule.eta(k)) * (zk1 - zk)


@dataclass(frozen=True)
class DecayReport:
    """Outcome of checking the one-step disagreement contraction bound."""

    iterations_checked: int
    violations: int
    max_excess: float
    tail_mean_consensus: float
    contraction: float

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.iterations_checked if self.iterations_checked else 0.0


def consensus_decay_check(trace: RunTrace, slack: float = 1e-9, tail: int = 100) -> DecayReport:
    """Verify ||Z_{k+1}(I-P)|| <= contraction * ||Z_k(I-P)|| + ||eta_k(H_k+Xi_{k+1})||
    at every instrumented iteration, with `slack` absorbing round-off."""
    if trace.perp_norm is None or trace.step_norm is None:
        raise ValueError("trace lacks per-iteration instrumentation")
    perp, step = trace.perp_norm, trace.step_norm
    bound = trace.contraction * perp[:-1] + step + slack
    excess = perp[1:] - bound
    violations = int(np.sum(excess > 0))
    max_excess = float(np.max(excess)) if len(excess) else 0.0
    tail_vals = trace.consensus[-tail:] if len(trace.consensus) else np.asarray([0.0])
    return DecayReport(
        iterations_checked=len(step),
        violations=violations,
        max_excess=max_excess,
        tail_mean_consensus=float(np.mean(tail_vals)),
        contraction=trace.contraction,
    )
