"""The synchronous-round iteration and the concrete algorithms built on it.

Every method is one configuration of the same update: mix the stacked agent
states with W, then subtract a scaled direction,

    Z_{k+1} = Z_k W - eta_k * (H_k + Xi_{k+1}).

Columns are agents. The dense right-multiply by W is the whole communication
round: the sparsity of W means column i only ever reads its neighborhood,
which the locality tests enforce.

Algorithms:
  dsgd      direction = subgradients sampled at the current states
  dsgdm     auxiliary momentum block with phi = half squared norm
  dsignsgd  same family with phi = l1 norm (sign-regularized steps)
  dsgd_t    auxiliary tracking block estimating the global direction
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .diagnostics import IterateHistory, RunTrace, consensus_error, lyapunov_value
from .errors import DivergenceError, TrackingConsistencyError
from .mixing import MixingMatrix
from .oracle import GlobalObjective, phi_select, stationarity_measure
from .schedule import StepSchedule
from .streams import agent_stream, init_stream, noise_stream

VARIANTS = ("dsgd", "dsgdm", "dsignsgd", "dsgd_t")

TRACKING_TOL = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean noise added to every sampled subgradient (the martingale term)."""

    kind: str  # "gaussian" | "uniform"
    scale: float

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"noise kind must be gaussian or uniform, got {self.kind!r}")
        if self.scale < 0:
            raise ValueError(f"noise scale must be >= 0, got {self.scale}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(n)
        return self.scale * rng.uniform(-1.0, 1.0, size=n)


@dataclass(frozen=True)
class AlgorithmConfig:
    variant: str
    tau: float | None = None  # momentum parameter; defaults to 0.1/eta0
    phi: str | None = None  # auxiliary function tag; fixed by the variant unless set

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.phi is not None and self.phi not in ("half_sq_norm", "l1_norm"):
            raise ValueError(f"phi must be half_sq_norm or l1_norm, got {self.phi!r}")
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def uses_momentum(self) -> bool:
        return self.variant in ("dsgdm", "dsignsgd")

    def resolved_phi(self) -> str:
        if self.phi is not None:
            return self.phi
        return "l1_norm" if self.variant == "dsignsgd" else "half_sq_norm"

    def resolved_tau(self, eta0: float) -> float:
        tau = self.tau if self.tau is not None else 0.1 / eta0
        if tau * eta0 > 1.0:
            raise ValueError(
                f"tau*eta0 = {tau * eta0:.4g} > 1 leaves the convex-combination regime"
            )
        return tau


@dataclass(frozen=True)
class StepEvent:
    """Snapshot handed to an `on_step` observer after each iteration."""

    k: int
    eta: float
    x_before: np.ndarray
    x_after: np.ndarray
    direction: np.ndarray  # stacked H_k + Xi_{k+1}
    aux_before: np.ndarray | None = None
    aux_after: np.ndarray | None = None


def consensus_step(
    z: np.ndarray, w: MixingMatrix | np.ndarray, h: np.ndarray, eta: float,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One framework round: Z·W − eta·(H + noise). Pure function of its inputs."""
    z = np.asarray(z, dtype=float)
    w_arr = w.entries if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    direction = h if noise is None else h + noise
    if z.ndim != 2 or w_arr.shape != (z.shape[1], z.shape[1]) or direction.shape != z.shape:
        raise ValueError(
            f"dimension mismatch: Z {z.shape}, W {w_arr.shape}, direction {direction.shape}"
        )
    out = z @ w_arr - eta * direction
    if not np.all(np.isfinite(out)):
        raise DivergenceError("consensus step produced a non-finite state")
    return out


def _sample_directions(
    problem: GlobalObjective,
    x: np.ndarray,
    rngs: Sequence[np.random.Generator],
    noise: NoiseSpec | None,
    noise_rngs: Sequence[np.random.Generator] | None,
) -> np.ndarray:
    """One sampled (noisy) subgradient per agent, evaluated at its own column."""
    n, d = x.shape
    out = np.empty((n, d))
    for i, agent in enumerate(problem.agents):
        j = agent.sample_component(rngs[i])
        g = agent.subgrad(j, x[:, i]).vector
        if noise is not None and noise_rngs is not None:
            g = g + noise.draw(noise_rngs[i], n)
        out[:, i] = g
    if not np.all(np.isfinite(out)):
        raise DivergenceError("sampled subgradient is non-finite")
    return out


def dsgd_step(
    x: np.ndarray,
    w: MixingMatrix,
    problem: GlobalObjective,
    eta: float,
    rngs: Sequence[np.random.Generator],
    noise: NoiseSpec | None = None,
    noise_rngs: Sequence[np.random.Generator] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample at the current states, then mix and descend: X·W − eta·D."""
    d_mat = _sample_directions(problem, x, rngs, noise, noise_rngs)
    return consensus_step(x, w, d_mat, eta), d_mat


def momentum_step(
    x: np.ndarray,
    y: np.ndarray,
    w: MixingMatrix,
    phi: str,
    tau: float,
    problem: GlobalObjective,
    eta: float,
    rngs: Sequence[np.random.Generator],
    noise: NoiseSpec | None = None,
    noise_rngs: Sequence[np.random.Generator] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Momentum-family round: move X along the phi-selection of Y, then refresh Y
    with subgradients sampled at the new states.

        X' = X·W − eta·Φ(Y)
        Y' = (1 − tau·eta)·Y·W + tau·eta·D'   with D' sampled at X'

    Returns (X', Y', D', t_mat) where t_mat is the phi-selection used.
    """
    if tau * eta > 1.0:
        warnings.warn(
            f"tau*eta = {tau * eta:.4g} > 1: the momentum update left the "
            "convex-combination regime",
            stacklevel=2,
        )
    t_mat = np.column_stack([phi_select(phi, y[:, i]) for i in range(y.shape[1])])
    x_next = consensus_step(x, w, t_mat, eta)
    d_next = _sample_directions(problem, x_next, rngs, noise, noise_rngs)
    y_mixed = y @ w.entries
    y_next = (1.0 - tau * eta) * y_mixed + (tau * eta) * d_next
    if not np.all(np.isfinite(y_next)):
        raise DivergenceError("momentum update produced a non-finite state")
    return x_next, y_next, d_next, t_mat


def tracking_step(
    x: np.ndarray,
    v: np.ndarray,
    d_prev: np.ndarray,
    w: MixingMatrix,
    problem: GlobalObjective,
    eta: float,
    rngs: Sequence[np.random.Generator],
    noise: NoiseSpec | None = None,
    noise_rngs: Sequence[np.random.Generator] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tracking round: descend along V, then fold the new subgradients in.

        X' = X·W − eta·V
        V' = (V + D' − D_prev)·W   with D' sampled at X'

    The column sums of V' always equal those of D' (telescoping from the
    initialization V_0 = D_0); a violation beyond tolerance means a bug.
    """
    x_next = consensus_step(x, w, v, eta)
    d_next = _sample_directions(problem, x_next, rngs, noise, noise_rngs)
    v_next = (v + d_next - d_prev) @ w.entries
    gap = float(np.max(np.abs((v_next - d_next).sum(axis=1))))
    if gap > TRACKING_TOL:
        raise TrackingConsistencyError(
            f"tracking identity violated: max |(V−D)·1| = {gap:.3e} > {TRACKING_TOL}"
        )
    return x_next, v_next, d_next


def _spec_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, ord=2))


def _perp(z: np.ndarray) -> np.ndarray:
    return z - np.mean(z, axis=1, keepdims=True)


def run(
    problem: GlobalObjective,
    w: MixingMatrix,
    algo: AlgorithmConfig,
    schedule: StepSchedule,
    iterations: int,
    seed: int,
    *,
    record_stride: int = 10,
    history: int = 0,
    divergence_bound: float = 1e8,
    noise: NoiseSpec | None = None,
    record_agent_values: bool = False,
    record_stationarity: bool = True,
    on_step: Callable[[StepEvent], None] | None = None,
) -> RunTrace:
    """Execute one algorithm for a fixed budget, fully determined by the seed.

    Diagnostics are recorded every `record_stride` iterations plus at the final
    state; the disagreement and step spectral norms are instrumented at every
    iteration. A divergence-guard trip truncates the trace and marks it rather
    than raising.
    """
    d = w.d
    if problem.num_agents != d:
        raise ValueError(f"problem has {problem.num_agents} agents but W is {d}x{d}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    n = problem.dimension
    eta0 = schedule.eta(0)

    rngs = [agent_stream(seed, i) for i in range(d)]
    noise_rngs = [noise_stream(seed, i) for i in range(d)] if noise is not None else None
    x0 = np.asarray(problem.initial_point(init_stream(seed)), dtype=float)
    x = np.tile(x0[:, None], (1, d))

    y = v = d_prev = None
    tau = phi = None
    if algo.uses_momentum:
        phi = algo.resolved_phi()
        tau = algo.resolved_tau(eta0)
        d0 = _sample_directions(problem, x, rngs, noise, noise_rngs)
        y = (1.0 - tau * eta0) * (d0 @ w.entries) + (tau * eta0) * d0
    elif algo.variant == "dsgd_t":
        d_prev = _sample_directions(problem, x, rngs, noise, noise_rngs)
        v = d_prev.copy()

    def stacked() -> np.ndarray:
        return x if y is None else np.vstack([x, y])

    recs: dict[str, list[float]] = {key: [] for key in ("k", "eta", "lam", "f", "cons", "znorm")}
    stat_vals: list[float] = []
    lyap_vals: list[float] = []
    agent_vals: list[np.ndarray] = []
    want_stat = record_stationarity
    hist: list[np.ndarray] | None = [] if history > 0 else None
    hist_start = 0

    def record(k: int) -> None:
        xbar = x @ np.full(d, 1.0 / d)
        recs["k"].append(k)
        recs["eta"].append(schedule.eta(k))
        recs["lam"].append(schedule.cumulative_time(k))
        recs["f"].append(problem.value(xbar))
        recs["cons"].append(consensus_error(x))
        recs["znorm"].append(float(np.linalg.norm(stacked())))
        if want_stat:
            stat_vals.append(stationarity_measure(problem, xbar))
        if algo.uses_momentum:
            ybar = y @ np.full(d, 1.0 / d)
            lyap_vals.append(lyapunov_value(problem, xbar, ybar, tau, phi))
        if record_agent_values:
            agent_vals.append(np.asarray([problem.value(x[:, i]) for i in range(d)]))

    def remember(k: int) -> None:
        nonlocal hist_start
        if hist is None:
            return
        zbar = stacked() @ np.full(d, 1.0 / d)
        hist.append(zbar)
        if len(hist) > history:
            hist.pop(0)
            hist_start += 1

    perp_norms = np.empty(iterations + 1)
    step_norms = np.empty(iterations)
    perp_norms[0] = _spec_norm(_perp(stacked()))
    tracking_gap = 0.0
    diverged_at: int | None = None
    completed = 0
    last_recorded = -1

    remember(0)
    for k in range(iterations):
        if k % record_stride == 0:
            record(k)
            last_recorded = k
        eta = schedule.eta(k)
        x_before = x
        aux_before = y if y is not None else v
        try:
            if algo.variant == "dsgd":
                x_new, d_mat = dsgd_step(x, w, problem, eta, rngs, noise, noise_rngs)
                direction = d_mat
                y_new = v_new = None
            elif algo.uses_momentum:
                x_new, y_new, d_next, t_mat = momentum_step(
                    x, y, w, phi, tau, problem, eta, rngs, noise, noise_rngs
                )
                # framework-form direction for the stacked system
                direction = np.vstack([t_mat, tau * (y @ w.entries - d_next)])
                v_new = None
            else:
                x_new, v_new, d_next = tracking_step(
                    x, v, d_prev, w, problem, eta, rngs, noise, noise_rngs
                )
                direction = v
                y_new = None
                tracking_gap = max(
                    tracking_gap, float(np.max(np.abs((v_new - d_next).sum(axis=1))))
                )
        except DivergenceError:
            diverged_at = k
            break

        z_new = x_new if y_new is None else np.vstack([x_new, y_new])
        if not np.all(np.isfinite(z_new)) or np.linalg.norm(z_new) > divergence_bound:
            diverged_at = k
            break

        step_norms[k] = eta * _spec_norm(direction)
        perp_norms[k + 1] = _spec_norm(_perp(z_new))
        x = x_new
        if y_new is not None:
            y = y_new
        if v_new is not None:
            v, d_prev = v_new, d_next
        completed = k + 1
        remember(completed)
        if on_step is not None:
            on_step(
                StepEvent(
                    k=k,
                    eta=eta,
                    x_before=x_before,
                    x_after=x,
                    direction=direction,
                    aux_before=aux_before,
                    aux_after=y if y is not None else v,
                )
            )

    if diverged_at is None and last_recorded != completed:
        record(completed)

    history_obj = None
    if hist is not None and hist:
        history_obj = IterateHistory(start=hist_start, states=np.vstack(hist))

    return RunTrace(
        algorithm=algo.variant,
        problem=problem.name,
        seed=seed,
        num_agents=d,
        dimension=n,
        contraction=w.contraction,
        epoch_length=problem.components_per_epoch,
        iterations=iterations,
        completed=completed,
        k=np.asarray(recs["k"], dtype=int),
        eta=np.asarray(recs["eta"]),
        lam=np.asarray(recs["lam"]),
        f_avg=np.asarray(recs["f"]),
        consensus=np.asarray(recs["cons"]),
        z_norm=np.asarray(recs["znorm"]),
        stationarity=np.asarray(stat_vals) if want_stat else None,
        lyapunov=np.asarray(lyap_vals) if algo.uses_momentum else None,
        f_agents=np.vstack(agent_vals) if agent_vals else None,
        perp_norm=perp_norms[: completed + 1],
        step_norm=step_norms[:completed],
        tracking_gap=tracking_gap if algo.variant == "dsgd_t" else None,
        diverged_at=diverged_at,
        history=history_obj,
        final_state=x.copy(),
    )
