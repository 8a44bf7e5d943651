"""Per-agent finite-sum objectives with stochastic subgradient evaluation.

Each agent i owns f_i(x) = (1/N_i) * sum_j f_{i,j}(x); a step samples one
component uniformly and evaluates a fixed subgradient selection of it. All
set-valued maps use the same selection rules (the conventions autodiff
frameworks apply), so every returned vector is a valid element of the
component's subdifferential-style field:

    ReLU'(0) = 0,   d|u|/du at 0 = 0,   sign(0) = 0.

Built-in problem families:
  median        f_{i,j}(x) = ||x - a_{i,j}||_1          (critical set known)
  l1_quadratic  f_{i,j}(x) = 0.5*||x - c_{i,j}||^2 + lam*||x||_1
  relu_mlp      minibatch loss of a two-layer ReLU network on synthetic data
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from . import mlp as mlp_mod
from .streams import data_stream


def sign_select(y: np.ndarray) -> np.ndarray:
    """Elementwise selected sign: -1 / 0 / +1, with 0 chosen at exact zeros."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("sign selection requires finite input")
    return np.sign(y)


def phi_value(tag: str, y: np.ndarray) -> float:
    """Auxiliary-function value used by the momentum family."""
    if tag == "half_sq_norm":
        return 0.5 * float(np.dot(y, y))
    if tag == "l1_norm":
        return float(np.sum(np.abs(y)))
    raise ValueError(f"unknown auxiliary function: {tag!r}")


def phi_select(tag: str, y: np.ndarray) -> np.ndarray:
    """A selected subgradient of the auxiliary function at y."""
    if tag == "half_sq_norm":
        return np.asarray(y, dtype=float)
    if tag == "l1_norm":
        return sign_select(y)
    raise ValueError(f"unknown auxiliary function: {tag!r}")


@dataclass(frozen=True)
class SubgradientSample:
    component: int
    vector: np.ndarray


class Component(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def subgrad(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class AbsoluteDeviation:
    """f(x) = ||x - anchor||_1; subgradient selection sign(x - anchor)."""

    anchor: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(np.abs(x - self.anchor)))

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        return sign_select(x - self.anchor)

    def kink_gap(self, x: np.ndarray) -> float:
        return float(np.min(np.abs(x - self.anchor)))


@dataclass(frozen=True)
class QuadraticPlusL1:
    """f(x) = 0.5*||x - center||^2 + lam*||x||_1."""

    center: np.ndarray
    lam: float

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(np.sum((x - self.center) ** 2)) + self.lam * float(np.sum(np.abs(x)))

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) + self.lam * sign_select(x)

    def kink_gap(self, x: np.ndarray) -> float:
        return float(np.min(np.abs(x))) if self.lam > 0 else np.inf


@dataclass(frozen=True)
class MiniBatchLoss:
    """Loss of a two-layer ReLU network on one fixed minibatch."""

    spec: mlp_mod.MlpSpec
    inputs: np.ndarray
    targets: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return mlp_mod.loss_value(self.spec, x, self.inputs, self.targets)

    def subgrad(self, x: np.ndarray) -> np.ndarray:
        _, g = mlp_mod.loss_and_subgrad(self.spec, x, self.inputs, self.targets)
        return g

    def kink_gap(self, x: np.ndarray) -> float:
        return mlp_mod.min_preactivation_gap(self.spec, x, self.inputs)


@dataclass(frozen=True)
class AgentObjective:
    """One agent's finite-sum objective f_i = (1/N_i) * sum of components."""

    agent_id: int
    components: tuple[Component, ...]
    dimension: int

    def __post_init__(self) -> None:
        if len(self.components) < 1:
            raise ValueError("an agent needs at least one component")

    @property
    def num_components(self) -> int:
        return len(self.components)

    def value(self, x: np.ndarray) -> float:
        return float(np.mean([c.value(x) for c in self.components]))

    def component_value(self, j: int, x: np.ndarray) -> float:
        return self.components[j].value(x)

    def sample_component(self, rng: np.random.Generator) -> int:
        """Uniform component index; consumes exactly one draw from the stream."""
        return int(rng.integers(0, self.num_components))

    def subgrad(self, j: int, x: np.ndarray) -> SubgradientSample:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("subgradient evaluation requires a finite point")
        g = self.components[j].subgrad(x)
        return SubgradientSample(component=j, vector=g)

    def full_subgrad(self, x: np.ndarray) -> np.ndarray:
        """Average of the selected subgradients over all components."""
        return np.mean([c.subgrad(x) for c in self.components], axis=0)


@dataclass(frozen=True)
class GlobalObjective:
    """f(x) = (1/d) * sum of agent objectives, plus problem-level metadata."""

    name: str
    agents: tuple[AgentObjective, ...]
    dimension: int
    # Exact dist(0, D_f(x)) when the field is known analytically, else None.
    exact_stationarity: Callable[[np.ndarray], float] | None = None
    # Draws the shared initial point for a run.
    init_sampler: Callable[[np.random.Generator], np.ndarray] | None = None
    # Finite-sum size per agent; one "epoch" = this many iterations.
    components_per_epoch: int = 1
    dataset: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def value(self, x: np.ndarray) -> float:
        return float(np.mean([a.value(x) for a in self.agents]))

    def agent_values(self, x: np.ndarray) -> np.ndarray:
        return np.asarray([a.value(x) for a in self.agents])

    def mean_full_subgrad(self, x: np.ndarray) -> np.ndarray:
        return np.mean([a.full_subgrad(x) for a in self.agents], axis=0)

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        if self.init_sampler is not None:
            return self.init_sampler(rng)
        return rng.standard_normal(self.dimension)

    def kink_gap(self, x: np.ndarray) -> float:
        """Distance to the nearest nondifferentiability across all components."""
        gaps = [
            getattr(c, "kink_gap", lambda _x: np.inf)(x)
            for a in self.agents
            for c in a.components
        ]
        return float(min(gaps))


def subgrad(obj: AgentObjective, j: int, x: np.ndarray) -> SubgradientSample:
    """Module-level alias for `AgentObjective.subgrad`."""
    return obj.subgrad(j, x)


def stationarity_measure(objective: GlobalObjective, x: np.ndarray, num_samples: int = 1) -> float:
    """Distance of 0 to the averaged subdifferential-style field at x.

    Exact for problem families that declare an analytic field (median,
    l1_quadratic). Otherwise returns the norm of the mean full-batch
    subgradient selection across agents — a surrogate, not an upper or lower
    bound on the true measure. The selections are deterministic, so extra
    samples only re-average identical evaluations.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if objective.exact_stationarity is not None:
        return objective.exact_stationarity(np.asarray(x, dtype=float))
    grads = [objective.mean_full_subgrad(x) for _ in range(num_samples)]
    return float(np.linalg.norm(np.mean(grads, axis=0)))


def relu_mlp_loss_and_subgrad(
    spec: mlp_mod.MlpSpec, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Loss and subgradient selection of the ReLU network on one batch."""
    return mlp_mod.loss_and_subgrad(spec, params, inputs, targets)


def finite_difference_gradient(
    func: Callable[[np.ndarray], float], x: np.ndarray, relative_step: float = 1e-6
) -> np.ndarray:
    """Central finite differences with per-coordinate step h_c = step*(1+|x_c|).

    The independent oracle used to cross-check subgradient selections at
    differentiable points.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for c in range(x.size):
        h = relative_step * (1.0 + abs(x[c]))
        xp, xm = x.copy(), x.copy()
        xp[c] += h
        xm[c] -= h
        grad[c] = (func(xp) - func(xm)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Problem families


def _as_vectors(entries: Any, what: str) -> list[np.ndarray]:
    """Normalize one agent's anchors/centers: scalar, vector, or list of vectors."""
    arr = np.asarray(entries, dtype=float)
    if arr.ndim == 0:
        return [arr.reshape(1)]
    if arr.ndim == 1:
        return [arr]
    if arr.ndim == 2:
        return [row for row in arr]
    raise ValueError(f"{what} must be scalar, vector, or list of vectors")


def _interval_field_distance(lo: np.ndarray, hi: np.ndarray) -> float:
    """dist(0, product of per-coordinate intervals [lo_c, hi_c]), in l2."""
    per_coord = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))
    return float(np.linalg.norm(per_coord))


def median_problem(anchors: Any, init_scale: float = 2.0) -> GlobalObjective:
    """Decentralized l1-median: agent i holds f_i(x) = mean_j ||x - a_{i,j}||_1.

    The averaged field decomposes per coordinate into an interval of weighted
    sign sums, so dist(0, field) is computed exactly.
    """
    per_agent = [_as_vectors(a, "anchors") for a in anchors]
    dim = per_agent[0][0].size
    agents = []
    flat: list[tuple[float, np.ndarray]] = []  # (weight, anchor)
    d = len(per_agent)
    for i, vecs in enumerate(per_agent):
        comps = tuple(AbsoluteDeviation(np.asarray(v, dtype=float)) for v in vecs)
        for v in vecs:
            if v.size != dim:
                raise ValueError("all anchors must share one dimension")
            flat.append((1.0 / (d * len(vecs)), v))
        agents.append(AgentObjective(i, comps, dim))

    weights = np.asarray([w for w, _ in flat])
    anchor_mat = np.stack([v for _, v in flat])  # (M, dim)

    def exact(x: np.ndarray) -> float:
        diff = x[None, :] - anchor_mat
        s = np.sign(diff)
        at_kink = diff == 0.0
        lo = weights @ np.where(at_kink, -1.0, s)
        hi = weights @ np.where(at_kink, 1.0, s)
        return _interval_field_distance(lo, hi)

    n_comp = len(per_agent[0])
    return GlobalObjective(
        name="median",
        agents=tuple(agents),
        dimension=dim,
        exact_stationarity=exact,
        init_sampler=lambda rng: init_scale * rng.standard_normal(dim),
        components_per_epoch=n_comp,
    )


def l1_quadratic_problem(centers: Any, lam: float, init_scale: float = 2.0) -> GlobalObjective:
    """Quadratic-plus-l1: agent i holds mean_j [0.5*||x - c_{i,j}||^2 + lam*||x||_1].

    Minimizer is the soft-threshold of the mean center; the field is
    x - mean_center + lam*Sign(x), exact per coordinate.
    """
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    per_agent = [_as_vectors(c, "centers") for c in centers]
    dim = per_agent[0][0].size
    agents = []
    all_centers = []
    for i, vecs in enumerate(per_agent):
        comps = tuple(QuadraticPlusL1(np.asarray(v, dtype=float), lam) for v in vecs)
        for v in vecs:
            if v.size != dim:
                raise ValueError("all centers must share one dimension")
        all_centers.append(np.mean(vecs, axis=0))
        agents.append(AgentObjective(i, comps, dim))
    mean_center = np.mean(all_centers, axis=0)

    def exact(x: np.ndarray) -> float:
        base = x - mean_center
        s = np.sign(x)
        at_zero = x == 0.0
        lo = base + lam * np.where(at_zero, -1.0, s)
        hi = base + lam * np.where(at_zero, 1.0, s)
        return _interval_field_distance(lo, hi)

    n_comp = len(per_agent[0])
    return GlobalObjective(
        name="l1_quadratic",
        agents=tuple(agents),
        dimension=dim,
        exact_stationarity=exact,
        init_sampler=lambda rng: init_scale * rng.standard_normal(dim),
        components_per_epoch=n_comp,
    )


def relu_mlp_problem(
    widths: tuple[int, int, int],
    num_agents: int,
    n_samples: int,
    batch_size: int,
    data_seed: int,
    *,
    noise_sigma: float = 0.05,
    loss: str = "mse",
) -> GlobalObjective:
    """Two-layer ReLU network regression/classification on synthetic data.

    The dataset is split into equal contiguous blocks per agent, and each
    agent's block into fixed minibatch components, so the finite-sum structure
    is explicit and one epoch = (block / batch_size) iterations.
    """
    n_in, n_hidden, n_out = (int(w) for w in widths)
    spec = mlp_mod.MlpSpec(n_in, n_hidden, n_out, loss=loss)
    if n_samples % num_agents != 0:
        raise ValueError(f"{n_samples} samples do not split evenly over {num_agents} agents")
    per_agent = n_samples // num_agents
    if per_agent % batch_size != 0:
        raise ValueError(f"per-agent block {per_agent} not divisible by batch {batch_size}")
    rng = data_stream(data_seed)
    if loss == "mse":
        inputs, targets = mlp_mod.synthetic_regression(spec, n_samples, rng, noise_sigma=noise_sigma)
    else:
        inputs, targets = mlp_mod.synthetic_classification(spec, n_samples, rng)

    agents = []
    for i in range(num_agents):
        lo = i * per_agent
        comps = []
        for b in range(per_agent // batch_size):
            s = slice(lo + b * batch_size, lo + (b + 1) * batch_size)
            comps.append(MiniBatchLoss(spec, inputs[s], targets[s]))
        agents.append(AgentObjective(i, tuple(comps), spec.n_params))

    return GlobalObjective(
        name="relu_mlp",
        agents=tuple(agents),
        dimension=spec.n_params,
        exact_stationarity=None,
        init_sampler=spec.init_params,
        components_per_epoch=per_agent // batch_size,
        dataset=(inputs, targets),
    )


def problem_from_config(cfg: dict[str, Any], num_agents: int) -> GlobalObjective:
    kind = cfg.get("kind")
    if kind == "median":
        anchors = cfg["anchors"]
        if len(anchors) != num_agents:
            raise ValueError(f"{len(anchors)} anchor groups for {num_agents} agents")
        return median_problem(anchors, init_scale=float(cfg.get("init_scale", 2.0)))
    if kind == "l1_quadratic":
        centers = cfg["centers"]
        if len(centers) != num_agents:
            raise ValueError(f"{len(centers)} center groups for {num_agents} agents")
        return l1_quadratic_problem(
            centers, float(cfg["lam"]), init_scale=float(cfg.get("init_scale", 2.0))
        )
    if kind == "relu_mlp":
        return relu_mlp_problem(
            tuple(cfg["widths"]),
            num_agents,
            int(cfg["samples"]),
            int(cfg.get("batch", 16)),
            int(cfg.get("data_seed", 0)),
            noise_sigma=float(cfg.get("noise_sigma", 0.05)),
            loss=str(cfg.get("loss", "mse")),
        )
    raise ValueError(f"unknown problem kind: {kind!r}")
