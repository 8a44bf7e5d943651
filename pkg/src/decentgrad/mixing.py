"""Mixing matrices: the weights agents use to average with their neighbors.

A valid mixing matrix is symmetric, doubly stochastic, carries the graph's
sparsity pattern, and has all eigenvalues in (-1, 1] with a simple eigenvalue
at 1 whose eigenvector is the uniform averaging vector e = (1/d)·1. One
multiply Z·W performs one synchronous round of neighbor averaging.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .graph import Topology, is_connected

# Absolute tolerance for all stochastic-matrix checks; accumulation error at
# desk scale (d up to a few hundred) stays far below this.
CHECK_TOL = 1e-12

# An eigenvalue counts as "at 1" only if it exceeds this; used for the
# simple-eigenvalue check. Builder outputs on connected graphs have a much
# larger spectral gap.
_UNIT_EIG_GAP = 1e-9


def projections(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Averaging projection P = e·1ᵀ (all entries 1/d) and its complement I − P."""
    p = np.full((d, d), 1.0 / d)
    return p, np.eye(d) - p


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "ok" if c.passed else "FAIL"
            suffix = f" ({c.detail})" if c.detail else ""
            lines.append(f"{c.name}: {status}{suffix}")
        return "\n".join(lines)


@dataclass(frozen=True)
class MixingMatrix:
    """A validated mixing matrix with its contraction factor cached.

    `contraction` is the spectral norm of W(I − P): the per-round geometric
    shrink rate of the disagreement component, strictly below 1 for any valid
    matrix on a connected graph.
    """

    topology: Topology
    entries: np.ndarray
    contraction: float

    def __post_init__(self) -> None:
        self.entries.setflags(write=False)

    @property
    def d(self) -> int:
        return self.topology.num_agents

    def save_csv(self, path: str | Path) -> None:
        """Row-major CSV at full precision (repr round-trips each entry)."""
        lines = [",".join(repr(float(v)) for v in row) for row in self.entries]
        Path(path).write_text("\n".join(lines) + "\n")


def contraction_factor(w: np.ndarray | MixingMatrix) -> float:
    """Spectral norm of W(I − P), i.e. the largest non-principal eigenvalue modulus.

    For symmetric doubly stochastic W, W(I − P) = W − P is symmetric, so the
    spectral norm is the largest absolute eigenvalue of W − P.
    """
    arr = w.entries if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    d = arr.shape[0]
    p, _ = projections(d)
    return float(np.max(np.abs(np.linalg.eigvalsh(arr - p)))) if d > 1 else 0.0


def validate(w: np.ndarray, t: Topology) -> ValidationReport:
    """Check a candidate matrix against every mixing-matrix property.

    Reports, never raises. The sparsity check is one-directional: no nonzero
    entries outside the diagonal-plus-edges pattern (a matrix may still fail
    the spectral checks if it ignores edges, e.g. the identity).
    """
    arr = np.asarray(w, dtype=float)
    d = t.num_agents
    checks: list[CheckResult] = []

    if arr.shape != (d, d):
        checks.append(CheckResult("shape", False, f"got {arr.shape}, want ({d},{d})"))
        return ValidationReport(tuple(checks))
    checks.append(CheckResult("shape", True))

    sym = bool(np.array_equal(arr, arr.T))
    checks.append(CheckResult("symmetry", sym, "" if sym else "W != W.T"))

    nonneg = bool(np.all(arr >= 0.0))
    checks.append(CheckResult("nonnegativity", nonneg, "" if nonneg else f"min entry {arr.min()}"))

    row_err = float(np.max(np.abs(arr.sum(axis=1) - 1.0)))
    checks.append(CheckResult("row_sums", row_err <= CHECK_TOL, f"max |rowsum-1| = {row_err:.2e}"))
    col_err = float(np.max(np.abs(arr.sum(axis=0) - 1.0)))
    checks.append(CheckResult("column_sums", col_err <= CHECK_TOL, f"max |colsum-1| = {col_err:.2e}"))

    allowed = t.adjacency() + np.eye(d)
    off_pattern = float(np.max(np.abs(arr[allowed == 0]))) if np.any(allowed == 0) else 0.0
    checks.append(
        CheckResult("sparsity", off_pattern == 0.0, f"max |entry| off pattern = {off_pattern:.2e}")
    )

    eigs = np.linalg.eigvalsh((arr + arr.T) / 2.0)
    spec_ok = bool(eigs[0] > -1.0 + CHECK_TOL and eigs[-1] <= 1.0 + CHECK_TOL)
    checks.append(
        CheckResult("spectrum", spec_ok, f"eigenvalues in [{eigs[0]:.6g}, {eigs[-1]:.6g}]")
    )

    n_unit = int(np.sum(eigs > 1.0 - _UNIT_EIG_GAP))
    e = np.full(d, 1.0 / d)
    evec_err = float(np.max(np.abs(arr @ e - e)))
    simple = n_unit == 1 and abs(eigs[-1] - 1.0) <= CHECK_TOL and evec_err <= CHECK_TOL
    checks.append(
        CheckResult(
            "simple_unit_eigenvalue",
            simple,
            f"{n_unit} eigenvalue(s) near 1, |We-e| = {evec_err:.2e}",
        )
    )
    return ValidationReport(tuple(checks))


def from_array(w: np.ndarray, t: Topology) -> MixingMatrix:
    """Wrap a user-supplied matrix, raising if any validation check fails."""
    report = validate(w, t)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise ValueError(f"matrix fails mixing checks: {names}\n{report}")
    arr = np.array(w, dtype=float)
    return MixingMatrix(t, arr, contraction_factor(arr))


def metropolis(t: Topology) -> MixingMatrix:
    """Metropolis weights: W(i,j) = 1/(1 + max(deg_i, deg_j)) on edges.

    Diagonal entries absorb the remainder, so every row sums to 1 and the
    diagonal stays strictly positive.
    """
    if not is_connected(t):
        raise ValueError("metropolis weights require a connected topology")
    d = t.num_agents
    deg = t.degrees()
    w = np.zeros((d, d))
    for i, j in t.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return MixingMatrix(t, w, contraction_factor(w))


def laplacian_weights(t: Topology, epsilon: float) -> MixingMatrix:
    """Constant edge weights W = I − ε·L for the combinatorial Laplacian L.

    Requires 0 < ε < 1/deg_max: the upper bound keeps every diagonal entry
    strictly positive and the spectrum inside (-1, 1].
    """
    if not is_connected(t):
        raise ValueError("laplacian weights require a connected topology")
    deg_max = int(t.degrees().max()) if t.edges else 0
    if deg_max == 0:
        return MixingMatrix(t, np.eye(t.num_agents), 0.0)
    if not 0.0 < epsilon < 1.0 / deg_max:
        raise ValueError(
            f"epsilon must lie in (0, 1/deg_max) = (0, {1.0 / deg_max:.6g}), got {epsilon}"
        )
    w = np.eye(t.num_agents) - epsilon * t.laplacian()
    return MixingMatrix(t, w, contraction_factor(w))


def mixing_from_config(t: Topology, cfg: dict[str, Any]) -> MixingMatrix:
    kind = cfg.get("kind", "metropolis")
    if kind == "metropolis":
        return metropolis(t)
    if kind == "laplacian":
        return laplacian_weights(t, float(cfg["epsilon"]))
    raise ValueError(f"unknown mixing kind: {kind!r}")
