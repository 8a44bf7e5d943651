"""Step-size schedules and the cumulative-time axis they induce.

The cumulative time before iteration i is lam(i) = eta_0 + ... + eta_{i-1}
(lam(0) = 0); `iteration_at` inverts it, returning the largest p with
lam(p) <= t. That axis is what the interpolated-trajectory diagnostic runs on.

Kinds:
  polynomial  eta_k = eta0 / (1+k)^p with p in (0, 1]  (sums diverge)
  log_damped  eta_k = eta0 / (1 + log(1+k))^2
  staircase   eta_k = eta0 * factor^(#boundaries <= k)

The staircase is eventually constant, so it does not satisfy the diminishing
o(1/log k) condition; it exists to mirror the standard epoch-decay training
protocol and is flagged as empirical-only by `asymptotics_note`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

_CACHE_BLOCK = 4096


@dataclass
class StepSchedule:
    kind: str
    eta0: float
    exponent: float = 0.6
    factor: float = 0.2
    boundaries: tuple[int, ...] = ()

    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)
    _prefix: np.ndarray = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.kind not in ("polynomial", "log_damped", "staircase"):
            raise ValueError(f"unknown schedule kind: {self.kind!r}")
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        if self.kind == "polynomial" and not 0.0 < self.exponent <= 1.0:
            raise ValueError(
                f"polynomial exponent must lie in (0, 1] so the step sums diverge, "
                f"got {self.exponent}"
            )
        if self.kind == "staircase":
            if not 0.0 < self.factor <= 1.0:
                raise ValueError(f"staircase factor must lie in (0, 1], got {self.factor}")
            bounds = tuple(int(b) for b in self.boundaries)
            if any(b < 0 for b in bounds) or list(bounds) != sorted(set(bounds)):
                raise ValueError("staircase boundaries must be nonnegative, strictly increasing")
            self.boundaries = bounds
        self._prefix = np.zeros(1)

    @property
    def theory_compliant(self) -> bool:
        """True when eta_k·log(k) -> 0 and the step sums diverge."""
        return self.kind in ("polynomial", "log_damped")

    @property
    def asymptotics_note(self) -> str:
        if self.theory_compliant:
            return "diminishing o(1/log k), divergent sums"
        return "empirical-only: eventually constant (epoch-decay protocol)"

    def eta(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"iteration index must be >= 0, got {k}")
        return float(self._eta_array(np.asarray([k]))[0])

    def _eta_array(self, ks: np.ndarray) -> np.ndarray:
        if self.kind == "polynomial":
            return self.eta0 / (1.0 + ks) ** self.exponent
        if self.kind == "log_damped":
            return self.eta0 / (1.0 + np.log1p(ks)) ** 2
        passed = np.searchsorted(np.asarray(self.boundaries), ks, side="right")
        return self.eta0 * self.factor**passed

    def _extend_prefix(self, upto: int) -> None:
        # Caller holds the lock. Extends so that _prefix covers lam(0..upto).
        have = len(self._prefix) - 1
        if upto <= have:
            return
        target = max(upto, have + _CACHE_BLOCK, 2 * have)
        new_ks = np.arange(have, target)
        new = self._prefix[-1] + np.cumsum(self._eta_array(new_ks))
        self._prefix = np.concatenate([self._prefix, new])

    def cumulative_time(self, i: int) -> float:
        """lam(i): total step mass before iteration i; lam(0) = 0."""
        if i < 0:
            raise ValueError(f"iteration index must be >= 0, got {i}")
        with self._lock:
            self._extend_prefix(i)
            return float(self._prefix[i])

    def iteration_at(self, t: float) -> int:
        """Largest p with lam(p) <= t < lam(p+1), for t >= 0."""
        if t < 0:
            raise ValueError(f"time must be >= 0, got {t}")
        with self._lock:
            while self._prefix[-1] <= t:
                self._extend_prefix(len(self._prefix) - 1 + _CACHE_BLOCK)
            idx = int(np.searchsorted(self._prefix, t, side="right")) - 1
            return idx


def schedule_from_config(cfg: dict) -> StepSchedule:
    kind = cfg.get("kind", cfg.get("schedule"))
    if kind == "polynomial":
        return StepSchedule("polynomial", float(cfg["eta0"]), exponent=float(cfg.get("p", 0.6)))
    if kind == "log_damped":
        return StepSchedule("log_damped", float(cfg["eta0"]))
    if kind == "staircase":
        return StepSchedule(
            "staircase",
            float(cfg["eta0"]),
            factor=float(cfg.get("factor", 0.2)),
            boundaries=tuple(int(b) for b in cfg.get("boundaries", ())),
        )
    raise ValueError(f"unknown schedule kind: {kind!r}")
