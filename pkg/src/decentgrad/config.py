"""Experiment configuration: a single JSON file describing one run.

The dialect is JSON so configs round-trip bit-exactly; the sha256 of the
canonical dump (sorted keys, compact separators) is the tamper-evidence hash
recorded in run metadata.

Top-level fields:
  problem    {"kind": "median"|"l1_quadratic"|"relu_mlp", ...}
  topology   {"kind": "ring"|"complete"|"random"|"explicit", "d": int, ...}
  mixing     {"kind": "metropolis"|"laplacian", ...}        (default metropolis)
  algorithm  {"variant": "dsgd"|"dsgdm"|"dsignsgd"|"dsgd_t", "tau"?, "phi"?}
  schedule   {"kind": "polynomial"|"log_damped"|"staircase", "eta0", ...}
  iterations, seed                                          (required)
  name, record_stride, output_dir, history, noise,
  divergence_bound, record_agent_values                     (optional)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .engine import AlgorithmConfig, NoiseSpec
from .errors import ConfigError
from .graph import Topology, is_connected, topology_from_config
from .mixing import MixingMatrix, mixing_from_config, validate
from .oracle import GlobalObjective, problem_from_config
from .schedule import StepSchedule, schedule_from_config

_KNOWN_KEYS = {
    "name", "problem", "topology", "mixing", "algorithm", "schedule",
    "iterations", "seed", "record_stride", "output_dir", "history", "noise",
    "divergence_bound", "record_agent_values",
}


@dataclass(frozen=True)
class ResolvedExperiment:
    """All validated components of one experiment, ready to run."""

    problem: GlobalObjective
    topology: Topology
    mixing: MixingMatrix
    algorithm: AlgorithmConfig
    schedule: StepSchedule
    noise: NoiseSpec | None


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict[str, Any]

    def __post_init__(self) -> None:
        unknown = set(self.raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        for key in ("problem", "topology", "algorithm", "schedule", "iterations", "seed"):
            if key not in self.raw:
                raise ConfigError(f"missing required config field: {key}")

    # -- plain accessors ----------------------------------------------------

    @property
    def name(self) -> str:
        return str(self.raw.get("name", self.raw["algorithm"].get("variant", "run")))

    @property
    def iterations(self) -> int:
        return int(self.raw["iterations"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def record_stride(self) -> int:
        return int(self.raw.get("record_stride", 10))

    @property
    def output_dir(self) -> str:
        return str(self.raw.get("output_dir", f"runs/{self.name}"))

    @property
    def history(self) -> int:
        return int(self.raw.get("history", 0))

    @property
    def divergence_bound(self) -> float:
        return float(self.raw.get("divergence_bound", 1e8))

    @property
    def record_agent_values(self) -> bool:
        return bool(self.raw.get("record_agent_values", False))

    # -- serialization --------------------------------------------------------

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls(data)

    def to_dict(self) -> dict[str, Any]:
        return json.loads(self.canonical_json())

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.raw, sort_keys=True, indent=2) + "\n")

    # -- validation / resolution ----------------------------------------------

    def resolve(self) -> ResolvedExperiment:
        """Build and validate every component; raise ConfigError naming the field."""
        try:
            topology = topology_from_config(self.raw["topology"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"topology: {exc}") from exc
        if not is_connected(topology):
            raise ConfigError("topology: graph is not connected")

        try:
            mix = mixing_from_config(topology, self.raw.get("mixing", {"kind": "metropolis"}))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"mixing: {exc}") from exc
        report = validate(mix.entries, topology)
        if not report.passed:
            raise ConfigError(f"mixing: built matrix failed checks\n{report}")

        try:
            problem = problem_from_config(self.raw["problem"], topology.num_agents)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"problem: {exc}") from exc

        try:
            sched = schedule_from_config(self.raw["schedule"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"schedule: {exc}") from exc

        algo_raw = self.raw["algorithm"]
        try:
            algo = AlgorithmConfig(
                variant=str(algo_raw["variant"]).replace("-", "_"),
                tau=float(algo_raw["tau"]) if "tau" in algo_raw else None,
                phi=algo_raw.get("phi"),
            )
            if algo.uses_momentum:
                algo.resolved_tau(sched.eta(0))  # tau*eta0 <= 1 check
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"algorithm: {exc}") from exc

        noise_raw = self.raw.get("noise")
        noise = None
        if noise_raw is not None:
            try:
                noise = NoiseSpec(str(noise_raw["kind"]), float(noise_raw["scale"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"noise: {exc}") from exc

        if self.iterations < 1:
            raise ConfigError("iterations: must be >= 1")
        if self.record_stride < 1:
            raise ConfigError("record_stride: must be >= 1")

        return ResolvedExperiment(problem, topology, mix, algo, sched, noise)

    def with_overrides(self, **kwargs: Any) -> "ExperimentConfig":
        merged = dict(self.raw)
        merged.update(kwargs)
        return ExperimentConfig(merged)

    def validation_summary(self) -> str:
        """Human-readable validation report (used by --validate-only)."""
        resolved = self.resolve()
        lines = [
            f"config {self.name}: ok (sha256 {self.sha256()[:12]})",
            f"  problem: {resolved.problem.name}, dimension {resolved.problem.dimension}, "
            f"{resolved.problem.num_agents} agents, "
            f"{resolved.problem.components_per_epoch} component(s)/epoch",
            f"  topology: {len(resolved.topology.edges)} edges, connected",
            f"  mixing: contraction {resolved.mixing.contraction:.6f}",
            f"  schedule: {resolved.schedule.kind} (eta0={resolved.schedule.eta0}; "
            f"{resolved.schedule.asymptotics_note})",
            f"  algorithm: {resolved.algorithm.variant}"
            + (
                f" (phi={resolved.algorithm.resolved_phi()}, "
                f"tau={resolved.algorithm.resolved_tau(resolved.schedule.eta(0)):.6g})"
                if resolved.algorithm.uses_momentum
                else ""
            ),
            f"  iterations: {self.iterations}, seed: {self.seed}, "
            f"record stride: {self.record_stride}",
        ]
        for check in validate(resolved.mixing.entries, resolved.topology).checks:
            lines.append(f"  mixing check {check.name}: {'ok' if check.passed else 'FAIL'}")
        return "\n".join(lines)
