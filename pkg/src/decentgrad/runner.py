"""Run execution, file emission, and multi-seed comparison campaigns.

Each run directory receives:
  trace.csv            full diagnostic trace (fixed column order)
  metadata.json        config + its sha256, seed, versions, outcome
  train_loss.dat       two columns: epoch-equivalent, f at the average iterate
  consensus_error.dat  two columns: epoch-equivalent, consensus error
  stationarity.dat     when the trace records it
  train_loss.png, consensus_error.png   rendered figures (optional)
  dataset.csv          the synthetic dataset, for relu_mlp problems

Files are written to a temporary ".partial" name and atomically renamed, so a
directory never holds a half-written final file.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .diagnostics import RunTrace, write_trace_csv
from .engine import run as engine_run
from .errors import ConfigError
from .plots import render_band_series, render_series

OUTPUT_ROOT_ENV = "DECENTGRAD_OUTPUT_ROOT"

# sub-specs that must agree across configs in one comparison
_SHARED_COMPARE_KEYS = ("problem", "topology", "mixing", "iterations", "record_stride")


def resolve_output_root(cli_root: str | None = None) -> Path:
    if cli_root:
        return Path(cli_root)
    env = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(env) if env else Path.cwd()


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text)
    os.replace(tmp, path)


def _series_text(x: np.ndarray, y: np.ndarray) -> str:
    return "\n".join(f"{repr(float(a))} {repr(float(b))}" for a, b in zip(x, y)) + "\n"


def _band_text(x, mean, lo, hi) -> str:
    rows = (
        f"{repr(float(a))} {repr(float(m))} {repr(float(l))} {repr(float(h))}"
        for a, m, l, h in zip(x, mean, lo, hi)
    )
    return "\n".join(rows) + "\n"


@dataclass
class RunArtifacts:
    trace: RunTrace
    out_dir: Path
    files: list[Path] = field(default_factory=list)


def _metric_series(trace: RunTrace) -> dict[str, np.ndarray]:
    out = {"train_loss": trace.f_avg, "consensus_error": trace.consensus}
    if trace.stationarity is not None:
        out["stationarity"] = trace.stationarity
    return out


def execute_run(
    config: ExperimentConfig,
    out_dir: Path,
    *,
    seed: int | None = None,
    render: bool = True,
) -> RunArtifacts:
    """Validate, run, and persist one experiment. Returns the trace and file list."""
    resolved = config.resolve()
    eff_seed = config.seed if seed is None else seed
    trace = engine_run(
        resolved.problem,
        resolved.mixing,
        resolved.algorithm,
        resolved.schedule,
        config.iterations,
        eff_seed,
        record_stride=config.record_stride,
        history=config.history,
        divergence_bound=config.divergence_bound,
        noise=resolved.noise,
        record_agent_values=config.record_agent_values,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = RunArtifacts(trace=trace, out_dir=out_dir)

    trace_path = out_dir / "trace.csv"
    tmp = trace_path.with_name(trace_path.name + ".partial")
    write_trace_csv(trace, tmp)
    os.replace(tmp, trace_path)
    artifacts.files.append(trace_path)

    meta = {
        "name": config.name,
        "algorithm": resolved.algorithm.variant,
        "config": config.to_dict(),
        "config_sha256": config.sha256(),
        "seed": eff_seed,
        "records": int(len(trace.k)),
        "completed_iterations": int(trace.completed),
        "diverged_at": trace.diverged_at,
        "contraction": trace.contraction,
        "versions": {
            "decentgrad": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    meta_path = out_dir / "metadata.json"
    _atomic_write_text(meta_path, json.dumps(meta, sort_keys=True, indent=2) + "\n")
    artifacts.files.append(meta_path)

    x_axis = trace.epoch_axis()
    for metric, values in _metric_series(trace).items():
        dat = out_dir / f"{metric}.dat"
        _atomic_write_text(dat, _series_text(x_axis, values))
        artifacts.files.append(dat)

    if resolved.problem.dataset is not None:
        inputs, targets = resolved.problem.dataset
        targets2d = np.asarray(targets, dtype=float)
        if targets2d.ndim == 1:
            targets2d = targets2d[:, None]
        header = [f"x{i}" for i in range(inputs.shape[1])] + [
            f"y{i}" for i in range(targets2d.shape[1])
        ]
        rows = [",".join(header)]
        for xi, yi in zip(inputs, targets2d):
            rows.append(",".join(repr(float(v)) for v in list(xi) + list(yi)))
        ds_path = out_dir / "dataset.csv"
        _atomic_write_text(ds_path, "\n".join(rows) + "\n")
        artifacts.files.append(ds_path)

    if render:
        for metric, values in _metric_series(trace).items():
            fig_path = out_dir / f"{metric}.png"
            render_series(
                fig_path,
                [(config.name, x_axis, values)],
                xlabel="epoch equivalent",
                ylabel=metric.replace("_", " "),
                logy=metric != "train_loss",
            )
            artifacts.files.append(fig_path)

    return artifacts


@dataclass
class MethodResult:
    name: str
    traces: list[RunTrace]
    run_dirs: list[Path]

    def metric_matrix(self, metric: str) -> np.ndarray | None:
        """Rows = seeds, truncated to the shortest record count."""
        series = []
        for t in self.traces:
            vals = _metric_series(t).get(metric)
            if vals is None:
                return None
            series.append(vals)
        n = min(len(s) for s in series)
        return np.vstack([s[:n] for s in series])

    @property
    def diverged_count(self) -> int:
        return sum(1 for t in self.traces if t.diverged)


@dataclass
class CompareResult:
    methods: list[MethodResult]
    seeds: list[int]
    out_dir: Path
    summary_rows: list[dict[str, object]]
    files: list[Path] = field(default_factory=list)

    @property
    def any_diverged(self) -> bool:
        return any(m.diverged_count for m in self.methods)


def _check_comparable(configs: list[ExperimentConfig]) -> None:
    if not configs:
        raise ConfigError("compare needs at least one config")
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError(f"compare configs must have distinct names, got {names}")
    base = configs[0]
    for other in configs[1:]:
        for key in _SHARED_COMPARE_KEYS:
            a = json.dumps(base.raw.get(key), sort_keys=True)
            b = json.dumps(other.raw.get(key), sort_keys=True)
            if a != b:
                raise ConfigError(
                    f"compare configs disagree on '{key}': {base.name} has {a}, "
                    f"{other.name} has {b}"
                )


def execute_compare(
    configs: list[ExperimentConfig],
    seeds: list[int],
    out_dir: Path,
    *,
    render: bool = True,
) -> CompareResult:
    """Run each config over the seed list (shared initial points per seed),
    then aggregate mean/min/max series per method and a summary table."""
    _check_comparable(configs)
    if not seeds:
        raise ConfigError("compare needs at least one seed")
    for config in configs:
        config.resolve()  # fail fast before any run starts

    methods: list[MethodResult] = []
    for config in configs:
        traces, dirs = [], []
        for s in seeds:
            run_dir = out_dir / config.name / f"seed_{s}"
            art = execute_run(config, run_dir, seed=s, render=False)
            traces.append(art.trace)
            dirs.append(run_dir)
        methods.append(MethodResult(config.name, traces, dirs))

    result = CompareResult(methods=methods, seeds=list(seeds), out_dir=out_dir, summary_rows=[])
    out_dir.mkdir(parents=True, exist_ok=True)

    metrics = ["train_loss", "consensus_error"]
    if all(m.metric_matrix("stationarity") is not None for m in methods):
        metrics.append("stationarity")

    for metric in metrics:
        band_series = []
        for m in methods:
            mat = m.metric_matrix(metric)
            n = mat.shape[1]
            x = m.traces[0].epoch_axis()[:n]
            mean, lo, hi = mat.mean(axis=0), mat.min(axis=0), mat.max(axis=0)
            dat = out_dir / f"{m.name}_{metric}.dat"
            _atomic_write_text(dat, _band_text(x, mean, lo, hi))
            result.files.append(dat)
            band_series.append((m.name, x, mean, lo, hi))
        if render:
            fig = out_dir / f"compare_{metric}.png"
            render_band_series(
                fig,
                band_series,
                xlabel="epoch equivalent",
                ylabel=metric.replace("_", " "),
                logy=metric != "train_loss",
            )
            result.files.append(fig)

    for m in methods:
        row: dict[str, object] = {"method": m.name, "seeds": len(seeds)}
        for metric in metrics:
            mat = m.metric_matrix(metric)
            row[f"final_{metric}_mean"] = float(mat[:, -1].mean())
            row[f"final_{metric}_min"] = float(mat[:, -1].min())
            row[f"final_{metric}_max"] = float(mat[:, -1].max())
        row["diverged"] = m.diverged_count
        result.summary_rows.append(row)

    headers = list(result.summary_rows[0])
    lines = [",".join(headers)]
    for row in result.summary_rows:
        lines.append(",".join(str(row[h]) for h in headers))
    summary_path = out_dir / "summary.csv"
    _atomic_write_text(summary_path, "\n".join(lines) + "\n")
    result.files.append(summary_path)
    return result


def format_summary(result: CompareResult) -> str:
    lines = [f"compared {len(result.methods)} method(s) over seeds {result.seeds}:"]
    for row in result.summary_rows:
        parts = [f"{row['method']}:"]
        for key, val in row.items():
            if key.startswith("final_") and key.endswith("_mean"):
                metric = key[len("final_") : -len("_mean")]
                parts.append(f"{metric}={val:.4g}")
        if row["diverged"]:
            parts.append(f"DIVERGED x{row['diverged']}")
        lines.append("  " + " ".join(parts))
    return "\n".join(lines)
