"""Report assembly and machine-readable outputs for the experiment commands.

All files are written with fixed column order, fixed newline discipline,
and round-trip float formatting, so identical (config, seed) inputs yield
byte-identical outputs regardless of worker count.  Every CSV starts with
a ``# key=value`` provenance block whose first line carries the schema
version; downstream consumers refuse anything else.
"""

from __future__ import annotations

import json
from pathlib import Path

from ._version import __version__
from .config import ExperimentConfig
from .controller import ControlProblem, EnsembleResult, SweepResult, apriori_bound
from .inclusion import PathRealization

SWEEP_SCHEMA_KEY = "thermoctl_sweep_schema"
TRAJ_SCHEMA_KEY = "thermoctl_traj_schema"
REPORT_SCHEMA_KEY = "thermoctl_report_schema"
SCHEMA_VERSION = 1

SWEEP_COLUMNS = ("eps", "error_mean", "error_ci", "energy_mean", "fp_rate", "wallclock_s")


def _fmt(x) -> str:
    """Round-trip decimal formatting; the shortest repr is deterministic."""
    return repr(float(x))


def sweep_metadata(config: ExperimentConfig, problem: ControlProblem) -> dict:
    meta = {
        SWEEP_SCHEMA_KEY: str(SCHEMA_VERSION),
        "version": __version__,
        "config_hash": config.config_hash(),
        "seed": str(problem.seed),
        "paths": str(problem.paths),
        "a": _fmt(problem.horizon),
        "modes": str(problem.modes),
        "steps": str(problem.steps),
        "gamma1": _fmt(problem.gram.gammas[0]),
        "reference_curve": "resolvent_mode1" if config.is_linear_reference() else "none",
    }
    return meta


def render_sweep_csv(sweep: SweepResult, meta: dict) -> str:
    """Fixed six-column table; failed rows carry nan and a header annotation."""
    lines = [f"# {k}={v}" for k, v in meta.items()]
    for row in sweep.rows:
        if row.failed:
            note = row.message.replace("\n", " ")
            lines.append(f"# failed eps={_fmt(row.eps)}: {note}")
    lines.append(",".join(SWEEP_COLUMNS))
    for row in sweep.rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in SWEEP_COLUMNS))
    return "\n".join(lines) + "\n"


def sweep_payload(sweep: SweepResult, meta: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "metadata": meta,
        "columns": list(SWEEP_COLUMNS),
        "rows": [
            {
                **{col: float(getattr(row, col)) for col in SWEEP_COLUMNS},
                "failed": row.failed,
                "message": row.message,
            }
            for row in sweep.rows
        ],
    }


def build_run_report(
    config: ExperimentConfig,
    problem: ControlProblem,
    ensemble: EnsembleResult,
    wallclock_s: float = 0.0,
) -> dict:
    """Per-eps ensemble report: errors with CI, bound check, residual summaries."""
    bound = apriori_bound(problem)
    confidence = config.confidence_level
    report = {
        "schema": {REPORT_SCHEMA_KEY: SCHEMA_VERSION},
        "provenance": {
            "version": __version__,
            "config_hash": config.config_hash(),
            "seed": problem.seed,
            "paths": problem.paths,
        },
        "eps": ensemble.eps,
        "terminal_error": {
            "mean": ensemble.error_mean,
            "ci_half_width": ensemble.error_ci(confidence),
            "confidence": confidence,
        },
        "control_energy_mean": ensemble.energy_mean,
        "fixed_point": {
            "convergence_rate": ensemble.fp_rate,
            "iterations_mean": float(ensemble.iterations.mean()),
            "iterations_max": int(ensemble.iterations.max()),
        },
        "apriori": {
            "bound": bound.value,
            "observed_sup_moment": ensemble.sup_moment,
            "satisfied": bool(ensemble.sup_moment <= bound.value),
            "k1": bound.k1,
            "k2": bound.k2,
            "k3": bound.k3,
            "k4": bound.k4,
        },
        "residuals": {
            "terminal_identity_max": float(ensemble.identity_residuals.max()),
            "weak_max": None
            if ensemble.weak_max is None
            else float(ensemble.weak_max.max()),
            "hvi_min_slack": None
            if ensemble.hvi_min is None
            else float(ensemble.hvi_min.min()),
        },
        "wallclock_s": wallclock_s,
    }
    return report


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for key in obj:
            _flatten(f"{prefix}{key}." if not prefix else f"{prefix}{key}.", obj[key], out)
    else:
        out.append((prefix.rstrip("."), obj))


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    flat: list = []
    for key, value in report.items():
        _flatten(f"{key}.", value, flat) if isinstance(value, dict) else flat.append((key, value))
    lines = [f"# {REPORT_SCHEMA_KEY}={SCHEMA_VERSION}", "key,value"]
    for key, value in flat:
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif value is None:
            text = ""
        elif isinstance(value, float):
            text = _fmt(value)
        else:
            text = str(value)
        lines.append(f"{key},{text}")
    return "\n".join(lines) + "\n"


def render_trajectory_csv(
    path: PathRealization, config: ExperimentConfig, problem: ControlProblem
) -> str:
    """Wide per-node dump: state, control and selection coefficients."""
    modes = problem.modes
    steps = path.noise.steps
    meta = {
        TRAJ_SCHEMA_KEY: str(SCHEMA_VERSION),
        "version": __version__,
        "config_hash": config.config_hash(),
        "seed": str(path.noise.seed),
        "path_index": str(path.noise.path_index),
        "modes": str(modes),
        "steps": str(steps),
        "a": _fmt(path.noise.horizon),
        "controlled": "true" if path.u_traj is not None else "false",
    }
    header = (
        ["k", "t"]
        + [f"q{n}" for n in range(1, modes + 1)]
        + [f"u{n}" for n in range(1, modes + 1)]
        + [f"f{n}" for n in range(1, modes + 1)]
        + [f"sig{n}" for n in range(1, modes + 1)]
    )
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(",".join(header))
    nan_row = ["nan"] * modes
    for k in range(steps + 1):
        cells = [str(k), _fmt(path.noise.t[k])]
        cells += [_fmt(v) for v in path.q_traj[k]]
        cells += [_fmt(v) for v in path.u_traj[k]] if path.u_traj is not None else ["0.0"] * modes
        if k < steps:
            cells += [_fmt(v) for v in path.f_traj[k]]
            cells += [_fmt(v) for v in path.sigma_traj[k]]
        else:
            cells += nan_row + nan_row
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as handle:
        handle.write(text)
    return out
