"""Readers for the documented thermoctl CSV schemas.

Files open with a ``# key=value`` provenance block whose first line pins the
schema version; anything else is refused.  Every number plotted downstream
originates in these files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

SWEEP_SCHEMA = ("thermoctl_sweep_schema", "1")
TRAJ_SCHEMA = ("thermoctl_traj_schema", "1")


class SchemaError(ValueError):
    """Input file is missing, empty, or carries the wrong schema version."""


def _read_header(path: Path):
    lines = path.read_text().splitlines()
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        key, _, value = line.lstrip("# ").partition("=")
        meta[key.strip()] = value.strip()
    else:
        body_start = len(lines)
    return meta, lines[body_start:]


def _require_schema(meta: dict, expected: tuple, path: Path):
    key, version = expected
    found = meta.get(key)
    if found is None:
        raise SchemaError(f"{path}: missing schema marker {key!r}")
    if found != version:
        raise SchemaError(f"{path}: schema version {found!r}, expected {version!r}")


@dataclass(frozen=True)
class SweepTable:
    meta: dict
    eps: np.ndarray
    error_mean: np.ndarray
    error_ci: np.ndarray
    energy_mean: np.ndarray
    fp_rate: np.ndarray

    @property
    def reference_gamma1(self):
        """gamma_1 for the closed-form reference curve, when the sweep carries it."""
        if self.meta.get("reference_curve") == "resolvent_mode1":
            return float(self.meta["gamma1"])
        return None


def read_sweep(path) -> SweepTable:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    meta, body = _read_header(path)
    _require_schema(meta, SWEEP_SCHEMA, path)
    if not body:
        raise SchemaError(f"{path}: no column header")
    columns = body[0].split(",")
    required = {"eps", "error_mean", "error_ci", "energy_mean", "fp_rate", "wallclock_s"}
    missing = required - set(columns)
    if missing:
        raise SchemaError(f"{path}: missing columns {sorted(missing)}")
    rows = [line.split(",") for line in body[1:] if line.strip() and not line.startswith("#")]
    idx = {name: columns.index(name) for name in columns}
    # failed eps rows are written as nan and annotated in the header block
    kept = [r for r in rows if np.isfinite(float(r[idx["error_mean"]]))]
    if not kept:
        raise SchemaError(f"{path}: no usable rows")

    def col(name):
        return np.array([float(r[idx[name]]) for r in kept])

    return SweepTable(
        meta=meta,
        eps=col("eps"),
        error_mean=col("error_mean"),
        error_ci=col("error_ci"),
        energy_mean=col("energy_mean"),
        fp_rate=col("fp_rate"),
    )


@dataclass(frozen=True)
class TrajectoryTable:
    meta: dict
    t: np.ndarray
    coeffs: np.ndarray  # (nodes, modes) state coefficients

    @property
    def label(self) -> str:
        return "controlled" if self.meta.get("controlled") == "true" else "uncontrolled"


def read_trajectory(path) -> TrajectoryTable:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    meta, body = _read_header(path)
    _require_schema(meta, TRAJ_SCHEMA, path)
    if not body:
        raise SchemaError(f"{path}: no column header")
    columns = body[0].split(",")
    modes = int(meta["modes"])
    q_cols = [columns.index(f"q{n}") for n in range(1, modes + 1)]
    t_col = columns.index("t")
    rows = [line.split(",") for line in body[1:] if line.strip() and not line.startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    t = np.array([float(r[t_col]) for r in rows])
    coeffs = np.array([[float(r[c]) for c in q_cols] for r in rows])
    return TrajectoryTable(meta=meta, t=t, coeffs=coeffs)
