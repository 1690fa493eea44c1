"""Flat key=value experiment configuration with typed parsing and hashing.

One experiment per file.  Every key has a documented default; unknown keys
are rejected so a typo cannot silently fall back to a default.  The
canonical serialization (sorted keys, round-trip float formatting) is what
gets hashed into run provenance.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .controller import ControlProblem
from .inclusion import SELECTION_POLICIES_DIFF, IntervalDiffusion
from .noise import QWienerSpec
from .nonsmooth import SELECTION_POLICIES, ThermostatPotential


class ConfigError(ValueError):
    """Malformed, unknown, or out-of-range configuration input."""


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_ints(text: str):
    return tuple(int(p) for p in text.split(",") if p.strip())


_PARSERS = {
    "int": int,
    "float": float,
    "bool": _parse_bool,
    "str": lambda s: s.strip(),
    "floats": _parse_floats,
    "ints": _parse_ints,
}

# key -> (type tag, default)
SCHEMA = {
    # problem geometry and discretization
    "a": ("float", 1.0),
    "modes": ("int", 16),
    "steps": ("int", 256),
    "grid_size": ("int", 0),  # 0 -> 4 * modes
    # regularization and endpoint data
    "eps": ("float", 0.1),
    "x0": ("str", "zero"),
    "z": ("str", "e1"),
    # thermostat law
    "pot_s1": ("float", -0.25),
    "pot_s2": ("float", 0.25),
    "pot_g1": ("float", -0.05),
    "pot_g2": ("float", 0.05),
    "policy": ("str", "minimal_norm"),
    # interval diffusion: envelope [lo, hi] shifted by gain*tanh(mean),
    # shaped onto modes by d_n = d_scale * n^{-d_power}
    "diff_lo": ("float", 0.05),
    "diff_hi": ("float", 0.15),
    "diff_gain": ("float", 0.05),
    "diff_policy": ("str", "midpoint"),
    "diff_d_power": ("float", 1.0),
    "diff_d_scale": ("float", 1.0),
    # noise covariance mu_n = mu_scale * n^{-mu_power}
    "mu_power": ("float", 2.0),
    "mu_scale": ("float", 1.0),
    # control operator gain (uniform across modes)
    "b_gain": ("float", 1.0),
    # ensemble and fixed point
    "paths": ("int", 100),
    "seed": ("int", 1234),
    "fp_tol": ("float", 1e-8),
    "fp_max_iter": ("int", 40),
    "ka": ("float", 1.0),
    # harness
    "eps_list": ("floats", (0.5, 0.1, 0.02)),
    "report_modes": ("ints", (1, 2, 3)),
    "confidence_level": ("float", 0.95),
    "output_dir": ("str", "out"),
    "output_format": ("str", "csv"),
    "workers": ("int", 1),
    "dump_paths": ("int", 0),
    "timing": ("bool", False),
}

_VECTOR_RE = re.compile(r"^e(\d+)$")

# Presentation/IO keys: they change where and how results are written, not
# what is computed, so they stay out of the provenance hash.
HASH_EXCLUDED = frozenset({"output_dir", "output_format", "workers", "timing", "dump_paths"})


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of one experiment file (all keys resolved to values)."""

    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError as exc:
            raise AttributeError(key) from exc

    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        return cls(values={k: default for k, (_, default) in SCHEMA.items()})

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {k: default for k, (_, default) in SCHEMA.items()}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            tag, _ = SCHEMA[key]
            try:
                values[key] = _PARSERS[tag](value.strip())
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        cfg = cls(values=values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        values = dict(self.values)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            values[key] = value
        cfg = ExperimentConfig(values=values)
        cfg.validate()
        return cfg

    def validate(self):
        v = self.values
        if v["policy"] not in SELECTION_POLICIES:
            raise ConfigError(f"policy must be one of {SELECTION_POLICIES}, got {v['policy']!r}")
        if v["diff_policy"] not in SELECTION_POLICIES_DIFF:
            raise ConfigError(f"diff_policy must be one of {SELECTION_POLICIES_DIFF}")
        if v["output_format"] not in ("csv", "json"):
            raise ConfigError(f"output_format must be csv or json, got {v['output_format']!r}")
        if not 0.0 < v["confidence_level"] < 1.0:
            raise ConfigError("confidence_level must lie in (0, 1)")
        if v["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        if v["dump_paths"] < 0:
            raise ConfigError("dump_paths must be >= 0")
        if v["paths"] < 1:
            raise ConfigError("paths must be >= 1")
        if v["seed"] < 0:
            raise ConfigError("seed must be >= 0")
        for m in v["report_modes"]:
            if not 1 <= m <= v["modes"]:
                raise ConfigError(f"report mode {m} outside 1..{v['modes']}")
        self._vector("x0")
        self._vector("z")

    def _vector(self, key: str) -> np.ndarray:
        """Resolve a state spec: 'zero', 'e<k>', or comma-separated coefficients."""
        spec = self.values[key].strip()
        modes = self.values["modes"]
        if spec == "zero":
            return np.zeros(modes)
        match = _VECTOR_RE.match(spec)
        if match:
            k = int(match.group(1))
            if not 1 <= k <= modes:
                raise ConfigError(f"{key}: unit mode {k} outside 1..{modes}")
            out = np.zeros(modes)
            out[k - 1] = 1.0
            return out
        try:
            coeffs = [float(p) for p in spec.split(",") if p.strip()]
        except ValueError as exc:
            raise ConfigError(f"{key}: expected 'zero', 'e<k>' or comma floats: {exc}") from exc
        if len(coeffs) > modes:
            raise ConfigError(f"{key}: {len(coeffs)} coefficients exceed modes={modes}")
        out = np.zeros(modes)
        out[: len(coeffs)] = coeffs
        return out

    def to_problem(self, eps: float | None = None) -> ControlProblem:
        v = self.values
        modes = v["modes"]
        n = np.arange(1, modes + 1, dtype=float)
        return ControlProblem(
            horizon=v["a"],
            modes=modes,
            steps=v["steps"],
            eps=v["eps"] if eps is None else eps,
            x0=self._vector("x0"),
            z=self._vector("z"),
            pot=ThermostatPotential(v["pot_s1"], v["pot_s2"], v["pot_g1"], v["pot_g2"]),
            diffusion=IntervalDiffusion(
                lo=v["diff_lo"],
                hi=v["diff_hi"],
                mean_gain=v["diff_gain"],
                mode_weights=v["diff_d_scale"] * n ** -v["diff_d_power"],
                policy=v["diff_policy"],
            ),
            wiener=QWienerSpec.power_profile(modes, v["mu_power"], v["mu_scale"]),
            policy=v["policy"],
            paths=v["paths"],
            seed=v["seed"],
            gain=v["b_gain"],
            fp_tol=v["fp_tol"],
            fp_max_iter=v["fp_max_iter"],
            grid_size=v["grid_size"],
            ka=v["ka"],
        )

    def canonical_text(self, semantic_only: bool = False) -> str:
        lines = []
        for key in sorted(SCHEMA):
            if semantic_only and key in HASH_EXCLUDED:
                continue
            value = self.values[key]
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            elif isinstance(value, tuple):
                text = ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text(semantic_only=True).encode()).hexdigest()[:16]

    def is_linear_reference(self) -> bool:
        """True for the closed-form reference setup: no selections, x0 = 0, z = e1."""
        v = self.values
        return (
            v["pot_g1"] == 0.0
            and v["pot_g2"] == 0.0
            and v["diff_lo"] == 0.0
            and v["diff_hi"] == 0.0
            and v["diff_gain"] == 0.0
            and not self._vector("x0").any()
            and np.array_equal(self._vector("z"), np.eye(1, v["modes"], 0)[0])
        )
