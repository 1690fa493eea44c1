"""Thermostat potential, its Clarke calculus, and pointwise selection policies.

The scalar potential is piecewise linear with a dead band [s1, s2]:
slope g1 <= 0 below the band, 0 inside, g2 >= 0 above.  Its Clarke
subdifferential is the interval-valued thermostat law {g1} / [g1, 0] /
{0} / [0, g2] / {g2}; the induced integral functional on L2([0, pi])
acts through the pointwise law at the collocation nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .basis import EigenBasis, to_grid, to_spectral

SELECTION_POLICIES = ("minimal_norm", "lower", "upper", "midpoint")


class Interval(NamedTuple):
    """Closed interval value of the subdifferential at one point."""

    lo: float
    hi: float


@dataclass(frozen=True)
class ThermostatPotential:
    """Dead-band potential: g1*(u - s1) below s1, zero on [s1, s2], g2*(u - s2) above.

    The sign constraints g1 <= 0 <= g2 make the subdifferential values at
    the kinks the intervals [g1, 0] and [0, g2]; the potential is globally
    Lipschitz with constant max(|g1|, g2).
    """

    s1: float
    s2: float
    g1: float
    g2: float

    def __post_init__(self):
        vals = (self.s1, self.s2, self.g1, self.g2)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"potential parameters must be finite, got {vals}")
        if self.s1 > self.s2:
            raise ValueError(f"thresholds must satisfy s1 <= s2, got {self.s1} > {self.s2}")
        if self.g1 > 0 or self.g2 < 0:
            raise ValueError(f"powers must satisfy g1 <= 0 <= g2, got g1={self.g1}, g2={self.g2}")

    @property
    def lipschitz(self) -> float:
        return max(abs(self.g1), self.g2)

    @property
    def inactive(self) -> bool:
        """True when both powers vanish, i.e. the law contributes nothing."""
        return self.g1 == 0.0 and self.g2 == 0.0


def phi_value(pot: ThermostatPotential, u):
    """Potential value; continuous across both thresholds."""
    u = np.asarray(u, dtype=float)
    out = np.where(
        u < pot.s1,
        pot.g1 * (u - pot.s1),
        np.where(u > pot.s2, pot.g2 * (u - pot.s2), 0.0),
    )
    return out if out.ndim else float(out)


def clarke_bounds(pot: ThermostatPotential, u):
    """Endpoints (lo, hi) of the subdifferential interval, vectorized.

    Strict branches give singleton slopes; the thresholds themselves get
    the full intervals [g1, 0] and [0, g2].  The degenerate case s1 == s2
    falls out of the same expressions as the hull [g1, g2] at the kink.
    """
    u = np.asarray(u, dtype=float)
    lo = np.where(u <= pot.s1, pot.g1, np.where(u <= pot.s2, 0.0, pot.g2))
    hi = np.where(u < pot.s1, pot.g1, np.where(u < pot.s2, 0.0, pot.g2))
    return lo, hi


def clarke_interval(pot: ThermostatPotential, u: float) -> Interval:
    """Subdifferential of the potential at a single point."""
    lo, hi = clarke_bounds(pot, u)
    return Interval(float(lo), float(hi))


def clarke_dirderiv(pot: ThermostatPotential, u, v):
    """Generalized directional derivative: support function of the interval.

    Equals max{zeta * v : zeta in the subdifferential at u}, i.e. hi*v for
    v >= 0 and lo*v for v < 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = clarke_bounds(pot, u)
    out = np.where(v >= 0, hi * v, lo * v)
    return out if out.ndim else float(out)


def select_in_interval(lo, hi, policy: str):
    """Pick one element of [lo, hi] per the named policy, vectorized."""
    if policy == "minimal_norm":
        return np.clip(0.0, lo, hi)
    if policy == "lower":
        return np.asarray(lo, dtype=float)
    if policy == "upper":
        return np.asarray(hi, dtype=float)
    if policy == "midpoint":
        return 0.5 * (np.asarray(lo) + np.asarray(hi))
    raise ValueError(f"unknown selection policy {policy!r}; expected one of {SELECTION_POLICIES}")


def functional_F_dirderiv(
    pot: ThermostatPotential, x: np.ndarray, v: np.ndarray, basis: EigenBasis
) -> float:
    """Directional derivative of the integral functional, by grid quadrature.

    Integrates the pointwise directional derivative of the potential along
    the direction v over [0, pi].  It dominates <f, v> for every pointwise
    selection f produced by :func:`pointwise_selection` on the same grid.
    """
    xg = to_grid(x, basis)
    vg = to_grid(v, basis)
    return float(basis.quad_weight * np.sum(clarke_dirderiv(pot, xg, vg)))


def pointwise_selection(
    pot: ThermostatPotential, policy: str, x: np.ndarray, basis: EigenBasis
) -> np.ndarray:
    """Measurable selection of the integral subdifferential at state x.

    Evaluates x at the collocation nodes, picks one subgradient per node,
    and projects back onto the retained band.  The result is bounded in
    L2 by sqrt(pi) * max(|g1|, g2) regardless of x or policy.
    """
    grid = selection_grid_values(pot, policy, to_grid(x, basis))
    return to_spectral(grid, basis)


def selection_grid_values(pot: ThermostatPotential, policy: str, x_grid: np.ndarray) -> np.ndarray:
    lo, hi = clarke_bounds(pot, x_grid)
    return select_in_interval(lo, hi, policy)
