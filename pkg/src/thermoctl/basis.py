"""Sine eigenbasis on [0, pi]: heat semigroup, transforms, Gramian, resolvent.

Everything in the toolkit lives in the orthonormal basis
w_n(theta) = sqrt(2/pi) sin(n theta), n = 1..N, in which the Dirichlet
Laplacian, the heat semigroup, the control Gramian and its regularized
resolvent are all per-mode multipliers.  States ("spectral vectors") are
plain 1-D float arrays of coefficients against w_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class EigenBasis:
    """Truncated sine eigenbasis with its collocation grid.

    Parameters
    ----------
    modes : int
        Number of retained modes N (eigenvalues -1, -4, ..., -N^2).
    horizon : float
        Final time a > 0 of the control interval [0, a].
    grid_size : int, optional
        Number of interior collocation nodes theta_j = j*pi/(P+1),
        j = 1..P.  Defaults to 4*modes, which keeps aliasing from the
        pointwise thermostat law negligible.  Must satisfy P >= N so the
        sine transform pair is exact on the retained band.
    """

    modes: int
    horizon: float
    grid_size: int = 0

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.grid_size == 0:
            object.__setattr__(self, "grid_size", 4 * self.modes)
        if self.grid_size < self.modes:
            raise ValueError(
                f"grid_size {self.grid_size} < modes {self.modes}: "
                "collocation grid cannot resolve the retained band"
            )

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        return np.arange(1, self.modes + 1)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Generator eigenvalues -n^2 (strictly decreasing, first is -1)."""
        return -self.mode_numbers.astype(float) ** 2

    @cached_property
    def theta(self) -> np.ndarray:
        """Interior collocation nodes j*pi/(P+1), j = 1..P."""
        p = self.grid_size
        return np.arange(1, p + 1) * (np.pi / (p + 1))

    @property
    def quad_weight(self) -> float:
        """Uniform quadrature weight h = pi/(P+1) on the interior nodes."""
        return np.pi / (self.grid_size + 1)

    @cached_property
    def synthesis_matrix(self) -> np.ndarray:
        """Basis evaluation w_n(theta_j), shape (P, N).

        The discrete pair (synthesis, h * synthesis^T) is exactly unitary on
        the retained band because the sines are orthogonal on this grid:
        sum_j sin(n theta_j) sin(m theta_j) = (P+1)/2 for n = m <= P.
        """
        return np.sqrt(2.0 / np.pi) * np.sin(np.outer(self.theta, self.mode_numbers))

    def semigroup_factors(self, t: float) -> np.ndarray:
        """Diagonal of T(t): e^{-n^2 t}.  Contraction for every t >= 0."""
        if t < 0:
            raise ValueError(f"semigroup time must be >= 0, got {t}")
        return np.exp(self.eigenvalues * t)

    def drift_weights(self, dt: float) -> np.ndarray:
        """Exact one-step integrator weight (1 - e^{lambda dt}) / (-lambda).

        Equals the step integral of the semigroup against a constant
        forcing.  A series branch guards |lambda*dt| < 1e-8, where the
        closed form loses all significant digits (limit value dt).
        """
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        lam_dt = self.eigenvalues * dt
        small = np.abs(lam_dt) < 1e-8
        safe = np.where(small, 1.0, self.eigenvalues)
        closed = (1.0 - np.exp(lam_dt)) / (-safe)
        series = dt * (1.0 + lam_dt / 2.0 + lam_dt**2 / 6.0)
        return np.where(small, series, closed)


@dataclass(frozen=True)
class GramianDiag:
    """Diagonal of the controllability Gramian in the sine basis."""

    gammas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        object.__setattr__(self, "gammas", g)
        if g.ndim != 1 or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("Gramian diagonal must be a finite nonnegative 1-D array")


def as_state(x, basis: EigenBasis) -> np.ndarray:
    """Validate and return a spectral coefficient vector for ``basis``."""
    v = np.asarray(x, dtype=float)
    if v.shape != (basis.modes,):
        raise ValueError(f"state must have shape ({basis.modes},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("state coefficients must be finite")
    return v


def state_norm(x: np.ndarray) -> float:
    """L2([0, pi]) norm of a state; Parseval makes it the coefficient norm."""
    return float(np.linalg.norm(x))


def apply_semigroup(t: float, x: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Evolve a state by the heat semigroup: coefficient n picks up e^{-n^2 t}."""
    return basis.semigroup_factors(t) * as_state(x, basis)


def to_grid(x: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Evaluate sum_n c_n w_n at the collocation nodes (inverse sine transform)."""
    return to_grid_batch(as_state(x, basis)[None, :], basis)[0]


def to_spectral(values: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Project grid values onto the retained band (forward sine transform).

    Exact inverse of :func:`to_grid` for any state of bandwidth <= P.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (basis.grid_size,):
        raise ValueError(
            f"grid values must have shape ({basis.grid_size},), got {v.shape}"
        )
    return to_spectral_batch(v[None, :], basis)[0]


def to_grid_batch(coeffs: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Vectorized :func:`to_grid` over the leading axis."""
    return np.asarray(coeffs) @ basis.synthesis_matrix.T


def to_spectral_batch(values: np.ndarray, basis: EigenBasis) -> np.ndarray:
    # h * synthesis^T is the exact L2 projection onto the retained band for
    # grid data of bandwidth <= P (discrete sine orthogonality).
    return (np.asarray(values) @ basis.synthesis_matrix) * basis.quad_weight


def grid_mean(values: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Spatial mean over [0, pi] by grid quadrature, batched over leading axes."""
    return np.asarray(values).sum(axis=-1) * (basis.quad_weight / np.pi)


def gramian_diagonal(a: float, basis: EigenBasis, gain=1.0) -> GramianDiag:
    """Diagonal gamma_n = b_n^2 (1 - e^{-2 n^2 a}) / (2 n^2) of the Gramian.

    This is the exact diagonalization of int_0^a T(a-s) B B* T*(a-s) ds for
    a diagonal control operator B with per-mode gains b_n: the semigroup is
    self-adjoint and diagonal, so the integrand is the scalar
    b_n^2 e^{-2 n^2 (a-s)} in each mode.
    """
    if not a > 0:
        raise ValueError(f"Gramian horizon must be > 0, got {a}")
    b = np.broadcast_to(np.asarray(gain, dtype=float), (basis.modes,))
    n2 = basis.mode_numbers.astype(float) ** 2
    return GramianDiag(b**2 * -np.expm1(-2.0 * n2 * a) / (2.0 * n2))


def resolvent_apply(eps: float, gram: GramianDiag, y: np.ndarray) -> np.ndarray:
    """Apply (eps I + G(a))^{-1}: coefficient n of y is divided by eps + gamma_n.

    For eps > 0 the scaled map eps (eps I + G)^{-1} is a contraction, exactly:
    every multiplier eps/(eps + gamma_n) lies in (0, 1].
    """
    if not eps > 0:
        raise ValueError(f"regularization eps must be > 0, got {eps}")
    y = np.asarray(y, dtype=float)
    return y / (eps + gram.gammas)
