"""Truncated Q-Wiener sampling and stochastic convolution with the heat semigroup.

The noise basis is taken equal to the state eigenbasis, so the covariance
operator is the diagonal of mode variances mu_n and a diffusion operator is
a per-mode multiplier vector sigma_n with Hilbert-Schmidt norm
sum_n sigma_n^2 mu_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .basis import EigenBasis


@dataclass(frozen=True)
class QWienerSpec:
    """Mode variances mu_n >= 0 of a finite-trace covariance operator."""

    mode_variances: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mode_variances, dtype=float)
        object.__setattr__(self, "mode_variances", mu)
        if mu.ndim != 1 or not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValueError("mode variances must be a finite nonnegative 1-D array")

    @property
    def trace(self) -> float:
        return float(self.mode_variances.sum())

    @classmethod
    def power_profile(cls, modes: int, power: float = 2.0, scale: float = 1.0) -> "QWienerSpec":
        """mu_n = scale * n^{-power}; the default n^{-2} has trace < pi^2/6."""
        n = np.arange(1, modes + 1, dtype=float)
        return cls(scale * n**-power)


@dataclass(frozen=True)
class NoisePath:
    """One realization of the truncated increments dW_{k,n} ~ N(0, mu_n dt).

    The table regenerates bit-identically from (seed, path_index): each path
    owns a fresh generator keyed by that pair, so draws never depend on
    scheduling order across an ensemble.
    """

    increments: np.ndarray  # shape (steps, modes)
    horizon: float
    seed: int
    path_index: int

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @cached_property
    def t(self) -> np.ndarray:
        """Time nodes t_0 = 0 < ... < t_K = horizon."""
        return np.linspace(0.0, self.horizon, self.steps + 1)


def sample_noise_path(
    spec: QWienerSpec, steps: int, horizon: float, seed: int, path_index: int = 0
) -> NoisePath:
    """Draw the (steps x modes) increment table for one path."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(path_index,)))
    dt = horizon / steps
    std = np.sqrt(spec.mode_variances * dt)
    table = rng.standard_normal((steps, spec.mode_variances.size)) * std
    return NoisePath(increments=table, horizon=horizon, seed=seed, path_index=path_index)


def coarsen_noise(path: NoisePath) -> NoisePath:
    """Aggregate adjacent increments into a path on half the time resolution.

    Keeps the underlying Brownian path fixed across dt refinements, which is
    what makes common-random-number convergence studies meaningful.
    """
    if path.steps % 2 != 0:
        raise ValueError(f"cannot coarsen an odd number of steps ({path.steps})")
    pairs = path.increments.reshape(path.steps // 2, 2, -1).sum(axis=1)
    return NoisePath(
        increments=pairs, horizon=path.horizon, seed=path.seed, path_index=path.path_index
    )


def hs_norm_sq(sigma: np.ndarray, spec: QWienerSpec) -> float:
    """Squared Hilbert-Schmidt norm sum_n sigma_n^2 mu_n of a diffusion operator."""
    return float(np.sum(np.asarray(sigma) ** 2 * spec.mode_variances))


def stochastic_convolution(
    sigma_path: np.ndarray, noise: NoisePath, basis: EigenBasis
) -> np.ndarray:
    """Simulated int_0^t T(t-s) sigma(s) dW(s) on the time grid.

    Left-point exponential scheme per mode,
    V(t_{k+1}) = e^{lambda dt} (V(t_k) + sigma(t_k) dW_k), V(0) = 0,
    so increment k enters the node-K value with weight e^{lambda (a - t_k)}.

    Parameters
    ----------
    sigma_path : array, shape (steps, modes)
        Diffusion multiplier at the left endpoint of each step.
    """
    sigma_path = np.asarray(sigma_path, dtype=float)
    if sigma_path.shape != noise.increments.shape:
        raise ValueError(
            f"sigma_path shape {sigma_path.shape} does not match "
            f"noise table {noise.increments.shape}"
        )
    decay = np.exp(basis.eigenvalues * noise.dt)
    out = np.zeros((noise.steps + 1, noise.increments.shape[1]))
    for k in range(noise.steps):
        out[k + 1] = decay * (out[k] + sigma_path[k] * noise.increments[k])
    return out


@dataclass(frozen=True)
class IsometryReport:
    estimate: float
    exact: float
    std_error: float
    z_score: float


def ito_isometry_check(
    sigma: np.ndarray,
    spec: QWienerSpec,
    paths: int,
    steps: int,
    horizon: float,
    seed: int,
) -> IsometryReport:
    """Monte Carlo check of E||int_0^a sigma dW||^2 = a * sum_n sigma_n^2 mu_n.

    Uses the plain integral (no semigroup) with a constant diffusion
    operator, and reports the deviation normalized by the standard error of
    the ensemble mean.
    """
    if paths < 100:
        raise ValueError(f"need at least 100 paths for a meaningful check, got {paths}")
    sigma = np.asarray(sigma, dtype=float)
    samples = np.empty(paths)
    for i in range(paths):
        path = sample_noise_path(spec, steps, horizon, seed, path_index=i)
        total = sigma * path.increments.sum(axis=0)
        samples[i] = np.dot(total, total)
    estimate = float(samples.mean())
    exact = horizon * hs_norm_sq(sigma, spec)
    std_error = float(samples.std(ddof=1) / np.sqrt(paths))
    z_score = 0.0 if std_error == 0.0 else (estimate - exact) / std_error
    return IsometryReport(estimate=estimate, exact=exact, std_error=std_error, z_score=z_score)
