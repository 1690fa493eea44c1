"""Mild-solution time integrator for the controlled stochastic inclusion.

Marches the variation-of-constants form of
    q'(t) in A q + B u + dF(q) + Sigma(q) dW/dt,  q(0) = x0,
with explicit (left-point) evaluation of both multivalued selections: the
pointwise thermostat subgradient and the scalar interval diffusion shaped
onto the modes.  Residual checks certify the weak-solution identity per
test mode and the hemivariational inequality slack per direction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .basis import (
    EigenBasis,
    grid_mean,
    to_grid,
    to_grid_batch,
    to_spectral,
)
from .noise import NoisePath
from .nonsmooth import clarke_dirderiv, select_in_interval, selection_grid_values

SELECTION_POLICIES_DIFF = ("minimal_norm", "lower", "upper", "midpoint")


class TrajectoryBlowup(RuntimeError):
    """State left the a-priori admissible region (NaN or norm guard)."""

    def __init__(self, t: float, step: int, norm_sq: float):
        self.t = t
        self.step = step
        self.norm_sq = norm_sq
        super().__init__(
            f"trajectory blow-up at t={t:.6g} (step {step}): ||q||^2 = {norm_sq:.3e}"
        )


@dataclass(frozen=True)
class IntervalDiffusion:
    """Interval-valued diffusion envelope [glo, ghi] shaped onto the modes.

    The envelope is a scalar interval depending on time and on the spatial
    mean m of the state: both edges are shifted by mean_gain * tanh(m), so
    the interval ordering and the uniform bound
    |edge| <= max(|lo|, |hi|) + |mean_gain| hold for every input.  A policy
    picks the scalar selection s inside the interval; the acting diffusion
    operator is sigma_n = s * d_n.
    """

    lo: float
    hi: float
    mode_weights: np.ndarray
    mean_gain: float = 0.0
    policy: str = "midpoint"

    def __post_init__(self):
        d = np.asarray(self.mode_weights, dtype=float)
        object.__setattr__(self, "mode_weights", d)
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and np.isfinite(self.mean_gain)):
            raise ValueError("diffusion envelope parameters must be finite")
        if self.lo > self.hi:
            raise ValueError(f"envelope must satisfy lo <= hi, got {self.lo} > {self.hi}")
        if d.ndim != 1 or not np.all(np.isfinite(d)):
            raise ValueError("mode weights must be a finite 1-D array")
        if self.policy not in SELECTION_POLICIES_DIFF:
            raise ValueError(f"unknown diffusion policy {self.policy!r}")

    def envelope(self, t, m):
        """Interval edges (glo, ghi) at time t and state mean m; glo <= ghi."""
        shift = self.mean_gain * np.tanh(np.asarray(m, dtype=float))
        return self.lo + shift, self.hi + shift

    def select_scalar(self, t, m):
        glo, ghi = self.envelope(t, m)
        return select_in_interval(glo, ghi, self.policy)

    @property
    def alpha_bound(self) -> float:
        """Uniform bound on |glo|, |ghi| over all times and states."""
        return max(abs(self.lo), abs(self.hi)) + abs(self.mean_gain)

    def hs_bound(self, mode_variances: np.ndarray) -> float:
        """Time-constant bound zeta on the squared HS norm of any selection."""
        return self.alpha_bound**2 * float(
            np.sum(self.mode_weights**2 * np.asarray(mode_variances))
        )

    @property
    def inactive(self) -> bool:
        return self.lo == 0.0 and self.hi == 0.0 and self.mean_gain == 0.0


@dataclass(frozen=True)
class PathRealization:
    """One integrated path: noise, trajectory, the selections that drove it.

    ``f_traj`` and ``sigma_traj`` hold the left-point selections actually
    used by the integrator, so terminal-identity checks can replay the
    exact discrete algebra.  For paths produced by the fixed-point map the
    selections were extracted from the previous iterate; for

    :func:`integrate_path` they are extracted from the trajectory itself,
    which makes the gridwise membership f(t_k) in dPhi(q(t_k)) exact.
    """

    noise: NoisePath
    q_traj: np.ndarray  # (steps + 1, modes)
    f_traj: np.ndarray  # (steps, modes)
    sigma_traj: np.ndarray  # (steps, modes)
    u_traj: Optional[np.ndarray] = None  # (steps + 1, modes) control samples
    converged: Optional[bool] = None
    fp_iterations: Optional[int] = None
    fp_delta: Optional[float] = None

    @property
    def terminal(self) -> np.ndarray:
        return self.q_traj[-1]

    def with_fixed_point_info(self, converged: bool, iterations: int, delta: float):
        return replace(
            self, converged=converged, fp_iterations=iterations, fp_delta=delta
        )


def mild_step(
    q_k: np.ndarray,
    f_k: np.ndarray,
    u_k: np.ndarray,
    sigma_k: np.ndarray,
    dW_k: np.ndarray,
    dt: float,
    basis: EigenBasis,
) -> np.ndarray:
    """One step of the exponential left-point scheme.

    Per mode:
        q(t_{k+1}) = e^{lambda dt} q(t_k)
                     + phi * (f_k + u_k)
                     + e^{lambda dt} sigma_k dW_k,
    with phi the exact drift weight (1 - e^{lambda dt}) / (-lambda).  The
    control argument is the forcing B u as it enters the state equation.
    """
    decay = basis.semigroup_factors(dt)
    phi = basis.drift_weights(dt)
    return decay * q_k + phi * (f_k + u_k) + decay * (sigma_k * dW_k)


def integrate_path(problem, noise: NoisePath, u_traj: Optional[np.ndarray] = None) -> PathRealization:
    """March the inclusion over the grid with on-the-fly selections.

    Both selections are evaluated at the left endpoint of each step from
    the current state: the thermostat subgradient pointwise on the grid,
    the diffusion scalar from the spatial mean.  ``u_traj`` (pre-gain
    control samples at the nodes, or None for the uncontrolled run) enters
    through the left-point drift weight.
    """
    basis = problem.basis
    steps, modes = noise.steps, basis.modes
    dt = noise.dt
    t = noise.t
    decay = basis.semigroup_factors(dt)
    phi = basis.drift_weights(dt)

    control = None
    if u_traj is not None:
        u = np.asarray(u_traj, dtype=float)
        if u.shape not in ((steps, modes), (steps + 1, modes)):
            raise ValueError(f"control samples must cover the step nodes, got {u.shape}")
        control = problem.gain * u[:steps]

    guard = problem.blowup_threshold
    q = np.empty((steps + 1, modes))
    q[0] = problem.x0
    f_traj = np.empty((steps, modes))
    sigma_traj = np.empty((steps, modes))
    for k in range(steps):
        x_grid = to_grid(q[k], basis)
        f_grid = selection_grid_values(problem.pot, problem.policy, x_grid)
        f_k = to_spectral(f_grid, basis)
        s_k = problem.diffusion.select_scalar(t[k], grid_mean(x_grid, basis))
        sigma_k = s_k * problem.diffusion.mode_weights
        drive = f_k if control is None else f_k + control[k]
        q[k + 1] = decay * q[k] + phi * drive + decay * (sigma_k * noise.increments[k])
        f_traj[k] = f_k
        sigma_traj[k] = sigma_k
        with np.errstate(over="ignore"):  # overflow is exactly what the guard reports
            norm_sq = float(q[k + 1] @ q[k + 1])
        if not np.isfinite(norm_sq) or norm_sq > guard:
            raise TrajectoryBlowup(t[k + 1], k + 1, norm_sq)

    stored_u = None
    if u_traj is not None:
        u = np.asarray(u_traj, dtype=float)
        stored_u = u if u.shape[0] == steps + 1 else np.vstack([u, u[-1]])
    return PathRealization(
        noise=noise, q_traj=q, f_traj=f_traj, sigma_traj=sigma_traj, u_traj=stored_u
    )


def weak_residual(path: PathRealization, mode: int, problem) -> float:
    """Defect of the weak-solution identity tested against eigenfunction ``mode``.

    All time integrals use left-point quadrature of the stored discrete
    trajectory, so the residual contracts at first order in dt for a fixed
    Brownian path.
    """
    basis = problem.basis
    if not 1 <= mode <= basis.modes:
        raise ValueError(f"test mode must lie in 1..{basis.modes}, got {mode}")
    i = mode - 1
    dt = path.noise.dt
    steps = path.noise.steps
    q_m = path.q_traj[:, i]
    forcing = path.f_traj[:, i].copy()
    if path.u_traj is not None:
        gain = np.broadcast_to(problem.gain, (basis.modes,))
        forcing = forcing + gain[i] * path.u_traj[:steps, i]
    stochastic = float(np.sum(path.sigma_traj[:, i] * path.noise.increments[:, i]))
    residual = (
        q_m[-1]
        - q_m[0]
        + mode**2 * dt * float(np.sum(q_m[:steps]))
        - dt * float(np.sum(forcing))
        - stochastic
    )
    return abs(residual)


def hvi_residual(path: PathRealization, xi: np.ndarray, problem) -> float:
    """Minimum slack of the hemivariational inequality along the path.

    Returns min_k [ F0(q(t_k); xi) - <f(t_k), xi> ].  The directional
    derivative side uses grid quadrature; the pairing side is the spectral
    dot product, which equals the same grid quadrature exactly (discrete
    Parseval) because xi carries no content above the retained band.  A
    selection drawn from the subdifferential at the same grid values can
    therefore never produce slack below round-off.
    """
    basis = problem.basis
    steps = path.noise.steps
    xi = np.asarray(xi, dtype=float)
    xi_grid = to_grid(xi, basis)
    q_grid = to_grid_batch(path.q_traj[:steps], basis)
    f0 = basis.quad_weight * clarke_dirderiv(problem.pot, q_grid, xi_grid[None, :]).sum(axis=1)
    pairing = path.f_traj @ xi
    return float(np.min(f0 - pairing))
