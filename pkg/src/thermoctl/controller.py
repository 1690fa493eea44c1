"""Regularized Gramian control synthesis and the per-path fixed-point iteration.

Given a candidate trajectory, the controlled update map extracts the two
selections along it, forms the terminal defect Z (target minus the free
evolution driven by those selections), synthesizes the control
u(t) = B* T*(a-t) (eps I + G(a))^{-1} Z, and re-integrates the inclusion
with the same frozen noise.  Fixed points of that map are the controlled
solutions; sweeping eps down exhibits the approximate-controllability
trend of the expected squared terminal miss.

Discrete algebra.  The re-integration applies the synthesized control
through its exact per-step convolution integrals (the control is a known
exponential in time), so the discrete control-to-terminal map equals the
Gramian diagonal exactly and the terminal identity
    q(a) = z - eps (eps I + G(a))^{-1} Z
holds per path to round-off, for any step count.  The terminal defect is
assembled with the same discrete convolution weights the integrator uses,
which is what makes the identity exact rather than O(dt).
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import norm as _normal

from .basis import (
    EigenBasis,
    GramianDiag,
    gramian_diagonal,
    grid_mean,
    resolvent_apply,
    to_grid_batch,
    to_spectral_batch,
)
from .inclusion import IntervalDiffusion, PathRealization, integrate_path
from .noise import NoisePath, QWienerSpec, sample_noise_path
from .nonsmooth import SELECTION_POLICIES, ThermostatPotential, selection_grid_values

_CHUNK = 25  # paths per work unit; fixed so reductions never depend on worker count


@dataclass(frozen=True)
class ControlProblem:
    """Full experiment description for one controlled ensemble."""

    horizon: float
    modes: int
    steps: int
    eps: float
    x0: np.ndarray
    z: np.ndarray
    pot: ThermostatPotential
    diffusion: IntervalDiffusion
    wiener: QWienerSpec
    policy: str = "minimal_norm"
    paths: int = 100
    seed: int = 0
    gain: Union[float, np.ndarray] = 1.0
    fp_tol: float = 1e-8
    fp_max_iter: int = 40
    grid_size: int = 0
    ka: float = 1.0  # stochastic-convolution constant in the a-priori bound

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.steps < 1 or self.modes < 1:
            raise ValueError("steps and modes must be >= 1")
        if not self.fp_tol > 0:
            raise ValueError(f"fp_tol must be > 0, got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")
        if self.paths < 1:
            raise ValueError(f"paths must be >= 1, got {self.paths}")
        if self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.policy not in SELECTION_POLICIES:
            raise ValueError(f"unknown selection policy {self.policy!r}")
        for name in ("x0", "z"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.modes,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite vector of {self.modes} coefficients")
            object.__setattr__(self, name, v)
        g = np.broadcast_to(np.asarray(self.gain, dtype=float), (self.modes,)).copy()
        if not np.all(np.isfinite(g)):
            raise ValueError("control gain must be finite")
        object.__setattr__(self, "gain", g)
        if self.wiener.mode_variances.shape != (self.modes,):
            raise ValueError("wiener spec must provide one variance per mode")
        if self.diffusion.mode_weights.shape != (self.modes,):
            raise ValueError("diffusion must provide one mode weight per mode")

    @cached_property
    def basis(self) -> EigenBasis:
        return EigenBasis(self.modes, self.horizon, self.grid_size)

    @cached_property
    def gram(self) -> GramianDiag:
        return gramian_diagonal(self.horizon, self.basis, self.gain)

    @cached_property
    def blowup_threshold(self) -> float:
        """Guard on ||q||^2: a mis-configured run fails fast instead of overflowing."""
        return 1e6 * max(apriori_bound(self).value, 1.0)

    def noise_for(self, path_index: int) -> NoisePath:
        return sample_noise_path(self.wiener, self.steps, self.horizon, self.seed, path_index)


@dataclass(frozen=True)
class AprioriBound:
    """Moment bound sup_t E||q(t)||^2 <= value from the contraction estimates.

    With unit semigroup bound the constants are
        k1 = 16 a^2 ||B||^4 / eps^2,
        k2 = 4 + k1,            k3 = 4a + a k1,      k4 = (k1 + 1) Ka,
    and the bound is k1 E||z||^2 + k2 E||x0||^2 + k3 int eta + k4 int zeta,
    with eta, zeta the uniform squared bounds on the two selections.
    """

    k1: float
    k2: float
    k3: float
    k4: float
    int_eta: float
    int_zeta: float
    z_norm_sq: float
    x0_norm_sq: float

    @property
    def value(self) -> float:
        return (
            self.k1 * self.z_norm_sq
            + self.k2 * self.x0_norm_sq
            + self.k3 * self.int_eta
            + self.k4 * self.int_zeta
        )


def apriori_bound(problem: ControlProblem) -> AprioriBound:
    a = problem.horizon
    b_norm = float(np.max(np.abs(problem.gain)))
    core = 16.0 * a**2 * b_norm**4 / problem.eps**2
    return AprioriBound(
        k1=core,
        k2=4.0 + core,
        k3=4.0 * a + a * core,
        k4=core * problem.ka + problem.ka,
        int_eta=a * np.pi * problem.pot.lipschitz**2,
        int_zeta=a * problem.diffusion.hs_bound(problem.wiener.mode_variances),
        z_norm_sq=_norm_sq(problem.z),
        x0_norm_sq=_norm_sq(problem.x0),
    )


def _norm_sq(x: np.ndarray) -> float:
    with np.errstate(over="ignore"):  # extreme inputs surface as inf bounds
        return float(x @ x)


def _convolution_weights(basis: EigenBasis, noise: NoisePath):
    """Discrete convolution weights matching the integrator's step algebra.

    Drift forcing at node k reaches the terminal state with weight
    e^{lambda (a - t_{k+1})} phi; the noise increment at node k with weight
    e^{lambda (a - t_k)}.  Using exactly these weights in the terminal
    defect is what closes the per-path terminal identity.
    """
    lam = basis.eigenvalues
    t = noise.t
    a = noise.horizon
    drift_w = np.exp(lam[None, :] * (a - t[1:, None])) * basis.drift_weights(noise.dt)[None, :]
    noise_w = np.exp(lam[None, :] * (a - t[:-1, None]))
    return drift_w, noise_w


def compute_Z(path: PathRealization, z: np.ndarray, x0: np.ndarray, basis: EigenBasis) -> np.ndarray:
    """Terminal defect Z = z - T(a)x0 - conv(f) - conv(sigma dW) for one path.

    The two convolutions are the discrete ones accumulated by the
    integrator from the selections stored on the path.
    """
    return _terminal_defect(path.f_traj, path.sigma_traj, z, x0, basis, path.noise)


def _terminal_defect(f_traj, sigma_traj, z, x0, basis, noise) -> np.ndarray:
    drift_w, noise_w = _convolution_weights(basis, noise)
    free = np.exp(basis.eigenvalues * noise.horizon) * x0
    drift = (drift_w * f_traj).sum(axis=0)
    stoch = (noise_w * sigma_traj * noise.increments).sum(axis=0)
    return z - free - drift - stoch


def synthesize_control(
    Z: np.ndarray,
    eps: float,
    gram: GramianDiag,
    basis: EigenBasis,
    t: np.ndarray,
    gain=1.0,
) -> np.ndarray:
    """Sample u(t_k) = b_n e^{-n^2 (a - t_k)} Z_n / (eps + gamma_n) at the nodes."""
    r = resolvent_apply(eps, gram, Z)
    g = np.broadcast_to(np.asarray(gain, dtype=float), (basis.modes,))
    shape = np.exp(basis.eigenvalues[None, :] * (basis.horizon - np.asarray(t)[:, None]))
    return g[None, :] * shape * r[None, :]


def control_energy(Z: np.ndarray, eps: float, gram: GramianDiag) -> float:
    """Exact control energy int_0^a ||u||^2 dt = sum_n gamma_n Z_n^2/(eps+gamma_n)^2."""
    r = resolvent_apply(eps, gram, Z)
    return float(np.sum(gram.gammas * r**2))


def _extract_selections(problem: ControlProblem, q_traj: np.ndarray, t: np.ndarray):
    """Left-point selections (f, sigma) along a frozen trajectory, batched."""
    steps = len(t) - 1
    x_grid = to_grid_batch(q_traj[:steps], problem.basis)
    f = to_spectral_batch(
        selection_grid_values(problem.pot, problem.policy, x_grid), problem.basis
    )
    s = problem.diffusion.select_scalar(t[:steps], grid_mean(x_grid, problem.basis))
    sigma = np.asarray(s, dtype=float)[:, None] * problem.diffusion.mode_weights[None, :]
    return f, sigma


def gamma_eps_apply(
    problem: ControlProblem, q_iterate: np.ndarray, noise: NoisePath
) -> PathRealization:
    """One application of the controlled update map at frozen noise.

    Extracts the selections along ``q_iterate``, builds the terminal defect
    and the regularized control from them, and re-integrates the inclusion
    with those frozen selections, the synthesized control, and the same
    increments.  Applying it twice to the same iterate and noise reproduces
    the same output bit for bit.
    """
    if isinstance(q_iterate, PathRealization):
        q_iterate = q_iterate.q_traj
    q_iterate = np.asarray(q_iterate, dtype=float)
    basis = problem.basis
    t = noise.t
    if q_iterate.shape != (noise.steps + 1, basis.modes):
        raise ValueError(
            f"iterate must have shape {(noise.steps + 1, basis.modes)}, got {q_iterate.shape}"
        )
    f, sigma = _extract_selections(problem, q_iterate, t)
    Z = _terminal_defect(f, sigma, problem.z, problem.x0, basis, noise)
    r = resolvent_apply(problem.eps, problem.gram, Z)
    u = synthesize_control(Z, problem.eps, problem.gram, basis, t, problem.gain)

    # Exact per-step convolution of B u: for the exponential control the
    # step integral is b^2 R (e^{lam (a - t_{k+1})} - e^{lam (a - t_k + dt)})
    # / (-2 lam), and its accumulation to t = a telescopes to gamma R.
    lam = basis.eigenvalues
    decay = np.exp(lam * noise.dt)
    phi = basis.drift_weights(noise.dt)
    decay_next = np.exp(lam[None, :] * (noise.horizon - t[1:, None]))
    decay_left = np.exp(lam[None, :] * (noise.horizon - t[:-1, None]))
    ctrl = (problem.gain**2 * r)[None, :] * (decay_next - decay_left * decay[None, :]) / (
        -2.0 * lam[None, :]
    )

    guard = problem.blowup_threshold
    rhs = phi[None, :] * f + ctrl + decay[None, :] * (sigma * noise.increments)
    q = np.empty_like(q_iterate)
    q[0] = problem.x0
    for k in range(noise.steps):
        q[k + 1] = decay * q[k] + rhs[k]
    with np.errstate(over="ignore"):  # overflow is exactly what the guard reports
        norm_sq = (q * q).sum(axis=1)
    bad = ~np.isfinite(norm_sq) | (norm_sq > guard)
    if bad.any():
        k = int(np.argmax(bad))
        from .inclusion import TrajectoryBlowup

        raise TrajectoryBlowup(t[k], k, float(norm_sq[k]))
    return PathRealization(noise=noise, q_traj=q, f_traj=f, sigma_traj=sigma, u_traj=u)


def fixed_point_solve(problem: ControlProblem, noise: NoisePath) -> PathRealization:
    """Iterate the controlled update map from the uncontrolled trajectory.

    Stops when the discrete sup-in-time state distance between consecutive
    iterates drops below ``fp_tol``.  ``fp_iterations`` counts applications
    of the map; in the state-independent (linear) case the second
    application changes nothing, so convergence is detected there.
    Non-convergence within ``fp_max_iter`` is reported on the returned
    path, not raised: the iteration is a heuristic for a fixed point whose
    existence, not uniqueness, is guaranteed.
    """
    prev = integrate_path(problem, noise).q_traj
    path = None
    delta = np.inf
    for iteration in range(1, problem.fp_max_iter + 1):
        path = gamma_eps_apply(problem, prev, noise)
        delta = float(np.sqrt(((path.q_traj - prev) ** 2).sum(axis=1)).max())
        if delta < problem.fp_tol:
            return path.with_fixed_point_info(True, iteration, delta)
        prev = path.q_traj
    return path.with_fixed_point_info(False, problem.fp_max_iter, delta)


def terminal_identity_residual(
    path: PathRealization,
    eps: float,
    gram: GramianDiag,
    z: np.ndarray,
    x0: np.ndarray,
    basis: EigenBasis,
) -> float:
    """Defect of q(a) = z - eps (eps I + G(a))^{-1} Z(g) in the discrete algebra.

    Z is rebuilt from the selections stored on the path, i.e. the ones that
    actually produced the trajectory.
    """
    Z = compute_Z(path, z, x0, basis)
    miss = path.terminal - z + eps * resolvent_apply(eps, gram, Z)
    return float(np.linalg.norm(miss))


# ---------------------------------------------------------------------------
# Ensembles and the eps sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleResult:
    """Per-path outcomes of one controlled ensemble at fixed eps."""

    eps: float
    terminal_errors: np.ndarray  # ||q(a) - z||^2 per path
    energies: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    identity_residuals: np.ndarray
    moment_curve: np.ndarray  # mean over paths of ||q(t_k)||^2
    weak_max: Optional[np.ndarray] = None
    hvi_min: Optional[np.ndarray] = None

    @property
    def error_mean(self) -> float:
        return float(self.terminal_errors.mean())

    def error_ci(self, confidence: float = 0.95) -> float:
        """Normal-approximation half width for the mean terminal error."""
        m = self.terminal_errors.size
        if m < 2:
            return 0.0
        quantile = float(_normal.ppf(0.5 * (1.0 + confidence)))
        return quantile * float(self.terminal_errors.std(ddof=1)) / np.sqrt(m)

    @property
    def energy_mean(self) -> float:
        return float(self.energies.mean())

    @property
    def fp_rate(self) -> float:
        return float(self.converged.mean())

    @property
    def sup_moment(self) -> float:
        return float(self.moment_curve.max())


def _chunk_summaries(problem: ControlProblem, start: int, stop: int, report_modes):
    from .inclusion import hvi_residual, weak_residual

    count = stop - start
    out = {
        "terminal_errors": np.empty(count),
        "energies": np.empty(count),
        "converged": np.empty(count, dtype=bool),
        "iterations": np.empty(count, dtype=int),
        "identity_residuals": np.empty(count),
        "norm_sum": np.zeros(problem.steps + 1),
    }
    if report_modes:
        out["weak_max"] = np.empty(count)
        out["hvi_min"] = np.empty(count)
    basis = problem.basis
    for j, idx in enumerate(range(start, stop)):
        path = fixed_point_solve(problem, problem.noise_for(idx))
        Z = compute_Z(path, problem.z, problem.x0, basis)
        r = resolvent_apply(problem.eps, problem.gram, Z)
        miss = path.terminal - problem.z
        out["terminal_errors"][j] = float(miss @ miss)
        out["energies"][j] = float(np.sum(problem.gram.gammas * r**2))
        out["converged"][j] = bool(path.converged)
        out["iterations"][j] = int(path.fp_iterations)
        out["identity_residuals"][j] = float(np.linalg.norm(miss + problem.eps * r))
        out["norm_sum"] += (path.q_traj**2).sum(axis=1)
        if report_modes:
            out["weak_max"][j] = max(weak_residual(path, m, problem) for m in report_modes)
            unit = np.zeros(problem.modes)
            slacks = []
            for m in report_modes:
                unit[:] = 0.0
                unit[m - 1] = 1.0
                slacks.append(hvi_residual(path, unit, problem))
            out["hvi_min"][j] = min(slacks)
    return out


def run_ensemble(
    problem: ControlProblem, workers: int = 1, report_modes: Optional[Sequence[int]] = None
) -> EnsembleResult:
    """Solve the fixed point on every seeded path and collect diagnostics.

    Paths are grouped into fixed-size chunks and reduced in chunk order, so
    the result is bit-identical for any worker count.
    """
    report_modes = list(report_modes) if report_modes else None
    bounds = [
        (s, min(s + _CHUNK, problem.paths)) for s in range(0, problem.paths, _CHUNK)
    ]
    if workers <= 1 or len(bounds) == 1:
        parts = [_chunk_summaries(problem, s, e, report_modes) for s, e in bounds]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            futures = [
                pool.submit(_chunk_summaries, problem, s, e, report_modes) for s, e in bounds
            ]
            parts = [f.result() for f in futures]

    def cat(key):
        return np.concatenate([p[key] for p in parts])

    norm_sum = np.zeros(problem.steps + 1)
    for p in parts:
        norm_sum += p["norm_sum"]
    return EnsembleResult(
        eps=problem.eps,
        terminal_errors=cat("terminal_errors"),
        energies=cat("energies"),
        converged=cat("converged"),
        iterations=cat("iterations"),
        identity_residuals=cat("identity_residuals"),
        moment_curve=norm_sum / problem.paths,
        weak_max=cat("weak_max") if report_modes else None,
        hvi_min=cat("hvi_min") if report_modes else None,
    )


@dataclass(frozen=True)
class SweepRow:
    eps: float
    error_mean: float = np.nan
    error_ci: float = np.nan
    energy_mean: float = np.nan
    fp_rate: float = np.nan
    wallclock_s: float = 0.0
    failed: bool = False
    message: str = ""


@dataclass(frozen=True)
class SweepResult:
    """Rows of the eps sweep, ordered by eps descending (as swept)."""

    rows: tuple

    @property
    def any_failed(self) -> bool:
        return any(r.failed for r in self.rows)


def epsilon_sweep(
    problem: ControlProblem,
    eps_list: Sequence[float],
    workers: int = 1,
    confidence: float = 0.95,
    timing: bool = False,
) -> SweepResult:
    """Run the full ensemble for each eps with shared noise across values.

    The noise tables depend only on (seed, path_index), so every eps row
    sees identical increments: common random numbers make the terminal
    error trend directly comparable down the list.  Per-eps failures are
    recorded on their row and the sweep continues.  Wallclock is reported
    only when ``timing`` is set; the default keeps outputs reproducible.
    """
    eps_arr = [float(e) for e in eps_list]
    if not eps_arr:
        raise ValueError("eps_list must be nonempty")
    if any(e <= 0 for e in eps_arr):
        raise ValueError(f"eps values must be positive, got {eps_arr}")
    if any(nxt >= cur for cur, nxt in zip(eps_arr, eps_arr[1:])):
        raise ValueError(f"eps_list must be strictly decreasing, got {eps_arr}")
    rows = []
    for eps in eps_arr:
        started = time.perf_counter()
        try:
            ensemble = run_ensemble(replace(problem, eps=eps), workers=workers)
        except Exception as exc:  # noqa: BLE001 - per-eps failures are data
            rows.append(SweepRow(eps=eps, failed=True, message=f"{type(exc).__name__}: {exc}"))
            continue
        elapsed = time.perf_counter() - started if timing else 0.0
        rows.append(
            SweepRow(
                eps=eps,
                error_mean=ensemble.error_mean,
                error_ci=ensemble.error_ci(confidence),
                energy_mean=ensemble.energy_mean,
                fp_rate=ensemble.fp_rate,
                wallclock_s=elapsed,
            )
        )
    return SweepResult(rows=tuple(rows))
