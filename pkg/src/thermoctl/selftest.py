"""Built-in oracle suites behind the ``selftest`` command.

Each suite checks one pillar of the toolkit against an independent route
(quadrature, support-function enumeration, Monte Carlo statistics,
refinement ratios, closed-form algebra) and reports its worst-case margin.
The pytest suite covers the same ground more broadly; this module is the
installable release gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .basis import EigenBasis, gramian_diagonal, resolvent_apply, state_norm
from .config import ExperimentConfig
from .controller import fixed_point_solve, terminal_identity_residual
from .inclusion import hvi_residual, weak_residual, integrate_path
from .noise import QWienerSpec, ito_isometry_check
from .nonsmooth import ThermostatPotential, clarke_bounds, clarke_dirderiv


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    margin: float
    detail: str


def gramian_quadrature_oracle(n: int, a: float) -> float:
    """Adaptive quadrature of int_0^a e^{-2 n^2 tau} d tau (layer at tau = 0)."""
    rate = 2.0 * n * n
    layer = min(a, 20.0 / rate)
    value, _ = quad(
        lambda tau: np.exp(-rate * tau),
        0.0,
        a,
        points=(layer,),
        limit=200,
        epsabs=1e-14,
        epsrel=1e-13,
    )
    return value


def run_gramian_suite(perturb: float = 0.0) -> SuiteResult:
    """Closed-form Gramian diagonal vs. quadrature, 1e-10 absolute."""
    worst = 0.0
    for a in (0.25, 1.0, 4.0):
        basis = EigenBasis(64, a)
        gammas = gramian_diagonal(a, basis).gammas + perturb
        oracle = np.array([gramian_quadrature_oracle(n, a) for n in range(1, 65)])
        worst = max(worst, float(np.max(np.abs(gammas - oracle))))
    return SuiteResult(
        name="gramian_quadrature",
        passed=worst < 1e-10,
        margin=worst,
        detail="max |gamma_n - quadrature| over n<=64, a in {0.25,1,4}",
    )


def run_resolvent_suite(samples: int = 1000, seed: int = 7) -> SuiteResult:
    """Contraction ||eps (eps I + G)^{-1} y|| <= ||y|| on random vectors."""
    basis = EigenBasis(32, 1.0)
    gram = gramian_diagonal(1.0, basis)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(samples):
        y = rng.standard_normal(basis.modes) * rng.uniform(0.1, 10.0)
        for eps in 10.0 ** -np.arange(0, 7):
            scaled = eps * resolvent_apply(eps, gram, y)
            worst = max(worst, state_norm(scaled) - state_norm(y))
    return SuiteResult(
        name="resolvent_contraction",
        passed=worst <= 0.0,
        margin=worst,
        detail="max ||eps R y|| - ||y|| over 1000 vectors x 7 eps values",
    )


def run_clarke_suite() -> SuiteResult:
    """Directional derivative equals the support function of the interval."""
    pots = (
        ThermostatPotential(0.0, 1.0, -2.0, 3.0),
        ThermostatPotential(-0.25, 0.25, -0.5, 0.5),
        ThermostatPotential(0.5, 0.5, -1.0, 2.0),
    )
    worst = 0.0
    bound_excess = 0.0
    for pot in pots:
        u = np.concatenate([np.linspace(pot.s1 - 2, pot.s2 + 2, 1000), [pot.s1, pot.s2]])
        lo, hi = clarke_bounds(pot, u)
        outer = max(abs(pot.g1), pot.g2)
        bound_excess = max(bound_excess, float(np.max(np.maximum(np.abs(lo), np.abs(hi)))) - outer)
        for v in np.linspace(-2.0, 2.0, 41):
            direct = clarke_dirderiv(pot, u, np.full_like(u, v))
            support = np.maximum(lo * v, hi * v)
            worst = max(worst, float(np.max(np.abs(direct - support))))
    passed = worst == 0.0 and bound_excess <= 0.0
    return SuiteResult(
        name="clarke_max_formula",
        passed=passed,
        margin=max(worst, bound_excess),
        detail="support-function mismatch and interval bound excess",
    )


def run_ito_suite(seeds: int = 10, paths: int = 2000) -> SuiteResult:
    """Monte Carlo Ito isometry z-scores within 3 for at least 9/10 seeds."""
    spec = QWienerSpec.power_profile(8)
    sigma = np.ones(8)
    z_scores = [
        ito_isometry_check(sigma, spec, paths, steps=8, horizon=1.0, seed=100 + i).z_score
        for i in range(seeds)
    ]
    hits = sum(abs(z) <= 3.0 for z in z_scores)
    return SuiteResult(
        name="ito_isometry",
        passed=hits >= seeds - 1,
        margin=float(max(abs(z) for z in z_scores)),
        detail=f"{hits}/{seeds} seeds with |z| <= 3",
    )


def _linear_problem(steps: int, eps: float = 0.1):
    cfg = ExperimentConfig.defaults().with_overrides(
        modes=4,
        steps=steps,
        eps=eps,
        x0="e1",
        z="zero",
        pot_g1=0.0,
        pot_g2=0.0,
        diff_lo=0.0,
        diff_hi=0.0,
        diff_gain=0.0,
        paths=1,
    )
    return cfg.to_problem()


def run_weak_hvi_suite() -> SuiteResult:
    """Weak-residual halving ratio on the linear case; HVI slack nonnegative."""
    residuals = []
    for steps in (64, 128, 256, 512, 1024):
        problem = _linear_problem(steps)
        path = integrate_path(problem, problem.noise_for(0))
        residuals.append(weak_residual(path, 1, problem))
    ratios = [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
    ratio_ok = all(1.7 <= r <= 2.3 for r in ratios)

    problem = ExperimentConfig.defaults().with_overrides(paths=1, steps=128).to_problem()
    rng = np.random.default_rng(11)
    min_slack = np.inf
    for idx in range(10):
        path = integrate_path(problem, problem.noise_for(idx))
        for _ in range(4):
            xi = rng.standard_normal(problem.modes)
            min_slack = min(min_slack, hvi_residual(path, xi, problem))
    passed = ratio_ok and min_slack >= -1e-10
    return SuiteResult(
        name="weak_hvi_residuals",
        passed=passed,
        margin=float(min_slack),
        detail=f"halving ratios {['%.3f' % r for r in ratios]}, min HVI slack {min_slack:.2e}",
    )


def run_stepv_suite() -> SuiteResult:
    """Terminal identity q(a) = z - eps (eps I + G)^{-1} Z on converged paths."""
    problem = _linear_problem(256)
    path = fixed_point_solve(problem, problem.noise_for(0))
    worst = terminal_identity_residual(
        path, problem.eps, problem.gram, problem.z, problem.x0, problem.basis
    )
    ok = path.converged and path.fp_iterations == 2 and worst < 1e-8

    stoch = ExperimentConfig.defaults().with_overrides(paths=1, steps=128).to_problem()
    for idx in range(10):
        path = fixed_point_solve(stoch, stoch.noise_for(idx))
        if not path.converged:
            continue
        worst = max(
            worst,
            terminal_identity_residual(
                path, stoch.eps, stoch.gram, stoch.z, stoch.x0, stoch.basis
            ),
        )
    passed = bool(ok and worst < 1e-6)
    return SuiteResult(
        name="stepv_identity",
        passed=passed,
        margin=worst,
        detail="max ||q(a) - z + eps (eps I + G)^{-1} Z|| over converged paths",
    )


ALL_SUITES = (
    run_gramian_suite,
    run_resolvent_suite,
    run_clarke_suite,
    run_ito_suite,
    run_weak_hvi_suite,
    run_stepv_suite,
)


def run_all():
    return [suite() for suite in ALL_SUITES]
