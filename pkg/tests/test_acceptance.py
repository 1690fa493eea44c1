"""Acceptance gate: every release criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line (visible under ``pytest -s`` or on
failure).  Tolerances are pinned here and nowhere else; the heavyweight
ensembles are shared across criteria through module-scoped fixtures.
"""

import numpy as np
import pytest
from dataclasses import replace

from thermoctl import (
    EigenBasis,
    QWienerSpec,
    apriori_bound,
    coarsen_noise,
    fixed_point_solve,
    gramian_diagonal,
    hvi_residual,
    integrate_path,
    ito_isometry_check,
    resolvent_apply,
    run_ensemble,
    terminal_identity_residual,
    weak_residual,
)
from thermoctl.basis import state_norm
from thermoctl.cli import main
from thermoctl.config import ExperimentConfig
from thermoctl.nonsmooth import ThermostatPotential, clarke_bounds, clarke_dirderiv
from thermoctl.selftest import gramian_quadrature_oracle

TREND_EPS = (0.5, 0.1, 0.02)


def record(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_problem():
    return ExperimentConfig.defaults().to_problem()


@pytest.fixture(scope="module")
def stepv_paths(default_problem):
    p = default_problem
    return [fixed_point_solve(p, p.noise_for(idx)) for idx in range(100)]


@pytest.fixture(scope="module")
def trend_ensembles(default_problem):
    p = replace(default_problem, paths=2000)
    return {eps: run_ensemble(replace(p, eps=eps)) for eps in TREND_EPS}


def test_gramian_oracle():
    worst = 0.0
    for a in (0.25, 1.0, 4.0):
        basis = EigenBasis(64, a)
        gammas = gramian_diagonal(a, basis).gammas
        oracle = np.array([gramian_quadrature_oracle(n, a) for n in range(1, 65)])
        worst = max(worst, float(np.max(np.abs(gammas - oracle))))
    record(
        "gramian-oracle",
        worst < 1e-10,
        f"max |gamma_n - quadrature| = {worst:.3e} over n<=64, a in (0.25, 1, 4) (tol 1e-10)",
    )


def test_resolvent_contraction():
    basis = EigenBasis(32, 1.0)
    gram = gramian_diagonal(1.0, basis)
    rng = np.random.default_rng(2024)
    violations = 0
    worst = -np.inf
    for _ in range(1000):
        y = rng.standard_normal(32) * rng.uniform(0.01, 100.0)
        ny = state_norm(y)
        for eps in 10.0 ** -np.arange(0, 7):
            excess = state_norm(eps * resolvent_apply(eps, gram, y)) - ny
            worst = max(worst, excess)
            violations += excess > 0
    record(
        "resolvent-contraction",
        violations == 0,
        f"{violations} violations over 1000 vectors x 7 eps; worst excess {worst:.3e}",
    )


def test_linear_case_controllability_curve():
    cfg = ExperimentConfig.defaults().with_overrides(
        modes=8, steps=256, x0="zero", z="e1",
        pot_g1=0.0, pot_g2=0.0, diff_lo=0.0, diff_hi=0.0, diff_gain=0.0, paths=1,
    )
    p = cfg.to_problem()
    gamma1 = p.gram.gammas[0]
    worst = 0.0
    errors = []
    for eps in (1.0, 0.1, 0.01, 0.001):
        path = fixed_point_solve(replace(p, eps=eps), p.noise_for(0))
        err = float(np.sum((path.terminal - p.z) ** 2))
        errors.append(err)
        if eps >= 0.01:
            worst = max(worst, abs(err - (eps / (eps + gamma1)) ** 2))
    vanishing = all(a > b for a, b in zip(errors, errors[1:])) and errors[-1] < 1e-5
    record(
        "linear-curve",
        worst < 1e-6 and vanishing,
        f"max |error - closed form| = {worst:.3e} (tol 1e-6); "
        f"errors {['%.3g' % e for e in errors]} decreasing to {errors[-1]:.2e}",
    )


def test_stepv_terminal_identity(default_problem, stepv_paths):
    p = default_problem
    tol = 1e-6 + 10.0 * (p.horizon / p.steps)
    converged = [path for path in stepv_paths if path.converged]
    worst = max(
        terminal_identity_residual(path, p.eps, p.gram, p.z, p.x0, p.basis)
        for path in converged
    )
    record(
        "stepv-identity",
        worst < tol,
        f"max residual {worst:.3e} over {len(converged)}/100 converged paths (tol {tol:.3e})",
    )


def test_approximate_controllability_trend(trend_ensembles):
    errors = [trend_ensembles[eps].error_mean for eps in TREND_EPS]
    decreasing = all(a > b for a, b in zip(errors, errors[1:]))
    record(
        "controllability-trend",
        decreasing and errors[-1] < errors[0] / 5.0,
        f"E||q(a)-z||^2 = {['%.5f' % e for e in errors]} at eps {list(TREND_EPS)}, "
        f"M=2000 shared seeds; final/first = {errors[-1] / errors[0]:.4f}",
    )


def test_clarke_calculus():
    pot = ThermostatPotential(-0.25, 0.25, -0.5, 0.5)
    u = np.concatenate([np.linspace(-1.5, 1.5, 1000), [pot.s1, pot.s2]])
    lo, hi = clarke_bounds(pot, u)
    worst = 0.0
    for v in np.linspace(-2.0, 2.0, 41):
        direct = clarke_dirderiv(pot, u, np.full_like(u, v))
        worst = max(worst, float(np.max(np.abs(direct - np.maximum(lo * v, hi * v)))))
    bound_ok = np.all(np.maximum(np.abs(lo), np.abs(hi)) <= pot.lipschitz)
    record(
        "clarke-calculus",
        worst == 0.0 and bound_ok,
        f"max-formula mismatch {worst:.1e} on 10^3 grid x 41 directions; "
        f"interval bounded by {pot.lipschitz}",
    )


def test_hvi_certification():
    cfg = ExperimentConfig.defaults().with_overrides(steps=128)
    rng = np.random.default_rng(77)
    worst = np.inf
    for idx in range(100):
        policy = ("minimal_norm", "lower", "upper", "midpoint")[idx % 4]
        p = cfg.with_overrides(policy=policy).to_problem()
        path = integrate_path(p, p.noise_for(idx))
        for _ in range(10):
            xi = rng.standard_normal(p.modes)
            worst = min(worst, hvi_residual(path, xi, p))
    record(
        "hvi-certification",
        worst >= -1e-10,
        f"min slack {worst:.3e} over 100 runs x 10 directions (tol -1e-10)",
    )


def test_weak_residual_order():
    lin = ExperimentConfig.defaults().with_overrides(
        modes=4, x0="e1", z="zero", pot_g1=0.0, pot_g2=0.0,
        diff_lo=0.0, diff_hi=0.0, diff_gain=0.0, paths=1,
    )
    residuals = []
    for k in (6, 7, 8, 9, 10):
        p = lin.with_overrides(steps=2**k).to_problem()
        residuals.append(weak_residual(integrate_path(p, p.noise_for(0)), 1, p))
    ratios = [a / b for a, b in zip(residuals, residuals[1:])]
    ratio_ok = all(1.8 <= r <= 2.2 for r in ratios)

    cfg = ExperimentConfig.defaults()
    monotone = 0
    for idx in range(20):
        fine = cfg.with_overrides(steps=1024).to_problem().noise_for(idx)
        ladder = [fine]
        for _ in range(4):
            ladder.append(coarsen_noise(ladder[-1]))
        vals = []
        for nz in ladder[::-1]:
            p = cfg.with_overrides(steps=nz.steps).to_problem()
            vals.append(weak_residual(integrate_path(p, nz), 1, p))
        monotone += all(a > b for a, b in zip(vals, vals[1:]))
    record(
        "weak-residual-order",
        ratio_ok and monotone == 20,
        f"halving ratios {['%.3f' % r for r in ratios]} (need 1.8..2.2); "
        f"monotone decrease on {monotone}/20 common-noise runs",
    )


def test_ito_isometry():
    spec = QWienerSpec.power_profile(8)
    sigma = np.ones(8)
    z_scores = [
        ito_isometry_check(sigma, spec, paths=10_000, steps=4, horizon=1.0, seed=seed).z_score
        for seed in range(10)
    ]
    hits = sum(abs(z) <= 3.0 for z in z_scores)
    record(
        "ito-isometry",
        hits >= 9,
        f"{hits}/10 seeds with |z| <= 3 at M=10^4; z = {['%.2f' % z for z in z_scores]}",
    )


def test_apriori_bound(default_problem, trend_ensembles):
    checks = []
    for eps in TREND_EPS:
        bound = apriori_bound(replace(default_problem, eps=eps)).value
        observed = trend_ensembles[eps].sup_moment
        checks.append((eps, observed, bound, observed <= bound))
    ok = all(c[-1] for c in checks)
    detail = "; ".join(f"eps={e}: sup_t E||q||^2 = {o:.3f} <= {b:.3g}" for e, o, b, _ in checks)
    record("apriori-bound", ok, detail)


def test_determinism_across_workers(tmp_path):
    cfg_text = "modes = 8\nsteps = 64\npaths = 30\neps_list = 0.5, 0.1\n"
    cfg_file = tmp_path / "acc.cfg"
    cfg_file.write_text(cfg_text)
    outputs = {}
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        code = main(
            ["sweep", "--config", str(cfg_file), "--out", str(out), "--workers", str(workers)]
        )
        assert code == 0
        outputs[workers] = (out / "sweep.csv").read_bytes()
    # and a repeat run at the same worker count
    out = tmp_path / "w1b"
    assert main(["sweep", "--config", str(cfg_file), "--out", str(out), "--workers", "1"]) == 0
    repeat = (out / "sweep.csv").read_bytes()
    record(
        "determinism",
        outputs[1] == outputs[8] == repeat,
        f"sweep.csv byte-identical across 1 and 8 workers and repeat runs "
        f"({len(outputs[1])} bytes)",
    )
