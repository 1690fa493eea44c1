"""Control synthesis, the controlled update map, fixed points, and sweeps."""

import math

import numpy as np
import pytest

from thermoctl import (
    apriori_bound,
    compute_Z,
    control_energy,
    epsilon_sweep,
    fixed_point_solve,
    gamma_eps_apply,
    integrate_path,
    run_ensemble,
    synthesize_control,
    terminal_identity_residual,
)
from thermoctl.config import ExperimentConfig


def linear_cfg(**overrides):
    base = dict(
        modes=4,
        steps=256,
        x0="zero",
        z="e1",
        pot_g1=0.0,
        pot_g2=0.0,
        diff_lo=0.0,
        diff_hi=0.0,
        diff_gain=0.0,
        paths=1,
    )
    base.update(overrides)
    return ExperimentConfig.defaults().with_overrides(**base)


class TestComputeZ:
    def test_free_problem_returns_target(self):
        p = linear_cfg().to_problem()
        path = integrate_path(p, p.noise_for(0))
        Z = compute_Z(path, p.z, p.x0, p.basis)
        np.testing.assert_allclose(Z, p.z, atol=1e-14)

    def test_decayed_initial_state(self):
        p = linear_cfg(x0="e1", z="zero").to_problem()
        path = integrate_path(p, p.noise_for(0))
        Z = compute_Z(path, p.z, p.x0, p.basis)
        assert Z[0] == pytest.approx(-math.exp(-1), abs=1e-14)
        assert np.all(np.abs(Z[1:]) < 1e-15)

    def test_affine_in_target(self):
        p = ExperimentConfig.defaults().with_overrides(steps=64).to_problem()
        path = integrate_path(p, p.noise_for(0))
        rng = np.random.default_rng(41)
        z1, z2 = rng.standard_normal((2, p.modes))
        base = compute_Z(path, np.zeros(p.modes), p.x0, p.basis)
        mix = compute_Z(path, 2.0 * z1 - 3.0 * z2, p.x0, p.basis)
        np.testing.assert_allclose(
            mix - base, 2.0 * z1 - 3.0 * z2, atol=1e-12
        )


class TestSynthesizeControl:
    def test_zero_defect_zero_control(self):
        p = linear_cfg().to_problem()
        t = np.linspace(0, 1, 9)
        u = synthesize_control(np.zeros(4), 0.1, p.gram, p.basis, t)
        assert np.all(u == 0.0)

    def test_terminal_sample_value(self):
        p = linear_cfg().to_problem()
        Z = np.zeros(4)
        Z[0] = 1.0
        t = np.linspace(0, 1, 5)
        u = synthesize_control(Z, 0.1, p.gram, p.basis, t)
        assert u[-1, 0] == pytest.approx(1.0 / (0.1 + p.gram.gammas[0]), abs=1e-14)
        # backwards-decaying shape e^{-n^2 (a - t)}
        np.testing.assert_allclose(
            u[:, 0], np.exp(-(1.0 - t)) * u[-1, 0], atol=1e-14
        )

    def test_energy_riemann_sum_converges_to_closed_form(self):
        # quadrature oracle: sum_k ||u(t_k)||^2 dt -> sum_n gamma_n Z_n^2/(eps+gamma_n)^2
        p = linear_cfg().to_problem()
        rng = np.random.default_rng(42)
        Z = rng.standard_normal(4)
        eps = 0.1
        exact = control_energy(Z, eps, p.gram)
        gaps = []
        for steps in (64, 128, 256, 512):
            t = np.linspace(0, 1, steps + 1)
            u = synthesize_control(Z, eps, p.gram, p.basis, t)
            riemann = float((u[:-1] ** 2).sum() * (1.0 / steps))
            gaps.append(abs(riemann - exact))
        ratios = [a / b for a, b in zip(gaps, gaps[1:])]
        assert all(1.7 <= r <= 2.3 for r in ratios)


class TestGammaEpsApply:
    def test_linear_case_single_application_is_fixed_point(self):
        p = linear_cfg().to_problem()
        noise = p.noise_for(0)
        q0 = integrate_path(p, noise).q_traj
        once = gamma_eps_apply(p, q0, noise)
        twice = gamma_eps_apply(p, once.q_traj, noise)
        np.testing.assert_allclose(once.q_traj, twice.q_traj, atol=1e-15)

    def test_zero_target_zero_noise_zero_fixed_point(self):
        # thermostat active but with 0 interior to its dead band, no noise,
        # zero target: the zero trajectory reproduces itself
        cfg = ExperimentConfig.defaults().with_overrides(
            x0="zero", z="zero", mu_scale=0.0,
            diff_lo=0.0, diff_hi=0.0, diff_gain=0.0, steps=64,
        )
        p = cfg.to_problem()
        assert p.pot.s1 < 0.0 < p.pot.s2 and p.pot.lipschitz > 0
        noise = p.noise_for(0)
        zero = np.zeros((p.steps + 1, p.modes))
        out = gamma_eps_apply(p, zero, noise)
        assert np.all(out.q_traj == 0.0)

    def test_bitwise_determinism(self):
        p = ExperimentConfig.defaults().with_overrides(steps=64).to_problem()
        noise = p.noise_for(3)
        q0 = integrate_path(p, noise).q_traj
        a = gamma_eps_apply(p, q0, noise)
        b = gamma_eps_apply(p, q0, noise)
        assert np.array_equal(a.q_traj, b.q_traj)
        assert np.array_equal(a.u_traj, b.u_traj)

    def test_shape_mismatch_rejected(self):
        p = ExperimentConfig.defaults().with_overrides(steps=64).to_problem()
        with pytest.raises(ValueError):
            gamma_eps_apply(p, np.zeros((10, p.modes)), p.noise_for(0))


class TestFixedPoint:
    def test_linear_case_one_correction_step(self):
        p = linear_cfg().to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        assert path.converged
        assert path.fp_iterations == 2

    def test_thermostat_off_two_applications(self):
        # small target inside the dead band, state-independent diffusion:
        # both selections are constant along any iterate
        cfg = ExperimentConfig.defaults().with_overrides(
            z="0.1", diff_lo=0.02, diff_hi=0.02, diff_gain=0.0, steps=64
        )
        p = cfg.to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        assert path.converged
        assert path.fp_iterations <= 2
        assert np.all(path.f_traj == 0.0)

    def test_default_config_convergence_rate(self):
        p = ExperimentConfig.defaults().to_problem()
        converged = sum(
            fixed_point_solve(p, p.noise_for(idx)).converged for idx in range(100)
        )
        assert converged >= 95

    def test_nonconvergence_reported_not_raised(self):
        p = ExperimentConfig.defaults().with_overrides(fp_max_iter=1, steps=64).to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        assert path.converged is False
        assert path.fp_iterations == 1
        assert path.fp_delta > 0


class TestTerminalIdentity:
    def test_linear_case_roundoff(self):
        p = linear_cfg(steps=1024).to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        resid = terminal_identity_residual(path, p.eps, p.gram, p.z, p.x0, p.basis)
        assert resid < 1e-8

    def test_target_already_reached_freely(self):
        # z = T(a) x0 with no selections: Z = 0, u = 0, residual round-off
        x0 = 1.0
        z = repr(math.exp(-1.0))
        p = linear_cfg(x0="e1", z=z).to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        Z = compute_Z(path, p.z, p.x0, p.basis)
        assert np.all(np.abs(Z) < 1e-12)
        assert np.all(np.abs(path.u_traj) < 1e-12)
        resid = terminal_identity_residual(path, p.eps, p.gram, p.z, p.x0, p.basis)
        assert resid < 1e-12

    def test_stochastic_converged_paths(self):
        p = ExperimentConfig.defaults().with_overrides(steps=128).to_problem()
        checked = 0
        for idx in range(20):
            path = fixed_point_solve(p, p.noise_for(idx))
            if not path.converged:
                continue
            resid = terminal_identity_residual(path, p.eps, p.gram, p.z, p.x0, p.basis)
            assert resid < 1e-6
            checked += 1
        assert checked >= 15

    def test_per_mode_resolvent_error_formula(self):
        # linear sub-case: terminal error per mode is exactly
        # (eps/(eps+gamma_n))^2 (z - T(a) x0)_n^2 in the discrete algebra
        cfg = linear_cfg(x0="0.3,-0.2,0.1,0.05", z="1.0,0.5,-0.25,0.125")
        p = cfg.to_problem()
        path = fixed_point_solve(p, p.noise_for(0))
        defect = p.z - np.exp(p.basis.eigenvalues * p.horizon) * p.x0
        factors = p.eps / (p.eps + p.gram.gammas)
        np.testing.assert_allclose(
            (path.terminal - p.z) ** 2, (factors * defect) ** 2, rtol=1e-10, atol=1e-18
        )


class TestAprioriBound:
    def test_constant_values_at_unit_parameters(self):
        p = linear_cfg(eps=1.0).to_problem()
        bound = apriori_bound(p)
        assert bound.k1 == pytest.approx(16.0)
        assert bound.k2 == pytest.approx(20.0)
        assert bound.k3 == pytest.approx(20.0)
        assert bound.k4 == pytest.approx(17.0)

    def test_scaling_with_eps(self):
        small = apriori_bound(linear_cfg(eps=0.01).to_problem())
        large = apriori_bound(linear_cfg(eps=1.0).to_problem())
        assert small.k1 == pytest.approx(large.k1 * 1e4)

    def test_bound_dominates_observed_moment(self):
        p = ExperimentConfig.defaults().with_overrides(steps=64, paths=40).to_problem()
        ensemble = run_ensemble(p)
        assert ensemble.sup_moment <= apriori_bound(p).value


class TestEnsembleAndSweep:
    def test_linear_closed_form_curve(self):
        cfg = linear_cfg(modes=8)
        p = cfg.to_problem()
        sweep = epsilon_sweep(p, [1.0, 0.1, 0.01])
        gamma1 = p.gram.gammas[0]
        for row, eps in zip(sweep.rows, (1.0, 0.1, 0.01)):
            exact = (eps / (eps + gamma1)) ** 2
            assert row.error_mean == pytest.approx(exact, abs=1e-6)
            assert row.error_ci == 0.0
            assert row.fp_rate == 1.0
        displayed = [round(r.error_mean, 3 - int(np.floor(np.log10(r.error_mean))) - 1) for r in sweep.rows]
        assert displayed == [0.487, 0.0353, 0.000511]

    def test_single_element_sweep(self):
        p = linear_cfg().to_problem()
        sweep = epsilon_sweep(p, [0.5])
        assert len(sweep.rows) == 1

    def test_sweep_validation(self):
        p = linear_cfg().to_problem()
        with pytest.raises(ValueError):
            epsilon_sweep(p, [])
        with pytest.raises(ValueError):
            epsilon_sweep(p, [0.1, 0.5])
        with pytest.raises(ValueError):
            epsilon_sweep(p, [0.5, -0.1])

    def test_control_energy_monotone_in_eps(self):
        # for fixed Z, energy sum gamma Z^2/(eps+gamma)^2 decreases in eps
        p = linear_cfg().to_problem()
        rng = np.random.default_rng(43)
        Z = rng.standard_normal(p.modes)
        energies = [control_energy(Z, eps, p.gram) for eps in (0.5, 0.1, 0.02)]
        assert energies[0] < energies[1] < energies[2]

    def test_scaled_resolvent_monotone_in_eps(self):
        p = linear_cfg().to_problem()
        Z = np.ones(p.modes)
        norms = [
            float(np.linalg.norm(eps * Z / (eps + p.gram.gammas)))
            for eps in (1.0, 0.3, 0.1, 0.02)
        ]
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_stochastic_trend_small_ensemble(self):
        p = ExperimentConfig.defaults().with_overrides(paths=60).to_problem()
        sweep = epsilon_sweep(p, [0.5, 0.1, 0.02])
        errors = [row.error_mean for row in sweep.rows]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < errors[0] / 5

    def test_worker_count_invariance(self):
        p = ExperimentConfig.defaults().with_overrides(paths=60, steps=64).to_problem()
        serial = run_ensemble(p, workers=1)
        parallel = run_ensemble(p, workers=2)
        assert np.array_equal(serial.terminal_errors, parallel.terminal_errors)
        assert np.array_equal(serial.moment_curve, parallel.moment_curve)
        assert np.array_equal(serial.energies, parallel.energies)

    def test_sweep_failure_recorded_not_fatal(self):
        cfg = linear_cfg(x0="1e200")
        p = cfg.to_problem()
        sweep = epsilon_sweep(p, [0.5, 0.1])
        assert sweep.any_failed
        assert all(row.failed for row in sweep.rows)
        assert "TrajectoryBlowup" in sweep.rows[0].message
