"""Coefficient mappings certified by dual simulation, plus the comparator."""

import numpy as np
import pytest

from accelsgd.equivalence import (AccelCoefficients, LegacyForm,
                                  SingularMappingError, check_ademamix_simplified,
                                  check_legacy, check_mars_rewrite,
                                  check_schedule_free, compare_trajectories,
                                  gradient_fn, map_ademamix_to_simplified,
                                  map_legacy, map_schedule_free,
                                  map_simplified_to_ademamix,
                                  optimizer_trajectory, reconstruct_sf_average,
                                  run_named_check, simulate_accel,
                                  simulate_legacy)
from accelsgd.optimizers import OptimizerConfig
from accelsgd.problems import quadratic
from accelsgd.rng import stream


class TestComparator:
    def test_identical_runs_have_zero_gap(self):
        traj = stream(0, 0, "test").standard_normal((50, 4))
        diff = compare_trajectories(traj, traj.copy(), tolerance=1e-12)
        assert diff.max_abs_gap == 0.0
        assert diff.max_rel_gap == 0.0
        assert diff.first_divergence_step is None
        assert diff.ok

    def test_divergence_step_reported(self):
        a = np.ones((10, 2))
        b = a.copy()
        b[6] += 1e-3
        diff = compare_trajectories(a, b, tolerance=1e-6)
        assert diff.first_divergence_step == 6
        assert not diff.ok

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            compare_trajectories(np.ones((5, 2)), np.ones((6, 2)), 1e-9)


class TestScheduleFreeMapping:
    def test_beta_zero_is_pure_sgd_plus_averaging(self):
        c = np.array([1.0, 0.5, 1 / 3])
        coeffs = map_schedule_free(0.0, 0.7, c)
        assert np.all(coeffs.alpha_a == 0.7)
        assert np.all(coeffs.eta_a == 0.0)

    def test_beta_one_is_momentum_sgd(self):
        c = 1.0 / np.arange(1, 11)
        coeffs = map_schedule_free(1.0, 0.5, c)
        assert np.all(coeffs.alpha_a == 0.0)
        # beta_a,t = 1 - c_{t-1} = 1 - 1/(t-1): the 1 - 1/t family
        assert coeffs.beta_a[3] == pytest.approx(1 - 1 / 3)

    def test_substitution_example(self):
        coeffs = map_schedule_free(0.9, 1.0, np.full(5, 0.01))
        assert np.allclose(coeffs.eta_a, 0.009)
        assert np.allclose(coeffs.alpha_a, 0.1)
        assert np.allclose(coeffs.beta_a[1:], 0.99)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 0.9, 1.0])
    def test_dual_simulation(self, beta):
        results = dict(check_schedule_free(beta=beta, gamma=0.05, steps=1500,
                                           seed=3, tolerance=1e-9))
        assert results["y"].ok, results["y"]
        if beta < 1.0:
            assert results["x"].ok, results["x"]

    def test_reconstruction_tight_tolerance_at_1k_steps(self):
        results = dict(check_schedule_free(beta=0.9, gamma=0.05, steps=1000,
                                           seed=0, tolerance=1e-10))
        assert results["x"].ok and results["x"].max_rel_gap <= 1e-10

    def test_reconstruction_beta_zero_is_running_average(self):
        y = stream(1, 0, "test").standard_normal((20, 3))
        c = 1.0 / np.arange(1, 20)
        x = reconstruct_sf_average(y, 0.0, c)
        for t in range(1, 20):
            assert np.allclose(x[t], np.mean(y[1:t + 1], axis=0), atol=1e-12)

    def test_reconstruction_constant_c_is_ema(self):
        y = stream(2, 0, "test").standard_normal((30, 2))
        c = np.full(29, 0.25)
        x = reconstruct_sf_average(y, 0.0, c)
        ema = y[0].copy()
        for t in range(1, 30):
            ema = 0.75 * ema + 0.25 * y[t]
            assert np.allclose(x[t], ema, rtol=1e-14)

    def test_reconstruction_degenerate_rejected(self):
        y = np.zeros((3, 1))
        with pytest.raises(ValueError, match="c_t"):
            map_schedule_free(1.0, 1.0, np.array([0.0, 0.0]))
        with pytest.raises(ValueError, match="degenerate"):
            reconstruct_sf_average(y, 1.0, np.array([0.0, 0.0]))


class TestLegacyMappings:
    def test_agnes_constant_rho(self):
        coeffs = map_legacy(LegacyForm("agnes", {"alpha": 0.1, "eta": 0.05,
                                                 "rho": 0.8}), 10)
        assert np.all(coeffs.beta_a == 0.8)
        assert np.allclose(coeffs.eta_a, 0.08)
        assert np.all(coeffs.alpha_a == 0.05)

    @pytest.mark.parametrize("kind", ["agnes", "asgd-jain", "mass",
                                      "nesterov-vaswani"])
    def test_default_dual_simulation(self, kind):
        (label, diff), = check_legacy(kind, steps=500, seed=0, tolerance=1e-10)
        assert diff.ok, (label, diff)

    def test_mass_singular_rejected(self):
        with pytest.raises(SingularMappingError, match="eta1\\*gamma == eta2"):
            map_legacy(LegacyForm("mass", {"gamma": 0.5, "eta1": 0.1,
                                           "eta2": 0.05}), 10)

    def test_asgd_singular_rejected(self):
        with pytest.raises(SingularMappingError, match="gamma == delta"):
            map_legacy(LegacyForm("asgd-jain", {"alpha": 0.5, "beta": 0.5,
                                                "gamma": 0.1, "delta": 0.1}), 10)

    def test_nesterov_gamma_one_rejected(self):
        with pytest.raises(SingularMappingError, match="gamma_k"):
            map_legacy(LegacyForm("nesterov-vaswani",
                                  {"eta": 0.1, "alpha": 0.5, "beta": 0.9,
                                   "gamma": 1.0}), 10)

    def test_agnes_time_varying_rho(self):
        # rho_n = 1 - 1/(n+4): the growing-momentum schedule
        steps = 300
        rho = 1.0 - 1.0 / (np.arange(1, steps + 1) + 4.0)
        form = LegacyForm("agnes", {"alpha": 0.02, "eta": 0.05, "rho": rho})
        problem = quadratic(np.linspace(0.2, 1.0, 4))
        grad = gradient_fn(problem, 5)
        w0 = stream(5, 0, "init").standard_normal(4)
        orig = simulate_legacy(form, grad, w0, steps)
        mapped = simulate_accel(grad, w0, map_legacy(form, steps))
        assert compare_trajectories(orig, mapped, 1e-10).ok

    def test_random_draws_all_kinds(self):
        # 50 non-singular draws per kind, 500 deterministic steps, <= 1e-9
        problem = quadratic(np.linspace(0.2, 1.0, 5))
        draw = stream(99, 0, "legacy-draws")
        for kind in ("agnes", "asgd-jain", "mass", "nesterov-vaswani"):
            for i in range(50):
                params = _draw_params(kind, draw)
                (_, diff), = check_legacy(kind, params=params, steps=500,
                                          seed=i, tolerance=1e-9,
                                          problem=problem)
                assert diff.ok, (kind, params, diff)


def _draw_params(kind, rng):
    """Stable-and-nonsingular parameter draws (margin >= 1e-3)."""
    if kind == "agnes":
        return {"alpha": rng.uniform(0.005, 0.1), "eta": rng.uniform(0.01, 0.2),
                "rho": rng.uniform(0.1, 0.9)}
    if kind == "asgd-jain":
        delta = rng.uniform(0.01, 0.1)
        return {"alpha": rng.uniform(0.05, 0.95), "beta": rng.uniform(0.05, 0.95),
                "gamma": delta + rng.uniform(1e-3, 0.4), "delta": delta}
    if kind == "mass":
        gamma = rng.uniform(0.1, 0.9)
        eta1 = rng.uniform(0.02, 0.2)
        return {"gamma": gamma, "eta1": eta1,
                "eta2": rng.uniform(0.0, max(1e-3, eta1 * gamma - 1e-3))}
    return {"eta": rng.uniform(0.01, 0.15), "alpha": rng.uniform(0.05, 0.95),
            "beta": rng.uniform(0.05, 0.95), "gamma": 1.0 + rng.uniform(1e-3, 2.0)}


class TestAdemamixMapping:
    def test_worked_example(self):
        b1p, ap, ep = map_ademamix_to_simplified(0.999, 8.0, 1e-3)
        assert b1p == 0.999
        assert ap == pytest.approx(125.0, rel=1e-12)
        assert ep == pytest.approx(8e-6, rel=1e-12)

    def test_roundtrip_identity(self):
        for (b3, al, et) in ((0.99, 2.0, 1e-3), (0.999, 8.0, 3e-4),
                             (0.9999, 16.0, 1e-2)):
            b1p, ap, ep = map_ademamix_to_simplified(b3, al, et)
            b3r, alr, etr = map_simplified_to_ademamix(b1p, ap, ep)
            assert b3r == b3
            assert alr == pytest.approx(al, rel=1e-15)
            assert etr == pytest.approx(et, rel=1e-15)

    def test_rejected_parameters(self):
        with pytest.raises(ValueError):
            map_ademamix_to_simplified(0.0, 8.0, 1e-3)
        with pytest.raises(ValueError):
            map_ademamix_to_simplified(1.0, 8.0, 1e-3)
        with pytest.raises(ValueError):
            map_ademamix_to_simplified(0.999, 0.0, 1e-3)

    def test_dual_simulation(self):
        (_, diff), = check_ademamix_simplified(beta3=0.999, alpha=8.0,
                                               eta=1e-3, steps=500,
                                               tolerance=1e-10)
        assert diff.ok, diff

    def test_constant_gradient_numerators_agree(self):
        # closed-form geometric sums of both numerators under a constant
        # gradient stream
        b3, al, et = 0.99, 4.0, 1e-3
        b1p, ap, ep = map_ademamix_to_simplified(b3, al, et)
        g = 0.37
        m2 = m1 = 0.0
        for t in range(1, 200):
            m2 = b3 * m2 + (1 - b3) * g
            m1 = b1p * m1 + g
            lhs = et * (g + al * m2)          # ademamix (beta1 = 0) numerator
            rhs = ep * (m1 + ap * g)          # simplified numerator
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestMarsRewrite:
    def test_identity_holds(self):
        (_, diff), = check_mars_rewrite(gamma=0.03, steps=400)
        assert diff.ok
        assert diff.max_abs_gap <= 1e-12

    def test_gamma_zero_trivial(self):
        (_, diff), = check_mars_rewrite(gamma=0.0, steps=100)
        assert diff.ok


class TestOptimizerTrajectory:
    def test_adamw_laprop_coincide_at_beta1_zero(self):
        problem = quadratic(np.linspace(0.2, 1.0, 6),
                            noise="additive-gaussian", noise_sigma=0.2)
        kw = dict(lr=5e-3, beta1=0.0, weight_decay=0.0)
        ta = optimizer_trajectory(OptimizerConfig(algorithm="adamw", **kw),
                                  problem, 400, seed=2)
        tb = optimizer_trajectory(OptimizerConfig(algorithm="laprop", **kw),
                                  problem, 400, seed=2)
        diff = compare_trajectories(ta, tb, 1e-12)
        assert diff.ok, diff


class TestNamedChecks:
    def test_all_names_run(self):
        for name in ("schedule-free", "agnes", "asgd-jain", "mass", "nesterov",
                     "ademamix-simplified", "mars-rewrite"):
            results = run_named_check(name, horizon=120)
            assert all(d.ok for _, d in results), name

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown mapping"):
            run_named_check("polyak")


class TestAccelCoefficients:
    def test_validation(self):
        with pytest.raises(ValueError, match="beta_a"):
            AccelCoefficients(np.array([1.5]), np.array([0.1]), np.array([0.1]))
        with pytest.raises(ValueError, match=">= 0"):
            AccelCoefficients(np.array([0.5]), np.array([-0.1]), np.array([0.1]))
        with pytest.raises(ValueError, match="length"):
            AccelCoefficients(np.zeros(3), np.zeros(2), np.zeros(3))
