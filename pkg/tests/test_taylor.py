"""Taylor jets, step control and trajectory integration."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from conftest import random_field
from kolmoflow.dynamics import FlowParams, forcing_field, linear_symbol, linear_symbol_array, rhs
from kolmoflow.spectral import SpectralField, TorusSpec, coefficient_norm, field_shift, l2_norm, read_field_csv
from kolmoflow.stationary import shear_branch
from kolmoflow.taylor import (
    MACHINE_TOL,
    DivergenceError,
    IntegratorConfig,
    TaylorJet,
    compute_jet,
    integrate,
    integrate_until_stationary,
    read_trajectory_csv,
    select_step,
    step,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)

# 7-point central stencils on offsets -3..3 and their orders of accuracy
STENCILS = {
    0: (np.array([0, 0, 0, 1, 0, 0, 0.0]), 64),
    1: (np.array([-1, 9, -45, 0, 45, -9, 1]) / 60, 6),
    2: (np.array([2, -27, 270, -490, 270, -27, 2]) / 180, 6),
    3: (np.array([1, -8, 13, 0, -13, 8, -1]) / 8, 4),
}


def params(eps=1.0, alpha=0.0, lam=1.0, Omega=0.0, beta=1.0, N=3, m=1):
    return FlowParams(eps, alpha, lam, Omega, TorusSpec(beta, N), m)


def unit_field(torus):
    return SpectralField.from_modes(torus, {(1, 0): 1 / math.sqrt(2)})


class TestIntegratorConfig:
    @pytest.mark.parametrize("kw", [dict(order=1), dict(tol=0.0), dict(safety=1.0), dict(h_max=0.0),
                                    dict(kernel="spline")])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_defaults(self):
        c = IntegratorConfig()
        assert (c.order, c.tol, c.safety) == (15, MACHINE_TOL, 0.9)


class TestSelectStep:
    def _jet(self, torus, scale_pm1, scale_p, p=15):
        zero = SpectralField.zeros(torus)
        u = unit_field(torus)
        coeffs = [zero] * (p - 1) + [u * scale_pm1, u * scale_p]
        return TaylorJet(tuple(coeffs))

    def test_formula_example(self):
        jet = self._jet(TorusSpec(1.0, 2), 1.0, 1.0)
        h = select_step(jet, IntegratorConfig(tol=1e-16))
        assert h == pytest.approx(0.9 * 10 ** (-16 / 14), rel=1e-14)
        assert h == pytest.approx(0.06477171057, rel=1e-10)

    def test_zero_trailing_returns_h_max(self):
        jet = self._jet(TorusSpec(1.0, 2), 0.0, 0.0)
        assert select_step(jet, IntegratorConfig(h_max=0.25)) == 0.25
        assert select_step(jet, IntegratorConfig()) == math.inf

    def test_doubling_last_term(self):
        t = TorusSpec(1.0, 2)
        cfg = IntegratorConfig(tol=1e-16)
        h1 = select_step(self._jet(t, 0.0, 1.0), cfg)
        h2 = select_step(self._jet(t, 0.0, 2.0), cfg)
        assert h2 / h1 == pytest.approx(2 ** (-1 / 15), rel=1e-14)

    def test_h_max_caps(self):
        jet = self._jet(TorusSpec(1.0, 2), 1.0, 1.0)
        assert select_step(jet, IntegratorConfig(h_max=1e-3)) == 1e-3

    @given(seeds)
    def test_accepted_step_bounds_truncation(self, seed):
        p = params(lam=3.0, beta=0.8, N=3, Omega=2.0)
        jet = compute_jet(p, random_field(p.torus, np.random.default_rng(seed)))
        cfg = IntegratorConfig()
        h = select_step(jet, cfg)
        assert l2_norm(jet.coefficients[-1]) * h**jet.order <= cfg.tol


class TestComputeJet:
    def test_shear_mode_exponential_jet(self):
        p = params(lam=0.0, Omega=4.0, beta=0.7)
        a = 0.3 - 0.2j
        u0 = SpectralField.from_modes(p.torus, {(0, 2): a})
        L = linear_symbol(p, (0, 2))
        jet = compute_jet(p, u0, order=10)
        for m, u in enumerate(jet.coefficients):
            assert u[(0, 2)] == pytest.approx(L**m * a / math.factorial(m), rel=1e-13)

    def test_from_rest(self):
        p = params(lam=2.0, Omega=1.5, beta=0.9)
        jet = compute_jet(p, SpectralField.zeros(p.torus), order=4)
        f = forcing_field(p)
        assert jet.coefficients[1].allclose(f, 0)
        L = linear_symbol_array(p)
        assert np.allclose(jet.coefficients[2].coeffs, L * f.coeffs / 2, rtol=0, atol=1e-15)

    def test_first_coefficient_is_rhs(self, rng):
        p = params(lam=2.0, Omega=3.0, beta=0.6, N=4)
        u0 = random_field(p.torus, rng)
        jet = compute_jet(p, u0)
        assert jet.coefficients[1].allclose(rhs(p, u0), 1e-13)

    def test_matches_time_differences(self):
        warnings.simplefilter("ignore", UserWarning)
        p = params(lam=1.0, alpha=0.1, Omega=2.0, N=2)
        t = p.torus
        u0 = random_field(t, np.random.default_rng(1), 0.3)

        def f(_, x):
            return rhs(p, SpectralField.from_real_vector(t, x)).to_real_vector()

        kw = dict(method="DOP853", rtol=1e-14, atol=1e-16, dense_output=True)
        fw = solve_ivp(f, (0, 0.1), u0.to_real_vector(), **kw).sol
        bw = solve_ivp(f, (0, -0.1), u0.to_real_vector(), **kw).sol

        def deriv(m, h):
            G = np.array([f(0, fw(k * h) if k >= 0 else bw(k * h)) for k in range(-3, 4)])
            w, _ = STENCILS[m - 1]
            return w @ G / h ** (m - 1) / math.factorial(m)

        jet = compute_jet(p, u0, order=8)
        for m in range(1, 5):
            q = 2 ** STENCILS[m - 1][1]
            est = (q * deriv(m, 0.01) - deriv(m, 0.02)) / (q - 1)
            exact = jet.coefficients[m].to_real_vector()
            assert np.abs(est - exact).max() <= 1e-6 * np.abs(exact).max()

    @pytest.mark.parametrize("autonomous", [True, False])
    def test_kernels_agree(self, rng, autonomous):
        p = params(lam=5.0, Omega=3.0, beta=0.7, N=4, m=2)
        u0 = random_field(p.torus, rng)
        a = compute_jet(p, u0, autonomous=autonomous, t0=0.3, kernel="direct")
        b = compute_jet(p, u0, autonomous=autonomous, t0=0.3, kernel="fft")
        for ua, ub in zip(a.coefficients, b.coefficients):
            assert coefficient_norm(ua.flat - ub.flat) <= 1e-13 * max(1.0, l2_norm(ua))

    def test_oscillating_forcing_jet(self):
        p = params(lam=2.0, Omega=3.0, m=1)
        jet = compute_jet(p, SpectralField.zeros(p.torus), order=3, autonomous=False, t0=0.4)
        phase = np.exp(1j * 3.0 * 0.4)
        assert jet.coefficients[1][(0, 1)] == pytest.approx(phase, rel=1e-15)
        # u2 = (L f0 + f1) / 2 with f1 = (λ/2)(iΩ) e^{iΩt0}
        L = linear_symbol(p.replace(Omega=0.0), (0, 1))
        assert jet.coefficients[2][(0, 1)] == pytest.approx((L * phase + 3j * phase) / 2, rel=1e-14)


class TestStep:
    @given(seeds, st.floats(0.5, 1.5), st.integers(0, 3), st.integers(1, 3))
    def test_linear_mode_matches_exponential(self, seed, beta, k1, k2):
        p = params(lam=0.0, alpha=0.2, Omega=5.0, beta=beta)
        rng = np.random.default_rng(seed)
        a = complex(*rng.normal(size=2))
        k = (0, k2) if k1 == 0 else (k1, 0)
        u0 = SpectralField.from_modes(p.torus, {k: a})
        cfg = IntegratorConfig()
        new, h = step(p, u0, 0.0, cfg)
        exact = a * np.exp(linear_symbol(p, k) * h)
        assert abs(new[k] - exact) <= 10 * cfg.tol * abs(exact)

    def test_zero_stays_zero(self):
        p = params(lam=0.0)
        new, h = step(p, SpectralField.zeros(p.torus), 0.0, IntegratorConfig(h_max=0.5))
        assert h == 0.5
        assert np.all(new.coeffs == 0)

    @pytest.mark.parametrize("Omega", [0.0, 50.0])
    def test_shear_state_is_fixed(self, Omega):
        p = params(lam=20.0, Omega=Omega, beta=0.7, N=5)
        s = shear_branch(p)
        new, _ = step(p, s, 0.0)
        assert coefficient_norm(new.flat - s.flat) <= 1e-13 * l2_norm(s)


class TestIntegrate:
    def test_heat_decay(self):
        p = params(lam=0.0)
        u0 = SpectralField.from_modes(p.torus, {(1, 0): 0.5})
        tr = integrate(p, u0, 1.0)
        assert tr.norms[-1] == pytest.approx(np.exp(-1) * tr.norms[0], rel=1e-12)
        assert tr.t_final == 1.0

    def test_samples_are_on_grid(self):
        p = params(lam=1.0)
        tr = integrate(p, SpectralField.zeros(p.torus), 1.0, sample_every=0.25)
        assert np.allclose(tr.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert np.all(np.diff(tr.times) > 0)

    def test_sampling_does_not_change_result(self, rng):
        p = params(lam=3.0, beta=0.7, N=3)
        u0 = random_field(p.torus, rng)
        a = integrate(p, u0, 2.0).final
        b = integrate(p, u0, 2.0, sample_every=0.01).final
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_halved_step_cap_is_robust(self, rng):
        p = params(lam=1.0, beta=0.7, N=3, Omega=10.0)
        u0 = random_field(p.torus, rng)
        free = integrate(p, u0, 3.0)
        h_typ = 3.0 / free.steps
        capped = integrate(p, u0, 3.0, IntegratorConfig(h_max=h_typ / 2))
        assert coefficient_norm(free.final.flat - capped.final.flat) <= 1e-10

    def test_galilean_trajectories(self, rng):
        p = params(lam=2.0, Omega=10.0, beta=0.7, N=5, m=1)
        u0 = random_field(p.torus, rng, 0.5)
        a = integrate(p, u0, 1.0).final
        b = integrate(p, u0, 1.0, autonomous=False).final
        shifted = field_shift(a, (0.0, p.beta * p.Omega * 1.0))
        assert np.abs(shifted.coeffs - b.coeffs).max() <= 1e-8

    def test_divergence_reported(self):
        p = params(eps=0.0, alpha=1e-3, lam=0.0, N=3)
        u0 = random_field(p.torus, np.random.default_rng(0), 1e14)
        with pytest.raises(DivergenceError) as info:
            integrate(p, u0, 1.0)
        assert info.value.state.torus == p.torus

    def test_rejects_backwards(self):
        p = params()
        with pytest.raises(ValueError):
            integrate(p, SpectralField.zeros(p.torus), 0.0)

    def test_csv_round_trip(self, tmp_path):
        p = params(lam=1.0)
        tr = integrate(p, SpectralField.zeros(p.torus), 0.5, sample_every=0.1)
        tr.to_csv(tmp_path / "traj.csv")
        assert (tmp_path / "traj.csv").read_text().startswith("t,norm\n")
        t, n = read_trajectory_csv(tmp_path / "traj.csv")
        assert np.array_equal(t, tr.times) and np.array_equal(n, tr.norms)

    def test_snapshots(self, tmp_path, rng):
        p = params(lam=1.0, beta=0.7)
        u0 = random_field(p.torus, rng)
        tr = integrate(p, u0, 1.0, snapshot_times=[0.5, 1.0])
        paths = tr.write_snapshots(tmp_path)
        assert len(paths) == 2
        back = read_field_csv(paths[0], p.torus)
        assert np.array_equal(back.coeffs, tr.snapshots[0.5].coeffs)

    def test_integral_convention(self):
        p = params(lam=1.0, beta=0.7)
        u0 = SpectralField.from_modes(p.torus, {(1, 0): 1.0})
        a = integrate(p, u0, 0.2, convention="coefficient").norms
        b = integrate(p, u0, 0.2, convention="integral").norms
        assert np.allclose(b / a, math.sqrt(p.torus.volume), rtol=1e-14)


class TestUntilStationary:
    def test_already_stationary(self):
        p = params(lam=1.0, beta=0.7, Omega=5.0)
        res = integrate_until_stationary(p, shear_branch(p))
        assert res.converged and res.T == 0.0 and res.residual <= 1e-5

    def test_loose_tolerance_gives_zero_time(self, rng):
        p = params(lam=1.0)
        u0 = random_field(p.torus, rng)
        r0 = l2_norm(rhs(p, u0))
        T, state = integrate_until_stationary(p, u0, residual_tol=2 * r0)
        assert T == 0.0 and state.allclose(u0, 0)

    def test_crossing_is_refined(self):
        p = params(lam=1.0, beta=0.7, Omega=10.0)
        u0 = SpectralField.from_modes(p.torus, {(1, 0): 5 - 5j})
        res = integrate_until_stationary(p, u0, 1e-5)
        assert res.converged
        assert l2_norm(rhs(p, res.state)) == pytest.approx(1e-5, rel=1e-6)

    def test_tolerance_monotone(self):
        p = params(lam=1.0, beta=0.7, Omega=10.0)
        u0 = SpectralField.from_modes(p.torus, {(1, 0): 5 - 5j})
        T1 = integrate_until_stationary(p, u0, 1e-5).T
        T2 = integrate_until_stationary(p, u0, 2e-5).T
        assert T2 < T1

    def test_t_max_reported(self):
        p = params(lam=1.0, beta=0.7, Omega=10.0)
        u0 = SpectralField.from_modes(p.torus, {(1, 0): 5 - 5j})
        res = integrate_until_stationary(p, u0, 1e-5, t_max=1.0)
        assert not res.converged and res.T == pytest.approx(1.0) and res.residual > 1e-5

    def test_transport_free_residual(self):
        p = params(lam=1.0, beta=0.7, Omega=10.0)
        s = shear_branch(p)
        res = integrate_until_stationary(p, s, 1e-5, t_max=0.5, include_transport=False)
        # the shear state is not a zero of the operator without the transport term
        assert not res.converged
