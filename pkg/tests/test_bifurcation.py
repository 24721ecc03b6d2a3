"""Critical forcing on the shear branch, Ω sweeps, fits and truncation gaps."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kolmoflow.bifurcation import (
    BracketError,
    FitResult,
    critical_lambda,
    find_bracket,
    growth_rate,
    quadratic_fit,
    reynolds,
    sweep_omega,
    truncation_gap,
    write_sweep_csv,
)
from kolmoflow.dynamics import ConfigurationError, FlowParams
from kolmoflow.spectral import TorusSpec


def params(eps=1.0, alpha=0.0, lam=1.0, Omega=0.0, beta=0.7, N=5, m=1):
    return FlowParams(eps, alpha, lam, Omega, TorusSpec(beta, N), m)


@pytest.fixture(scope="module")
def sweep():
    return sweep_omega(params(), np.arange(0, 21, 4.0))


class TestReynolds:
    def test_unit(self):
        assert reynolds(params(lam=1.0, beta=1.0)) == 1.0

    def test_example(self):
        assert reynolds(params(lam=100.0)) == pytest.approx(291.5451895043732, rel=1e-14)

    def test_eps_scaling(self):
        p = params(lam=3.0, alpha=0.1)
        assert reynolds(p.replace(epsilon=2.0)) == pytest.approx(reynolds(p) / 4, rel=1e-15)

    def test_undefined_without_viscosity(self):
        with pytest.raises(ConfigurationError):
            reynolds(params(eps=0.0, alpha=0.5))


class TestQuadraticFit:
    def test_interpolates_exact_quadratic(self):
        fit = quadratic_fit([(w, 1 * w * w + 2 * w + 3) for w in (0.0, 1.5, 4.0, 7.0)])
        assert (fit.c2, fit.c1, fit.c0) == pytest.approx((1, 2, 3), abs=1e-12)
        assert fit.rms_residual <= 1e-12

    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.floats(-100, 100))
    def test_constant_shift_moves_only_c0(self, noise, shift):
        om = np.arange(5.0)
        pts = [(w, 0.9 * w * w + n) for w, n in zip(om, noise)]
        a = quadratic_fit(pts)
        b = quadratic_fit([(w, y + shift) for w, y in pts])
        assert b.c2 == pytest.approx(a.c2, abs=1e-9)
        assert b.c1 == pytest.approx(a.c1, abs=1e-9)
        assert b.c0 == pytest.approx(a.c0 + shift, abs=1e-9)
        assert b.rms_residual == pytest.approx(a.rms_residual, abs=1e-9)

    def test_rank_deficient(self):
        with pytest.raises(np.linalg.LinAlgError):
            quadratic_fit([(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            quadratic_fit([(0.0, 1.0), (1.0, 2.0)])

    def test_evaluation_and_csv(self, tmp_path):
        fit = FitResult(2.0, 0.5, 1.0, 0.25)
        assert fit(2.0) == 10.0
        fit.to_csv(tmp_path / "fit.csv")
        assert (tmp_path / "fit.csv").read_text().splitlines() == ["c2,c1,c0,rms", "2,0.5,1,0.25"]


class TestCriticalLambda:
    def test_bracket_is_certified(self):
        p = params()
        res = critical_lambda(p, (5.0, 50.0))
        assert res.certified and res.lambda0 > 0
        lo, hi = res.bracket
        assert lo < res.lambda0 < hi and (hi - lo) <= 1e-4 * hi
        assert growth_rate(p, lo) == res.eig_lo < 0 < res.eig_hi == growth_rate(p, hi)

    def test_norm_at_crit_is_shear_norm(self):
        res = critical_lambda(params(), (5.0, 50.0))
        # Ω = 0, m = 1: |a_(0,1)| = (λ/2) β², two conjugate coefficients
        assert res.norm_at_crit == pytest.approx(res.lambda0 * 0.49 / np.sqrt(2), rel=1e-14)

    def test_non_straddling_bracket(self):
        with pytest.raises(BracketError) as info:
            critical_lambda(params(), (1.0, 2.0))
        assert info.value.eig_lo < 0 and info.value.eig_hi < 0

    @pytest.mark.parametrize("lam_hi", [10.0, 1e3, 1e5])
    def test_square_torus_never_crosses(self, lam_hi):
        with pytest.raises(BracketError):
            critical_lambda(params(beta=1.0), (0.1, lam_hi))

    def test_square_torus_bracket_search_fails(self):
        with pytest.raises(BracketError):
            find_bracket(params(beta=1.0, N=3), 1.0, max_expand=12)

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            critical_lambda(params(), (5.0, 1.0))

    @pytest.mark.xfail(strict=True, reason="this model's critical forcing at beta=0.7 is about 12.5, not 1")
    def test_reference_value_at_rest(self):
        p = params()
        assert critical_lambda(p, find_bracket(p, 1.0)).lambda0 == pytest.approx(1.0, rel=0.1)

    @pytest.mark.xfail(strict=True, reason="this model's critical forcing at Omega=10 is about 196, not 90.9")
    def test_reference_value_at_ten(self):
        p = params(Omega=10.0)
        assert critical_lambda(p, find_bracket(p, 90.0)).lambda0 == pytest.approx(90.9, rel=0.05)


class TestSweep:
    def test_single_point_matches_direct(self):
        p = params()
        [res] = sweep_omega(p, [0.0])
        direct = critical_lambda(p, find_bracket(p, 10.0))
        assert res.lambda0 == direct.lambda0

    def test_increasing_and_certified(self, sweep):
        assert all(r.certified for r in sweep)
        lam = [r.lambda0 for r in sweep]
        assert all(b > a for a, b in zip(lam, lam[1:]))

    def test_quadratic_growth(self, sweep):
        assert all(r.lambda0 >= 0.85 * r.Omega**2 for r in sweep)

    def test_norm_at_crit_nearly_linear(self, sweep):
        om = np.array([r.Omega for r in sweep])
        nrm = np.array([r.norm_at_crit for r in sweep])
        tail = om >= 8
        A = np.column_stack([om[tail], np.ones(tail.sum())])
        coef, res, *_ = np.linalg.lstsq(A, nrm[tail], rcond=None)
        r2 = 1 - res[0] / np.sum((nrm[tail] - nrm[tail].mean()) ** 2)
        assert coef[0] > 0 and r2 > 0.99

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            sweep_omega(params(), [2.0, 1.0])

    def test_error_tagged_with_omega(self):
        with pytest.raises(BracketError) as info:
            sweep_omega(params(beta=1.0, N=3), [0.0, 5.0])
        assert info.value.Omega == 0.0
        assert "Omega=0" in str(info.value)

    def test_stabilization_is_monotone_in_omega(self):
        p = params(lam=50.0)
        rates = [growth_rate(p.replace(Omega=w), 50.0) for w in np.linspace(0, 10, 11)]
        assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))

    def test_csv(self, sweep, tmp_path):
        write_sweep_csv(sweep, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "omega,lambda0,norm_at_crit,N" and len(lines) == 1 + len(sweep)
        assert float(lines[1].split(",")[1]) == sweep[0].lambda0


class TestTruncationGap:
    def test_same_truncation(self):
        assert truncation_gap(params(), 4.0, 5, 5) == 0.0

    @pytest.mark.parametrize("Omega", [0.0, 6.0, 20.0])
    def test_small_and_nearly_symmetric(self, Omega):
        e35 = truncation_gap(params(), Omega, 3, 5)
        e53 = truncation_gap(params(), Omega, 5, 3)
        assert e35 <= 4e-4
        assert abs(e35 - e53) <= 1.01 * e35**2 + 1e-13

    def test_higher_truncations_converged(self):
        assert truncation_gap(params(), 10.0, 5, 7) <= 1e-6
