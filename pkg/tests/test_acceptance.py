"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test prints one ``criterion N: PASS|FAIL ...`` line to the terminal,
also when pytest captures output.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import random_field
from kolmoflow.dynamics import FlowParams, advection, jacobian_dense, linear_symbol, rhs
from kolmoflow.experiments import ExperimentConfig, run
from kolmoflow.spectral import SpectralField, TorusSpec, coefficient_norm, velocity_from_vorticity
from kolmoflow.stationary import newton_solve, shear_branch
from kolmoflow.taylor import IntegratorConfig, step


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str, wall: float, budget: float):
        timed_ok = ok and wall < budget
        status = "PASS" if timed_ok else "FAIL"
        with capsys.disabled():
            print(f"\ncriterion {n}: {status} {detail} [{wall:.1f}s / {budget:g}s]")
        return timed_ok
    return emit


def run_default(experiment, tmp_path):
    cfg = ExperimentConfig.default(experiment).with_overrides(out=str(tmp_path / experiment))
    start = time.perf_counter()
    res = run(cfg)
    return res, time.perf_counter() - start


def test_criterion_1_shear_oracle(report):
    start = time.perf_counter()
    dissipation = [(1.0, 0.0, 1), (0.5, 0.2, 2), (0.0, 0.5, 1)]   # (ε, α, m)
    geometry = [(0.6, 2.0), (0.75, 10.0), (1.0, 50.0)]           # (β, λ)
    worst, failures = 0.0, []
    for (eps, alpha, m), (beta, lam), Omega in itertools.product(dissipation, geometry, (0.0, 100.0)):
        p = FlowParams(eps, alpha, lam, Omega, TorusSpec(beta, 7), m)
        exact = shear_branch(p)
        for seed in range(10):
            guess = exact + random_field(p.torus, np.random.default_rng(seed), 1e-3)
            rep = newton_solve(p, guess, tol=1e-12, pin_phase=False)
            err = coefficient_norm(rep.solution.flat - exact.flat)
            worst = max(worst, err)
            if not rep.converged or err > 1e-10:
                failures.append((eps, alpha, m, beta, lam, Omega, seed, err))
    wall = time.perf_counter() - start
    ok = report(1, not failures, f"180 solves, worst error {worst:.2e} (<= 1e-10)", wall, 10)
    assert ok, failures[:5]


def test_criterion_2_quadratic_fit(report, tmp_path):
    res, wall = run_default("bifurcate", tmp_path)
    m = res.metrics
    detail = (f"c2={m['c2']:.5f} (need [0.853, 0.943]), c0={m['c0']:.4f} (need [0.8, 1.2]), "
              f"c1={m['c1']:.4f}, rms={m['rms']:.4f}")
    ok = report(2, bool(res.passed), detail, wall, 300)
    assert ok, detail


def test_criterion_3_truncation_gap(report, tmp_path):
    res, wall = run_default("gap", tmp_path)
    m = res.metrics
    detail = (f"max E={m['E_max']:.3e} (<= 4e-4: {m['max_ok']}), "
              f"variation for Omega>=10 = {m['tail_variation']:.2f} of mean (<= 0.5: {m['flat_ok']})")
    ok = report(3, bool(res.passed), detail, wall, 120)
    assert ok, detail


def test_criterion_4_stabilization(report, tmp_path):
    res, wall = run_default("stabilize", tmp_path)
    m = res.metrics
    if m["a_mode"] == "calibrated":
        a_detail = f"calibrated on {m['calibration']}"
    else:
        a_detail = (f"no convention calibrates IC II; fallback found {m['low_distinct_stationary']} stationary "
                    f"+ {m['low_periodic']} periodic (need 3 + 1), kinds {m['low_kinds']}")
    detail = (f"(a) {'PASS' if m['a_pass'] else 'FAIL'}: {a_detail}; "
              f"(b) {'PASS' if m['b_pass'] else 'FAIL'}: pairwise {m['high_pairwise_rel']:.2e} (<= 1e-3)")
    ok = report(4, bool(res.passed), detail, wall, 1800)
    assert ok, detail


def test_criterion_5_attraction_time(report, tmp_path):
    res, wall = run_default("convergence_time", tmp_path)
    m = res.metrics
    detail = f"R^2={m['r2']:.6f} (>= 0.95), slope={m['slope']:.3f} per decade, all converged={m['all_converged']}"
    ok = report(5, bool(res.passed), detail, wall, 300)
    assert ok, detail


def test_criterion_6_decay_rate(report, tmp_path):
    res, wall = run_default("decay_rate", tmp_path)
    m = res.metrics
    detail = ", ".join(f"alpha={a}: rate {r:.3f} vs 0.9*floor {0.9 * m['floors'][a]:.3f}"
                       for a, r in m["rates"].items())
    ok = report(6, bool(res.passed), detail, wall, 600)
    assert ok, detail


def test_criterion_7_galilean(report, tmp_path):
    res, wall = run_default("galilean", tmp_path)
    detail = f"max discrepancy {res.metrics['max_discrepancy']:.2e} (<= 1e-8)"
    ok = report(7, bool(res.passed), detail, wall, 60)
    assert ok, detail


def test_criterion_8_proposition(report, tmp_path):
    res, wall = run_default("toy", tmp_path)
    m = res.metrics
    detail = (f"C1 max {max(m['C1'].values()):.4f} (<= 3), mode defect {m['mode_defect']:.1e} (<= 1e-12), "
              f"tail ratios {', '.join(f'{r:.3f}' for r in m['tail_ratio'].values())} (0.5 +- 10%)")
    ok = report(8, bool(res.passed), detail, wall, 1)
    assert ok, detail


def test_criterion_9_kernel_invariants(report):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = {"enstrophy": 0.0, "jacobian": 0.0, "roundtrip": 0.0, "taylor": 0.0}
    cfg = IntegratorConfig()
    for _ in range(100):
        torus = TorusSpec(float(rng.uniform(0.4, 1.6)), int(rng.integers(1, 8)))
        omega = random_field(torus, rng)
        # enstrophy neutrality of the advection term
        inner = np.sum(np.real(np.conj(omega.coeffs) * advection(omega).coeffs))
        worst["enstrophy"] = max(worst["enstrophy"], abs(inner) / np.sum(np.abs(omega.coeffs) ** 2))
        # curl of the recovered velocity
        v = velocity_from_vorticity(omega)
        worst["roundtrip"] = max(worst["roundtrip"], np.abs(v.curl() - omega.coeffs).max() / np.abs(omega.coeffs).max())
        # Jacobian against central differences
        p = FlowParams(1.0, float(rng.uniform(0, 1)), float(rng.uniform(0, 50)), float(rng.uniform(0, 100)),
                       TorusSpec(torus.beta, min(torus.N, 4)), 1)
        base, delta = random_field(p.torus, rng), random_field(p.torus, rng)
        h = 1e-5
        fd = (rhs(p, base + h * delta).to_real_vector() - rhs(p, base - h * delta).to_real_vector()) / (2 * h)
        lin = jacobian_dense(p, base) @ delta.to_real_vector()
        worst["jacobian"] = max(worst["jacobian"], np.abs(fd - lin).max() / max(1.0, np.abs(lin).max()))
        # one Taylor step on an advection-free mode against the exponential
        q = p.replace(lam=0.0)
        k = (0, int(rng.integers(1, q.N + 1))) if rng.random() < 0.5 else (int(rng.integers(1, q.N + 1)), 0)
        a = complex(*rng.normal(size=2))
        new, hstep = step(q, SpectralField.from_modes(q.torus, {k: a}), 0.0, cfg)
        exact = a * np.exp(linear_symbol(q, k) * hstep)
        worst["taylor"] = max(worst["taylor"], abs(new[k] - exact) / (cfg.tol * abs(exact)))
    wall = time.perf_counter() - start
    limits = {"enstrophy": 1e-12, "jacobian": 1e-6, "roundtrip": 1e-14, "taylor": 10.0}
    ok = all(worst[k] <= limits[k] for k in limits)
    detail = ", ".join(f"{k} {worst[k]:.1e} (<= {limits[k]:g})" for k in limits)
    ok = report(9, ok, detail + " over 100 cases each", wall, 30)
    assert ok, detail
