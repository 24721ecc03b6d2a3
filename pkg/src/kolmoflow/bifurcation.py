"""
Pitchfork detection on the shear branch.

The shear state is closed-form in λ, so the critical forcing λ₀ is located by
bisecting on the sign of the rightmost Jacobian eigenvalue there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import ConfigurationError, FlowParams
from .spectral import NormConvention, l2_norm
from .stationary import rightmost_eigenvalue, shear_branch


class BracketError(ValueError):
    """The supplied λ interval does not straddle a stability change."""

    def __init__(self, message: str, lo: float, hi: float, eig_lo: float, eig_hi: float, Omega: float | None = None):
        super().__init__(f"{message}: λ∈[{lo:g}, {hi:g}], Re μ = ({eig_lo:.3e}, {eig_hi:.3e})")
        self.lo, self.hi = lo, hi
        self.eig_lo, self.eig_hi = eig_lo, eig_hi
        self.Omega = Omega


@dataclass(frozen=True)
class BifurcationResult:
    """Critical forcing at one Ω together with its certifying bracket."""

    Omega: float
    lambda0: float
    norm_at_crit: float
    N: int
    bracket: tuple[float, float]
    eig_lo: float
    eig_hi: float
    convention: str = NormConvention.COEFFICIENT.value

    @property
    def certified(self) -> bool:
        return self.eig_lo < 0 < self.eig_hi


@dataclass(frozen=True)
class FitResult:
    c2: float
    c1: float
    c0: float
    rms_residual: float

    def __call__(self, Omega):
        Omega = np.asarray(Omega, dtype=float)
        return self.c2 * Omega**2 + self.c1 * Omega + self.c0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["c2", "c1", "c0", "rms"])
            w.writerow([f"{v:.17g}" for v in (self.c2, self.c1, self.c0, self.rms_residual)])


def growth_rate(params: FlowParams, lam: float) -> float:
    """Real part of the rightmost eigenvalue at the shear state with forcing ``lam``."""
    p = params.replace(lam=lam)
    return rightmost_eigenvalue(p, shear_branch(p)).rightmost.real


def critical_lambda(params_base: FlowParams, bracket: tuple[float, float], tol_rel: float = 1e-4,
                    convention: NormConvention | str = NormConvention.COEFFICIENT) -> BifurcationResult:
    """Bisect for the λ at which the shear state loses stability.

    ``params_base.lam`` is ignored. The returned bracket is the final one, so
    its endpoint growth rates certify the crossing.

    Raises:
        BracketError: if the growth rate does not change sign from negative
            to positive across ``bracket``.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    if not tol_rel > 0:
        raise ValueError("tol_rel must be positive")
    g_lo, g_hi = growth_rate(params_base, lo), growth_rate(params_base, hi)
    if not (g_lo < 0 < g_hi):
        raise BracketError("no stability change in bracket", lo, hi, g_lo, g_hi, params_base.Omega)
    while (hi - lo) > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        g = growth_rate(params_base, mid)
        if g < 0:
            lo, g_lo = mid, g
        else:
            hi, g_hi = mid, g
    lam0 = 0.5 * (lo + hi)
    norm = l2_norm(shear_branch(params_base.replace(lam=lam0)), convention)
    return BifurcationResult(params_base.Omega, lam0, norm, params_base.N, (lo, hi), g_lo, g_hi,
                             NormConvention(convention).value)


def find_bracket(params_base: FlowParams, guess: float, factor: float = 2.0,
                 max_expand: int = 40) -> tuple[float, float]:
    """Grow an interval geometrically around ``guess`` until it straddles the crossing."""
    if not guess > 0 or not factor > 1:
        raise ValueError("guess must be positive and factor > 1")
    lo = hi = float(guess)
    g_lo = g_hi = growth_rate(params_base, guess)
    for _ in range(max_expand):
        if g_lo < 0 < g_hi:
            return lo, hi
        if g_hi <= 0:
            lo, g_lo = hi, g_hi
            hi *= factor
            g_hi = growth_rate(params_base, hi)
        else:
            hi, g_hi = lo, g_lo
            lo /= factor
            g_lo = growth_rate(params_base, lo)
    raise BracketError("bracket expansion exhausted", lo, hi, g_lo, g_hi, params_base.Omega)


def sweep_omega(params_base: FlowParams, omegas: Sequence[float], N: int | None = None,
                tol_rel: float = 1e-4, initial_guess: float = 10.0,
                convention: NormConvention | str = NormConvention.COEFFICIENT) -> list[BifurcationResult]:
    """λ₀ for each Ω, warm-starting every bracket from the previous λ₀."""
    omegas = [float(w) for w in omegas]
    if not omegas:
        raise ValueError("omegas must be non-empty")
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omegas must be strictly increasing")
    base = params_base if N is None else params_base.replace(N=N)
    results: list[BifurcationResult] = []
    guess = initial_guess
    for Om in omegas:
        p = base.replace(Omega=Om)
        try:
            res = critical_lambda(p, find_bracket(p, guess), tol_rel, convention)
        except BracketError as exc:
            exc.Omega = Om
            exc.args = (f"Omega={Om:g}: {exc.args[0]}",)
            raise
        results.append(res)
        guess = res.lambda0
    return results


def quadratic_fit(points: Iterable[tuple[float, float]]) -> FitResult:
    """Least-squares fit λ₀ ≈ c2 Ω² + c1 Ω + c0."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (Omega, lambda0) points")
    Om, lam = pts[:, 0], pts[:, 1]
    A = np.column_stack([Om**2, Om, np.ones_like(Om)])
    coef, _, rank, _ = np.linalg.lstsq(A, lam, rcond=None)
    if rank < 3:
        raise np.linalg.LinAlgError("rank-deficient design: need three distinct Omega values")
    rms = float(np.sqrt(np.mean((A @ coef - lam) ** 2)))
    return FitResult(float(coef[0]), float(coef[1]), float(coef[2]), rms)


def truncation_gap(params_base: FlowParams, Omega: float, N: int, M: int, tol_rel: float = 1e-10,
                   initial_guess: float = 10.0) -> float:
    """E(Ω, N, M) = |λ₀(Ω, N) − λ₀(Ω, M)| / λ₀(Ω, N).

    The bisection tolerance defaults far below the gap sizes of interest.
    """
    if N == M:
        return 0.0
    lam = []
    for n in (N, M):
        p = params_base.replace(N=n, Omega=Omega)
        lam.append(critical_lambda(p, find_bracket(p, initial_guess), tol_rel).lambda0)
    return abs((lam[0] - lam[1]) / lam[0])


def reynolds(params: FlowParams) -> float:
    """Re = λ / (ε² β³)."""
    if params.epsilon == 0:
        raise ConfigurationError("Reynolds number undefined for epsilon = 0 (damped Euler regime)")
    return params.lam / (params.epsilon**2 * params.beta**3)


def write_sweep_csv(results: Sequence[BifurcationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "lambda0", "norm_at_crit", "N"])
        for r in results:
            w.writerow([f"{r.Omega:.17g}", f"{r.lambda0:.17g}", f"{r.norm_at_crit:.17g}", r.N])
