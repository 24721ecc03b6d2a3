"""
Stationary solutions of the mean-flow system and their linear stability.

The shear (x-independent) branch is known in closed form because advection
vanishes on shear states. Other stationary states are found by Newton's
method with a dense LU factorisation of the real Jacobian.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import ConfigurationError, FlowParams, jacobian_dense, rhs
from .spectral import NormConvention, SpectralField, coefficient_norm, field_shift, l2_norm


class BifurcationPointError(ArithmeticError):
    """Newton hit a (numerically) singular Jacobian."""


class EigenSolverError(ArithmeticError):
    pass


def residual(params: FlowParams, omega: SpectralField) -> SpectralField:
    """Stationary residual; equals dω/dt, so it vanishes exactly at equilibria."""
    return rhs(params, omega)


def shear_branch(params: FlowParams) -> SpectralField:
    """Closed-form shear equilibrium a_(0,m) = (λ/2) / (ε m²/β² + α + iΩm)."""
    m = params.forcing_mode
    denom = params.epsilon * m * m / params.beta**2 + params.alpha + 1j * params.Omega * m
    if denom == 0:
        raise ConfigurationError("shear branch undefined for epsilon = alpha = Omega = 0")
    return SpectralField.from_modes(params.torus, {(0, m): (params.lam / 2) / denom})


@dataclass
class NewtonReport:
    solution: SpectralField
    residual_norms: list[float]
    iterations: int
    converged: bool
    drift: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "residual"])
            for i, r in enumerate(self.residual_norms):
                w.writerow([i, f"{r:.17g}"])


def _x_derivative(omega: SpectralField) -> SpectralField:
    kap1, _ = omega.torus.wavevectors
    return SpectralField(omega.torus, 1j * kap1 * omega.coeffs)


def newton_solve(params: FlowParams, guess: SpectralField, tol: float = 1e-10, max_iter: int = 30,
                 pin_phase: bool | None = None) -> NewtonReport:
    """Newton iteration for rhs(ω) = 0.

    Off the shear branch every equilibrium comes with a circle of
    x-translates, which makes the Jacobian singular. With ``pin_phase`` the
    guess is translated so that a_(1,0) is real and positive, the condition
    Im a_(1,0) = 0 is appended, and a drift speed c is solved for in
    rhs(ω) - c ∂xω = 0 to keep the system square (c → 0 for true equilibria).
    The default pins whenever the guess has |a_(1,0)| > 1e-8.

    Raises:
        BifurcationPointError: if an LU pivot falls below 1e-14·‖J‖.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    torus = params.torus
    a10 = guess[(1, 0)]
    if pin_phase is None:
        pin_phase = abs(a10) > 1e-8
    if pin_phase:
        if abs(a10) == 0:
            raise ValueError("cannot pin the phase of a zero a_(1,0) coefficient")
        guess = field_shift(guess, (-np.angle(a10), 0.0))
        pin_row = 2 * (torus.flat_index((1, 0)) - torus.center - 1) + 1
    x = guess.to_real_vector()
    drift = 0.0
    norms: list[float] = []
    converged = False
    it = 0
    while True:
        omega = SpectralField.from_real_vector(torus, x)
        r = rhs(params, omega)
        # near the shear branch ∂xω vanishes and the bordered system degenerates
        bordered = False
        if pin_phase:
            dx = _x_derivative(omega)
            bordered = coefficient_norm(dx.flat) > 1e-8 * max(1.0, coefficient_norm(omega.flat))
            if not bordered:
                drift = 0.0
            r = r - drift * dx
        rn = l2_norm(r)
        if bordered:
            rn = float(np.hypot(rn, x[pin_row]))
        norms.append(rn)
        if rn <= tol:
            converged = True
            break
        if it >= max_iter or not np.isfinite(rn):
            break
        J = jacobian_dense(params, omega)
        F = r.to_real_vector()
        if bordered:
            n = J.shape[0]
            Jb = np.zeros((n + 1, n + 1))
            Jb[:n, :n] = J - drift * _x_derivative_matrix(torus)
            Jb[:n, n] = -dx.to_real_vector()
            Jb[n, pin_row] = 1.0
            J = Jb
            F = np.append(F, x[pin_row])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
        if np.min(np.abs(np.diag(lu))) < 1e-14 * np.linalg.norm(J, np.inf):
            raise BifurcationPointError("Jacobian is singular: at a bifurcation point")
        delta = scipy.linalg.lu_solve((lu, piv), -F)
        if bordered:
            drift += delta[-1]
            delta = delta[:-1]
        x = x + delta
        it += 1
    return NewtonReport(SpectralField.from_real_vector(torus, x), norms, it, converged, drift)


def _x_derivative_matrix(torus) -> np.ndarray:
    """Real-coordinate matrix of ∂x: each mode's (re, im) pair is rotated by iκ1."""
    k1 = torus.half_modes[:, 0].astype(float)
    n = 2 * k1.size
    D = np.zeros((n, n))
    idx = np.arange(k1.size)
    D[2 * idx, 2 * idx + 1] = -k1
    D[2 * idx + 1, 2 * idx] = k1
    return D


@dataclass
class StabilityReport:
    """Rightmost Jacobian eigenvalue at a base state and its order parameter |a_(1,0)|."""

    rightmost: complex
    a10: float
    vector: np.ndarray | None = field(default=None, repr=False)
    spectrum: np.ndarray | None = field(default=None, repr=False)

    @property
    def stable(self) -> bool:
        return self.rightmost.real < 0

    def sector_weights(self, torus) -> dict[int, float]:
        """Share of the rightmost eigenvector's energy in each |k1| sector."""
        if self.vector is None:
            raise ValueError("no eigenvector stored")
        k1 = np.repeat(np.abs(torus.half_modes[:, 0]), 2)
        w = np.abs(self.vector) ** 2
        w = w / w.sum()
        return {int(s): float(w[k1 == s].sum()) for s in np.unique(k1)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "a10"])
            w.writerow([f"{self.rightmost.real:.17g}", f"{self.rightmost.imag:.17g}", f"{self.a10:.17g}"])


def spectrum(params: FlowParams, base: SpectralField) -> np.ndarray:
    """All eigenvalues of the real Jacobian at ``base``."""
    return scipy.linalg.eigvals(jacobian_dense(params, base), check_finite=False)


def rightmost_eigenvalue(params: FlowParams, base: SpectralField, vectors: bool = False) -> StabilityReport:
    """Eigenvalue of maximal real part from a dense (LAPACK QR) eigensolve."""
    J = jacobian_dense(params, base)
    try:
        if vectors:
            w, v = scipy.linalg.eig(J, check_finite=False)
        else:
            w, v = scipy.linalg.eigvals(J, check_finite=False), None
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenSolverError("eigensolver returned non-finite eigenvalues")
    i = int(np.argmax(w.real))
    return StabilityReport(complex(w[i]), abs(base[(1, 0)]),
                           None if v is None else v[:, i], w)


def shear_norm(params: FlowParams, convention: NormConvention | str = NormConvention.COEFFICIENT) -> float:
    return l2_norm(shear_branch(params), convention)


def branch_switch_guess(params: FlowParams, amplitude: float) -> SpectralField:
    """Shear state perturbed along the rightmost eigenvector, scaled so |a_(1,0)| = amplitude.

    A single-mode perturbation is useless here because Newton removes it in
    one exact linear step; the eigenvector carries the coupled sidebands.
    """
    base = shear_branch(params)
    rep = rightmost_eigenvalue(params, base, vectors=True)
    v = SpectralField.from_real_vector(params.torus, np.real(rep.vector))
    a10 = abs(v[(1, 0)])
    if a10 == 0:
        raise ValueError("rightmost eigenvector does not touch the (1, 0) mode")
    return base + v * (amplitude / a10)
