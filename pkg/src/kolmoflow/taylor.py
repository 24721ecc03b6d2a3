"""
Arbitrary-order Taylor integration of the Galerkin vorticity system.

For the quadratic field dω/dt = B(ω, ω) + Lω + f(t) the time-Taylor
coefficients u_m = ω^{(m)}(t0)/m! obey

    u_{m+1} = (Σ_{j=0..m} B(u_j, u_{m-j}) + L u_m + f_m) / (m + 1),

so a whole jet costs O(p²) bilinear products. Steps are chosen from the
last two coefficients so the truncation term stays below ``tol`` and the
step polynomial doubles as dense output between steps.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .dynamics import (DIRECT_MAX_N, FlowParams, forcing_array, from_physical, grid_size,
                       linear_symbol_array, to_physical)
from .spectral import NormConvention, SpectralField, coefficient_norm, l2_norm, write_field_csv

log = logging.getLogger(__name__)

MACHINE_TOL = 2.22e-16
MIN_STEP = 1e-13


class DivergenceError(RuntimeError):
    """Step size collapsed; the trajectory is blowing up or hopelessly stiff."""

    def __init__(self, message: str, t: float, state: SpectralField):
        super().__init__(message)
        self.t = t
        self.state = state


@dataclass(frozen=True)
class IntegratorConfig:
    order: int = 15
    tol: float = MACHINE_TOL
    safety: float = 0.9
    h_max: float = math.inf
    t_max: float = math.inf
    kernel: str = "auto"

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("Taylor order must be at least 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if self.kernel not in ("auto", "direct", "fft"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclass(frozen=True)
class TaylorJet:
    """Coefficients u_0..u_p of the local Taylor expansion at one time."""

    coefficients: tuple[SpectralField, ...]

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, h: float) -> SpectralField:
        torus = self.coefficients[0].torus
        arr = np.stack([u.coeffs for u in self.coefficients])
        return SpectralField(torus, _horner(arr, h))


def _horner(U: np.ndarray, h: float) -> np.ndarray:
    out = U[-1].copy()
    for m in range(U.shape[0] - 2, -1, -1):
        out = out * h + U[m]
    return out


class _JetEngine:
    """Precomputed tables for fast repeated jets of one parameter set."""

    def __init__(self, params: FlowParams, order: int, autonomous: bool = True, kernel: str = "auto"):
        self.params = params
        self.torus = params.torus
        self.order = order
        self.autonomous = autonomous
        if kernel == "auto":
            kernel = "direct" if params.N <= DIRECT_MAX_N else "fft"
        self.kernel = kernel
        self.lin = linear_symbol_array(params, transport=autonomous).ravel()
        self._forcing = np.zeros((order + 1, self.torus.size), dtype=complex)
        if autonomous:
            self._forcing[0] = forcing_array(params).ravel()
        else:
            m, N, K = params.forcing_mode, params.N, self.torus.K
            self._fidx = (N * K + N + m, N * K + N - m)
            rate = m * params.Omega
            self._frate = np.array([(1j * rate) ** j / math.factorial(j) for j in range(order + 1)])
        if kernel == "direct":
            self._triples = _kernels.interaction_triples(self.torus)
        else:
            kap1, kap2 = self.torus.wavevectors
            inv = self.torus.inv_kappa_sq
            # ω -> (v1, v2, ∂xω, ∂yω)
            self._ops = np.stack([1j * kap2 * inv, -1j * kap1 * inv, 1j * kap1, 1j * kap2])

    def forcing_jet(self, t0: float) -> np.ndarray:
        if self.autonomous:
            return self._forcing
        F = self._forcing
        amp = self.params.lam / 2 * np.exp(1j * self.params.forcing_mode * self.params.Omega * t0)
        F[:, self._fidx[0]] = amp * self._frate
        F[:, self._fidx[1]] = np.conj(F[:, self._fidx[0]])
        return F

    def jet(self, c: np.ndarray, t0: float = 0.0) -> np.ndarray:
        """Jet of the flat state ``c`` as an ``(order + 1, K²)`` array."""
        F = self.forcing_jet(t0)
        if self.kernel == "direct":
            k, p, q, w = self._triples
            return _kernels.direct_jet(c, self.lin, F, k, p, q, w, self.order).T
        return self._jet_fft(c, F)

    def _jet_fft(self, c: np.ndarray, F: np.ndarray) -> np.ndarray:
        torus, p = self.torus, self.order
        U = np.empty((p + 1,) + torus.shape, dtype=complex)
        U[0] = c.reshape(torus.shape)
        lin = self.lin.reshape(torus.shape)
        F = F.reshape((p + 1,) + torus.shape)
        M = grid_size(torus.N)
        G = np.empty((p + 1, 4, M, M))
        for m in range(p):
            G[m] = to_physical(torus, self._ops * U[m])
            prod = np.einsum("jcxy,jcxy->xy", G[:m + 1, :2], G[m::-1, 2:])
            U[m + 1] = (lin * U[m] + F[m] - from_physical(torus, prod)) / (m + 1)
        return U.reshape(p + 1, -1)

    def evaluate(self, U: np.ndarray, h: float) -> np.ndarray:
        if self.kernel == "direct":
            return _kernels.horner(U.T, h)
        return _horner(U, h)

    def derivative(self, U: np.ndarray, h: float) -> np.ndarray:
        """d/dt of the step polynomial at offset h."""
        dU = U[1:] * np.arange(1, U.shape[0])[:, None]
        return _horner(dU, h)


def compute_jet(params: FlowParams, u0: SpectralField, order: int = 15, autonomous: bool = True,
                t0: float = 0.0, kernel: str = "auto") -> TaylorJet:
    """Taylor jet of the mean-flow system (``autonomous``) or of the oscillating-force system at t0."""
    U = _JetEngine(params, order, autonomous, kernel).jet(u0.flat.copy(), t0)
    torus = params.torus
    return TaylorJet(tuple(SpectralField.from_flat(torus, 0.5 * (u + np.conj(u[::-1]))) for u in U))


def _step_size(norm_pm1: float, norm_p: float, order: int, config: IntegratorConfig) -> float:
    cands = []
    if norm_pm1 > 0:
        cands.append((config.tol / norm_pm1) ** (1.0 / (order - 1)))
    if norm_p > 0:
        cands.append((config.tol / norm_p) ** (1.0 / order))
    if not cands:
        return config.h_max
    return min(config.safety * min(cands), config.h_max)


def select_step(jet: TaylorJet, config: IntegratorConfig) -> float:
    """Largest step keeping the two trailing Taylor terms at ``tol``.

    h = min(safety · min((tol/‖u_{p-1}‖)^{1/(p-1)}, (tol/‖u_p‖)^{1/p}), h_max),
    with coefficient-convention norms. Returns ``h_max`` when both trailing
    coefficients vanish (the solution is a polynomial in time).
    """
    p = jet.order
    if p < 2:
        raise ValueError("need a jet of order >= 2")
    return _step_size(l2_norm(jet.coefficients[p - 1]), l2_norm(jet.coefficients[p]), p, config)


def _jet_step_size(U: np.ndarray, config: IntegratorConfig) -> float:
    p = U.shape[0] - 1
    return _step_size(coefficient_norm(U[p - 1]), coefficient_norm(U[p]), p, config)


def step(params: FlowParams, state: SpectralField, t: float, config: IntegratorConfig = IntegratorConfig(),
         autonomous: bool = True) -> tuple[SpectralField, float]:
    """One adaptive Taylor step; returns the new state and the step taken."""
    eng = _JetEngine(params, config.order, autonomous, config.kernel)
    U = eng.jet(state.flat.copy(), t)
    h = _jet_step_size(U, config)
    if h < MIN_STEP:
        raise DivergenceError(f"step size {h:.3e} below {MIN_STEP:g} at t={t}", t, state)
    return SpectralField.from_flat(params.torus, eng.evaluate(U, h)), h


@dataclass
class Trajectory:
    """Sampled norm history of one integration plus its final state."""

    times: np.ndarray
    norms: np.ndarray
    final: SpectralField
    t_final: float
    steps: int
    convention: NormConvention = NormConvention.COEFFICIENT
    snapshots: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "norm"])
            for t, n in zip(self.times, self.norms):
                w.writerow([f"{t:.17g}", f"{n:.17g}"])

    def write_snapshots(self, directory) -> list[Path]:
        """One field CSV per stored snapshot, named by its time."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for t, f in sorted(self.snapshots.items()):
            path = directory / f"snapshot_t{t:.6f}.csv"
            write_field_csv(f, path)
            paths.append(path)
        return paths


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def _norm_factor(params: FlowParams, convention) -> float:
    if NormConvention(convention) is NormConvention.INTEGRAL:
        return math.sqrt(params.torus.volume)
    return 1.0


def integrate(params: FlowParams, u0: SpectralField, t_final: float,
              config: IntegratorConfig = IntegratorConfig(), sample_every: float | None = None,
              autonomous: bool = True, t0: float = 0.0,
              convention: NormConvention | str = NormConvention.COEFFICIENT,
              snapshot_times: Sequence[float] = ()) -> Trajectory:
    """Integrate from ``t0`` to ``t_final`` recording ‖ω(t)‖ every ``sample_every``.

    Samples are read off the step polynomials, so the step sequence does not
    depend on the sampling cadence. The last step is shortened to land on
    ``t_final``.
    """
    if not t_final > t0:
        raise ValueError("t_final must exceed the start time")
    eng = _JetEngine(params, config.order, autonomous, config.kernel)
    fac = _norm_factor(params, convention)
    c = u0.flat.copy()
    t = t0
    if sample_every is None:
        sample_every = t_final - t0
    sample_ts = list(np.arange(t0, t_final, sample_every)) + [t_final]
    snap_ts = sorted(float(s) for s in snapshot_times)
    times, norms, snaps = [], [], {}
    si = 0
    steps = 0
    while True:
        U = eng.jet(c, t)
        h = _jet_step_size(U, config)
        if h < MIN_STEP:
            raise DivergenceError(f"step size {h:.3e} below {MIN_STEP:g} at t={t}", t,
                                  SpectralField.from_flat(params.torus, c))
        last = t + h >= t_final
        if last:
            h = t_final - t
        t_end = t_final if last else t + h
        while si < len(sample_ts) and sample_ts[si] <= t_end:
            times.append(sample_ts[si])
            norms.append(fac * coefficient_norm(eng.evaluate(U, sample_ts[si] - t)))
            si += 1
        while snap_ts and snap_ts[0] <= t_end:
            ts = snap_ts.pop(0)
            snaps[ts] = SpectralField.from_flat(params.torus, _hermitian(eng.evaluate(U, ts - t)))
        c = eng.evaluate(U, h)
        steps += 1
        if last:
            break
        t = t_end
    c = _hermitian(c)
    log.debug("integrated to t=%g in %d steps", t_final, steps)
    return Trajectory(np.array(times), np.array(norms), SpectralField.from_flat(params.torus, c),
                      t_final, steps, NormConvention(convention), snaps)


def _hermitian(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(c[::-1]))


@dataclass
class StationarityResult:
    """Outcome of :func:`integrate_until_stationary`."""

    T: float
    state: SpectralField
    residual: float
    converged: bool
    steps: int

    def __iter__(self):
        return iter((self.T, self.state))


def integrate_until_stationary(params: FlowParams, u0: SpectralField, residual_tol: float = 1e-5,
                               t_max: float = 1e3, config: IntegratorConfig = IntegratorConfig(),
                               include_transport: bool = True,
                               convention: NormConvention | str = NormConvention.COEFFICIENT,
                               ) -> StationarityResult:
    """Integrate until the stationary residual drops to ``residual_tol``.

    The residual is the full stationary operator (mean-flow transport
    included) unless ``include_transport`` is false. The crossing time is
    refined inside the final step by bisection on the step polynomial.
    """
    if not residual_tol > 0:
        raise ValueError("residual_tol must be positive")
    eng = _JetEngine(params, config.order, True, config.kernel)
    fac = _norm_factor(params, convention)
    transport = None if include_transport else (1j * params.Omega * params.torus.indices[1]).ravel()

    def residual_of(dc, c):
        r = dc if transport is None else dc + transport * c
        return fac * coefficient_norm(r)

    c = u0.flat.copy()
    t = 0.0
    steps = 0
    prev = None
    while True:
        U = eng.jet(c, t)
        r = residual_of(U[1], U[0])
        if r <= residual_tol:
            T = t
            if prev is not None:
                T, c = _refine_crossing(eng, prev, residual_of, residual_tol, c)
            return StationarityResult(T, SpectralField.from_flat(params.torus, _hermitian(c)),
                                      r, True, steps)
        if t >= t_max:
            return StationarityResult(t, SpectralField.from_flat(params.torus, _hermitian(c)),
                                      r, False, steps)
        h = _jet_step_size(U, config)
        if h < MIN_STEP:
            raise DivergenceError(f"step size {h:.3e} below {MIN_STEP:g} at t={t}", t,
                                  SpectralField.from_flat(params.torus, c))
        h = min(h, t_max - t)
        prev = (t, h, U)
        c = eng.evaluate(U, h)
        t = t + h
        steps += 1


def _refine_crossing(eng, prev, residual_of, tol, c_end):
    t0, h, U = prev
    lo, hi = 0.0, h
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if residual_of(eng.derivative(U, mid), eng.evaluate(U, mid)) <= tol:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * max(1.0, t0):
            break
    if hi >= h:
        return t0 + h, c_end
    return t0 + hi, eng.evaluate(U, hi)
