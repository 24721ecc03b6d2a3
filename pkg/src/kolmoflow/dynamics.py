"""
Right-hand side of the Galerkin-truncated vorticity equation

    ω_t + (v + βΩ ê2)·∇ω - εΔω + αω = λ cos(m y/β)

and of its oscillating-force twin (no mean-flow transport, forcing
λ cos(m y/β + mΩt)), plus the dense real Jacobian.

The only nonlinear kernel is the bilinear advection B(a, b) = -v(a)·∇b.
In coefficient space

    B(a, b)_k = Σ_{p+q=k} C(p, q) a_p b_q,   C(p, q) = (κ2(p)κ1(q) - κ1(p)κ2(q)) / |κ(p)|²,

summed over |p|∞, |q|∞, |k|∞ ≤ N. Two evaluation routes are provided:
direct 2D convolution, and a pseudo-spectral product on a grid of
M ≥ 3N + 1 points per side, which is alias-free for this truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.signal import convolve2d

from .spectral import SpectralField, TorusSpec, field_shift, velocity_coeffs


class ConfigurationError(ValueError):
    """Inconsistent physical or numerical parameters."""


@dataclass(frozen=True)
class FlowParams:
    """Parameters of the forced vorticity equation.

    Attributes:
        epsilon: viscosity ε ≥ 0.
        alpha: linear damping α ≥ 0.
        lam: forcing amplitude λ.
        Omega: mean-flow speed / oscillation rate Ω ≥ 0.
        torus: aspect ratio β and truncation N.
        forcing_mode: m in λ cos(m y/β).
    """

    epsilon: float
    alpha: float
    lam: float
    Omega: float
    torus: TorusSpec
    forcing_mode: int = 1

    def __post_init__(self):
        if self.epsilon < 0 or self.alpha < 0:
            raise ConfigurationError("epsilon and alpha must be non-negative")
        if not max(self.epsilon, self.alpha) > 0:
            raise ConfigurationError("need max(epsilon, alpha) > 0")
        if self.Omega < 0:
            raise ConfigurationError("Omega must be non-negative")
        if self.forcing_mode < 1:
            raise ConfigurationError("forcing_mode must be a positive integer")
        if self.forcing_mode > self.torus.N:
            raise ConfigurationError(
                f"forcing mode {self.forcing_mode} exceeds truncation N={self.torus.N}")

    @property
    def beta(self) -> float:
        return self.torus.beta

    @property
    def N(self) -> int:
        return self.torus.N

    def replace(self, **changes) -> "FlowParams":
        if "beta" in changes or "N" in changes:
            torus = TorusSpec(changes.pop("beta", self.torus.beta), changes.pop("N", self.torus.N))
            changes["torus"] = torus
        return replace(self, **changes)


# -- linear part and forcing ------------------------------------------------

def linear_symbol(params: FlowParams, k: tuple[int, int]) -> complex:
    """L(k) = -ε|κ(k)|² - α - iΩk2."""
    if tuple(k) == (0, 0):
        raise ValueError("linear symbol is not defined on the mean mode")
    kap_sq = k[0] ** 2 + (k[1] / params.beta) ** 2
    return complex(-params.epsilon * kap_sq - params.alpha, -params.Omega * k[1])


def linear_symbol_array(params: FlowParams, transport: bool = True) -> np.ndarray:
    """L(k) on the full (K, K) index box, zero at the mean mode."""
    k1, k2 = params.torus.indices
    L = -params.epsilon * params.torus.kappa_sq - params.alpha + 0j
    if transport:
        L = L - 1j * params.Omega * k2
    L[params.N, params.N] = 0.0
    return L


def forcing_field(params: FlowParams) -> SpectralField:
    """λ cos(m y/β): a_(0,±m) = λ/2."""
    m = params.forcing_mode
    if m > params.N:
        raise ConfigurationError(f"forcing mode {m} exceeds truncation N={params.N}")
    return SpectralField.from_modes(params.torus, {(0, m): params.lam / 2})


def forcing_array(params: FlowParams) -> np.ndarray:
    return forcing_field(params).coeffs


def oscillating_forcing_array(params: FlowParams, t: float) -> np.ndarray:
    """λ cos(m y/β + mΩt) as coefficients."""
    N, m = params.N, params.forcing_mode
    c = np.zeros(params.torus.shape, dtype=complex)
    c[N, N + m] = params.lam / 2 * np.exp(1j * m * params.Omega * t)
    c[N, N - m] = np.conj(c[N, N + m])
    return c


# -- bilinear advection -----------------------------------------------------

def grid_size(N: int) -> int:
    """Smallest even grid that makes the quadratic product alias-free."""
    M = 3 * N + 1
    return M + (M % 2)


@lru_cache(maxsize=None)
def _fft_layout(torus: TorusSpec):
    N, M = torus.N, grid_size(torus.N)
    rows = np.arange(-N, N + 1) % M
    # Non-negative k2 half of the full array -> rfft layout
    return M, rows, np.arange(N, 2 * N + 1)


def to_physical(torus: TorusSpec, c: np.ndarray) -> np.ndarray:
    """Real grid values for a stack of full coefficient arrays ``(..., K, K)``."""
    M, rows, cols = _fft_layout(torus)
    N = torus.N
    pad = np.zeros(c.shape[:-2] + (M, M // 2 + 1), dtype=complex)
    pad[..., rows, :N + 1] = c[..., :, cols]
    return np.fft.irfft2(pad, s=(M, M)) * (M * M)


def from_physical(torus: TorusSpec, g: np.ndarray) -> np.ndarray:
    """Galerkin projection of real grid values onto the full coefficient box."""
    M, rows, cols = _fft_layout(torus)
    N = torus.N
    spec = np.fft.rfft2(g) / (M * M)
    out = np.empty(g.shape[:-2] + torus.shape, dtype=complex)
    out[..., :, cols] = spec[..., rows, :N + 1]
    # negative k2 columns by Hermitian mirror
    out[..., :, :N] = np.conj(out[..., ::-1, :N:-1])
    out[..., N, N] = 0.0
    return out


def bilinear_fft(torus: TorusSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """B(a, b) via an alias-free pseudo-spectral product."""
    kap1, kap2 = torus.wavevectors
    u1, u2 = velocity_coeffs(torus, a)
    g = to_physical(torus, np.stack([u1, u2, 1j * kap1 * b, 1j * kap2 * b]))
    return -from_physical(torus, g[0] * g[2] + g[1] * g[3])


def bilinear_direct(torus: TorusSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """B(a, b) by explicit 2D convolution of the coefficient arrays."""
    N = torus.N
    kap1, kap2 = torus.wavevectors
    u1, u2 = velocity_coeffs(torus, a)
    full = convolve2d(u1, 1j * kap1 * b) + convolve2d(u2, 1j * kap2 * b)
    out = -full[N:3 * N + 1, N:3 * N + 1]
    out[N, N] = 0.0
    return out


DIRECT_MAX_N = 5


def bilinear_array(torus: TorusSpec, a: np.ndarray, b: np.ndarray, method: str = "auto") -> np.ndarray:
    if method == "auto":
        method = "direct" if torus.N <= DIRECT_MAX_N else "fft"
    if method == "direct":
        return bilinear_direct(torus, a, b)
    if method == "fft":
        return bilinear_fft(torus, a, b)
    raise ValueError(f"unknown method {method!r}")


def bilinear(a: SpectralField, b: SpectralField, method: str = "auto") -> SpectralField:
    """B(a, b) = -v(a)·∇b, Galerkin-projected onto |k|∞ ≤ N."""
    if a.torus != b.torus:
        raise ValueError("fields live on different tori")
    out = bilinear_array(a.torus, a.coeffs, b.coeffs, method)
    return SpectralField(a.torus, _symmetrize(out))


def advection(omega: SpectralField, method: str = "auto") -> SpectralField:
    """-v(ω)·∇ω, Galerkin-projected."""
    return bilinear(omega, omega, method)


def _symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(c[::-1, ::-1]))


# -- right-hand sides -------------------------------------------------------

def rhs_array(params: FlowParams, c: np.ndarray, method: str = "auto") -> np.ndarray:
    return (bilinear_array(params.torus, c, c, method)
            + linear_symbol_array(params) * c + forcing_array(params))


def rhs(params: FlowParams, omega: SpectralField, method: str = "auto") -> SpectralField:
    """dω/dt of the autonomous (mean-flow) system."""
    return SpectralField(params.torus, _symmetrize(rhs_array(params, omega.coeffs, method)))


def rhs_nonautonomous(params: FlowParams, omega: SpectralField, t: float,
                      method: str = "auto") -> SpectralField:
    """dω/dt of the oscillating-force system (no mean-flow transport)."""
    c = omega.coeffs
    out = (bilinear_array(params.torus, c, c, method)
           + linear_symbol_array(params, transport=False) * c
           + oscillating_forcing_array(params, t))
    return SpectralField(params.torus, _symmetrize(out))


def mean_flow_transport(params: FlowParams, omega: SpectralField) -> SpectralField:
    """βΩ ∂y ω, the term that separates the two frames."""
    _, k2 = params.torus.indices
    return SpectralField(params.torus, 1j * params.Omega * k2 * omega.coeffs)


def galilean_conjugate_rhs(params: FlowParams, omega: SpectralField, t: float) -> SpectralField:
    """Oscillating-frame vector field rebuilt from the mean-flow frame.

    With ω(z, t) = ω̃(z + βΩt ê2, t) the two vector fields are related by
    rhs_osc(ω, t) = S_{βΩt} rhs(S_{-βΩt} ω) + βΩ ∂y ω, S_d being translation by d.
    """
    d = params.beta * params.Omega * t
    inner = rhs(params, field_shift(omega, (0.0, -d)))
    return field_shift(inner, (0.0, d)) + mean_flow_transport(params, omega)


# -- Jacobian ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _interaction_tables(torus: TorusSpec):
    """Index tables for the linearised advection on the full flat mode list.

    Returns (q_flat, valid, coupling) of shape (K², K²) where for output mode
    k (row) and input mode p (column), q = k - p, and
    coupling = C(p, q) + C(q, p).
    """
    k1, k2 = (g.ravel() for g in torus.indices)
    kap1, kap2 = (g.ravel() for g in torus.wavevectors)
    inv = torus.inv_kappa_sq.ravel()
    N, K = torus.N, torus.K
    q1 = k1[:, None] - k1[None, :]
    q2 = k2[:, None] - k2[None, :]
    valid = (np.abs(q1) <= N) & (np.abs(q2) <= N)
    q_flat = np.where(valid, (q1 + N) * K + (q2 + N), torus.center)
    cross = kap2[None, :] * kap1[q_flat] - kap1[None, :] * kap2[q_flat]
    coupling = np.where(valid, cross * (inv[None, :] - inv[q_flat]), 0.0)
    return q_flat, valid, coupling


def linearized_advection_matrix(torus: TorusSpec, base: np.ndarray) -> np.ndarray:
    """Complex matrix of δ ↦ B(δ, b) + B(b, δ) on the full flat mode list."""
    q_flat, valid, coupling = _interaction_tables(torus)
    b = base.ravel()
    return coupling * np.where(valid, b[q_flat], 0.0)


def complex_to_real_jacobian(torus: TorusSpec, A: np.ndarray) -> np.ndarray:
    """Real matrix, on interleaved (Re, Im) half-mode coordinates, of a C-linear
    map on full flat coefficient vectors that preserves Hermitian symmetry."""
    c = torus.center
    half = np.arange(c + 1, torus.size)
    mirror = torus.size - 1 - half
    A1 = A[np.ix_(half, half)]
    A2 = A[np.ix_(half, mirror)]
    G = A1 + A2
    H = 1j * (A1 - A2)
    n = half.size
    J = np.empty((2 * n, 2 * n))
    J[0::2, 0::2] = G.real
    J[0::2, 1::2] = H.real
    J[1::2, 0::2] = G.imag
    J[1::2, 1::2] = H.imag
    return J


def jacobian_dense(params: FlowParams, base: SpectralField) -> np.ndarray:
    """Derivative of :func:`rhs` at ``base`` in real half-mode coordinates.

    The coordinate vector is :meth:`SpectralField.to_real_vector`; the matrix
    is square with side 2·n_half. At ``base = 0`` it is block diagonal with one
    2×2 rotation-scaling block per mode realising L(k).
    """
    A = linearized_advection_matrix(params.torus, base.coeffs)
    A[np.diag_indices_from(A)] += linear_symbol_array(params).ravel()
    return complex_to_real_jacobian(params.torus, A)
