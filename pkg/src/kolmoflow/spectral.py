"""
Truncated Fourier representation of real scalar fields on the flat torus
T²_β = [0, 2π] × [0, 2πβ].

A field is stored as the full (2N+1) × (2N+1) complex coefficient array
indexed by ``[k1 + N, k2 + N]`` for the index box |k|∞ ≤ N. The physical
wavevector of index k is κ(k) = (k1, k2/β), so ``cos(y/β)`` is exactly the
index-(0, 1) mode pair.

Flattening the array row-major gives a convenient layout: the mirror of flat
index i is ``K² - 1 - i`` and the Hermitian half {k1 > 0, or k1 = 0 and
k2 > 0} is exactly the flat indices above the centre, in lexicographic
(k1, k2) order.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np

HERMITIAN_ATOL = 1e-12


class NormConvention(str, enum.Enum):
    """How an L2 norm is normalised.

    ``COEFFICIENT`` is the Euclidean norm of the coefficient vector,
    ``INTEGRAL`` is the true L2 norm over the torus (Parseval), larger by
    sqrt(4π²β).
    """

    COEFFICIENT = "coefficient"
    INTEGRAL = "integral"


class ModeIndex(NamedTuple):
    k1: int
    k2: int


@dataclass(frozen=True)
class TorusSpec:
    """Torus aspect ratio ``beta`` and truncation radius ``N``."""

    beta: float
    N: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "N", int(self.N))

    @property
    def K(self) -> int:
        return 2 * self.N + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.K, self.K)

    @property
    def size(self) -> int:
        return self.K * self.K

    @property
    def center(self) -> int:
        """Flat index of the (0, 0) mode."""
        return self.size // 2

    @property
    def n_half(self) -> int:
        return self.size // 2

    @property
    def volume(self) -> float:
        return 4.0 * np.pi**2 * self.beta

    @cached_property
    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer index grids (k1, k2), each of shape ``(K, K)``."""
        r = np.arange(-self.N, self.N + 1)
        k1, k2 = np.meshgrid(r, r, indexing="ij")
        k1.flags.writeable = False
        k2.flags.writeable = False
        return k1, k2

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical wavevector grids (κ1, κ2) = (k1, k2/β)."""
        k1, k2 = self.indices
        kap1 = k1.astype(float)
        kap2 = k2 / self.beta
        kap1.flags.writeable = False
        kap2.flags.writeable = False
        return kap1, kap2

    @cached_property
    def kappa_sq(self) -> np.ndarray:
        kap1, kap2 = self.wavevectors
        out = kap1**2 + kap2**2
        out.flags.writeable = False
        return out

    @cached_property
    def inv_kappa_sq(self) -> np.ndarray:
        """1/|κ|² with the (0, 0) entry set to zero."""
        ksq = self.kappa_sq.copy()
        ksq[self.N, self.N] = np.inf
        out = 1.0 / ksq
        out.flags.writeable = False
        return out

    @cached_property
    def half_modes(self) -> np.ndarray:
        """``(n_half, 2)`` integer array of the stored Hermitian half, in storage order."""
        k1, k2 = self.indices
        flat = np.stack([k1.ravel(), k2.ravel()], axis=1)[self.center + 1:]
        flat.flags.writeable = False
        return flat

    def flat_index(self, k: tuple[int, int]) -> int:
        k1, k2 = k
        if abs(k1) > self.N or abs(k2) > self.N:
            raise IndexError(f"mode {tuple(k)} outside |k|_inf <= {self.N}")
        return (k1 + self.N) * self.K + (k2 + self.N)

    def contains(self, k: tuple[int, int]) -> bool:
        return abs(k[0]) <= self.N and abs(k[1]) <= self.N


def wavenumber(torus: TorusSpec, k: tuple[int, int]) -> tuple[float, float]:
    """Physical wavevector κ(k) = (k1, k2/β)."""
    return (float(k[0]), k[1] / torus.beta)


def _is_hermitian(c: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    return bool(np.max(np.abs(c - np.conj(c[::-1, ::-1])), initial=0.0) <= atol * scale)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable truncated Fourier series of a real, zero-mean field.

    ``coeffs`` is the full (2N+1, 2N+1) complex array; construction checks
    Hermitian symmetry and a vanishing (0, 0) coefficient and stores a
    read-only copy.
    """

    torus: TorusSpec
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != self.torus.shape:
            raise ValueError(f"coefficient array has shape {c.shape}, expected {self.torus.shape}")
        if c[self.torus.N, self.torus.N] != 0:
            raise ValueError("field has a nonzero mean coefficient a_(0,0)")
        if not np.all(np.isfinite(c)):
            raise ValueError("field has non-finite coefficients")
        if not _is_hermitian(c):
            raise ValueError("coefficients are not Hermitian-symmetric (field is not real)")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, torus: TorusSpec) -> "SpectralField":
        return cls(torus, np.zeros(torus.shape, dtype=complex))

    @classmethod
    def from_modes(cls, torus: TorusSpec, modes: Mapping[tuple[int, int], complex]) -> "SpectralField":
        """Build from ``{(k1, k2): a_k}``; the conjugate mirror is filled in.

        Giving both k and -k is allowed if they are consistent.
        """
        c = np.zeros(torus.shape, dtype=complex)
        N = torus.N
        for k, amp in modes.items():
            k1, k2 = int(k[0]), int(k[1])
            if (k1, k2) == (0, 0):
                raise ValueError("the (0, 0) mode cannot be set")
            torus.flat_index((k1, k2))
            c[k1 + N, k2 + N] = amp
            c[-k1 + N, -k2 + N] = np.conj(amp)
        for k, amp in modes.items():
            if not np.isclose(c[k[0] + N, k[1] + N], amp, rtol=1e-14, atol=0):
                raise ValueError(f"inconsistent amplitudes given for mode {tuple(k)} and its mirror")
        return cls(torus, c)

    @classmethod
    def from_flat(cls, torus: TorusSpec, flat: np.ndarray) -> "SpectralField":
        return cls(torus, np.asarray(flat).reshape(torus.shape))

    @classmethod
    def from_half(cls, torus: TorusSpec, half: np.ndarray) -> "SpectralField":
        """Build from the complex amplitudes of the Hermitian half (storage order)."""
        half = np.asarray(half, dtype=complex)
        if half.shape != (torus.n_half,):
            raise ValueError(f"expected {torus.n_half} half-mode amplitudes, got {half.shape}")
        flat = np.zeros(torus.size, dtype=complex)
        flat[torus.center + 1:] = half
        flat[:torus.center] = np.conj(half[::-1])
        return cls.from_flat(torus, flat)

    @classmethod
    def from_real_vector(cls, torus: TorusSpec, x: np.ndarray) -> "SpectralField":
        """Inverse of :meth:`to_real_vector`."""
        x = np.asarray(x, dtype=float)
        return cls.from_half(torus, x[0::2] + 1j * x[1::2])

    # -- views ------------------------------------------------------------

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    @property
    def half(self) -> np.ndarray:
        return self.flat[self.torus.center + 1:]

    def to_real_vector(self) -> np.ndarray:
        """Interleaved (Re a_h, Im a_h) over the Hermitian half, length 2·n_half."""
        h = self.half
        out = np.empty(2 * h.size)
        out[0::2] = h.real
        out[1::2] = h.imag
        return out

    def __getitem__(self, k: tuple[int, int]) -> complex:
        self.torus.flat_index(k)
        return complex(self.coeffs[k[0] + self.torus.N, k[1] + self.torus.N])

    # -- arithmetic -------------------------------------------------------

    def _check(self, other: "SpectralField") -> None:
        if other.torus != self.torus:
            raise ValueError("fields live on different tori")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.torus, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.torus, self.coeffs - other.coeffs)

    def __mul__(self, s: float) -> "SpectralField":
        return SpectralField(self.torus, self.coeffs * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.torus, -self.coeffs)

    def allclose(self, other: "SpectralField", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= atol)


@dataclass(frozen=True, eq=False)
class VelocityCoefficients:
    torus: TorusSpec
    u1: np.ndarray = dc_field(repr=False)
    u2: np.ndarray = dc_field(repr=False)

    def divergence(self) -> np.ndarray:
        kap1, kap2 = self.torus.wavevectors
        return 1j * kap1 * self.u1 + 1j * kap2 * self.u2

    def curl(self) -> np.ndarray:
        """Coefficients of rot v = ∂x v2 - ∂y v1."""
        kap1, kap2 = self.torus.wavevectors
        return 1j * kap1 * self.u2 - 1j * kap2 * self.u1

    def norm(self) -> float:
        """Coefficient-convention norm sqrt(Σ |u1|² + |u2|²)."""
        return float(np.sqrt(np.sum(np.abs(self.u1) ** 2 + np.abs(self.u2) ** 2)))


def l2_norm(f: SpectralField, convention: NormConvention | str = NormConvention.COEFFICIENT) -> float:
    """L2 norm of a field in the given convention."""
    convention = NormConvention(convention)
    s = float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
    if convention is NormConvention.INTEGRAL:
        return float(np.sqrt(f.torus.volume)) * s
    return s


def coefficient_norm(c: np.ndarray) -> float:
    # overflow to inf is the intended signal for a blown-up state
    with np.errstate(over="ignore"):
        return float(np.sqrt(np.sum(c.real**2 + c.imag**2)))


def velocity_coeffs(torus: TorusSpec, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Array-level stream-function inversion; ``c`` may be full (K, K) or flat."""
    kap1, kap2 = torus.wavevectors
    inv = torus.inv_kappa_sq
    c = c.reshape(torus.shape)
    return 1j * kap2 * inv * c, -1j * kap1 * inv * c


def velocity_from_vorticity(f: SpectralField) -> VelocityCoefficients:
    """Mean-free, divergence-free velocity with rot v = ω.

    Solves Δψ = ω and sets v = (-∂y ψ, ∂x ψ), i.e.
    v̂(k) = i (κ2, -κ1) a_k / |κ|².
    """
    if f.coeffs[f.torus.N, f.torus.N] != 0:
        raise ValueError("vorticity must have zero mean")
    u1, u2 = velocity_coeffs(f.torus, f.coeffs)
    return VelocityCoefficients(f.torus, u1, u2)


def velocity_norm(f: SpectralField, convention: NormConvention | str = NormConvention.COEFFICIENT) -> float:
    """L2 norm of the velocity induced by ``f``: sqrt(Σ |a_k|²/|κ(k)|²)."""
    s = float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2 * f.torus.inv_kappa_sq)))
    if NormConvention(convention) is NormConvention.INTEGRAL:
        s *= float(np.sqrt(f.torus.volume))
    return s


def shift_phase(torus: TorusSpec, displacement: tuple[float, float]) -> np.ndarray:
    kap1, kap2 = torus.wavevectors
    return np.exp(1j * (kap1 * displacement[0] + kap2 * displacement[1]))


def field_shift(f: SpectralField, displacement: tuple[float, float]) -> SpectralField:
    """The translated field z ↦ ω(z + d)."""
    return SpectralField(f.torus, f.coeffs * shift_phase(f.torus, displacement))


def evaluate_physical(f: SpectralField, point: tuple[float, float]) -> float:
    """Evaluate the series at one physical point."""
    val = np.sum(f.coeffs * shift_phase(f.torus, point))
    scale = max(1.0, float(np.sum(np.abs(f.coeffs))))
    if abs(val.imag) > 1e-12 * scale:
        raise ArithmeticError(f"imaginary part {val.imag:.3e} at {point}; field is not real")
    return float(val.real)


def to_grid(f: SpectralField, M: int) -> np.ndarray:
    """Sample on the uniform ``M × M`` grid x_j = 2πj/M, y_l = 2πβl/M.

    Requires M > 2N so no mode folds.
    """
    if M <= 2 * f.torus.N:
        raise ValueError(f"grid size {M} too small for N={f.torus.N}")
    N = f.torus.N
    pad = np.zeros((M, M), dtype=complex)
    r = np.arange(-N, N + 1) % M
    pad[np.ix_(r, r)] = f.coeffs
    return np.real(np.fft.ifft2(pad)) * M * M


def from_grid(torus: TorusSpec, values: np.ndarray) -> SpectralField:
    """Project grid samples onto the truncated basis, dropping the mean."""
    M = values.shape[0]
    if values.shape != (M, M) or M <= 2 * torus.N:
        raise ValueError("expected a square grid with more than 2N points per side")
    spec = np.fft.fft2(values) / (M * M)
    r = np.arange(-torus.N, torus.N + 1) % M
    c = spec[np.ix_(r, r)]
    c[torus.N, torus.N] = 0.0
    c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    return SpectralField(torus, c)


def sup_norm(f: SpectralField, M: int = 128) -> float:
    """Max of |ω| sampled on an ``M × M`` grid (a lower bound that is exact at grid points)."""
    return float(np.max(np.abs(to_grid(f, M))))


# -- CSV --------------------------------------------------------------------

FIELD_CSV_HEADER = ("k1", "k2", "re", "im")


def write_field_csv(f: SpectralField, path) -> None:
    """Write the Hermitian half as ``k1,k2,re,im`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_CSV_HEADER)
        for (k1, k2), a in zip(f.torus.half_modes, f.half):
            w.writerow([int(k1), int(k2), f"{a.real:.17g}", f"{a.imag:.17g}"])


def read_field_csv(path, torus: TorusSpec) -> SpectralField:
    modes = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FIELD_CSV_HEADER:
            raise ValueError(f"bad field CSV header {reader.fieldnames}")
        for row in reader:
            k = (int(row["k1"]), int(row["k2"]))
            if not (k[0] > 0 or (k[0] == 0 and k[1] > 0)):
                raise ValueError(f"row for mode {k} is outside the stored half")
            modes[k] = complex(float(row["re"]), float(row["im"]))
    return SpectralField.from_modes(torus, modes)
