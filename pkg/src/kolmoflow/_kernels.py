"""Compiled Taylor-jet kernels for small truncations (direct convolution)."""

import numpy as np
from numba import njit

from .spectral import TorusSpec


def interaction_triples(torus: TorusSpec):
    """Unordered interacting pairs {p, q} with p + q = k, k in the stored half.

    Returns flat-index arrays (k, p, q) and the symmetrised coupling
    C(p, q) + C(q, p); pairs with zero coupling are dropped.
    """
    k1, k2 = (g.ravel() for g in torus.indices)
    kap1, kap2 = (g.ravel() for g in torus.wavevectors)
    inv = torus.inv_kappa_sq.ravel()
    N, K, c = torus.N, torus.K, torus.center
    p, q = np.triu_indices(torus.size, k=1)
    s1, s2 = k1[p] + k1[q], k2[p] + k2[q]
    keep = (np.abs(s1) <= N) & (np.abs(s2) <= N) & (p != c) & (q != c)
    p, q, s1, s2 = p[keep], q[keep], s1[keep], s2[keep]
    k = (s1 + N) * K + (s2 + N)
    cross = kap2[p] * kap1[q] - kap1[p] * kap2[q]
    coef = cross * (inv[p] - inv[q])
    keep = (k > c) & (coef != 0.0)
    order = np.argsort(k[keep], kind="stable")
    return (k[keep][order].astype(np.int64), p[keep][order].astype(np.int64),
            q[keep][order].astype(np.int64), coef[keep][order])


@njit(cache=True, fastmath=True)
def direct_jet(c, lin, forcing, kk, pp, qq, cc, order):
    """Taylor coefficients u_0..u_order as an ``(n, order + 1)`` array.

    u_{m+1} = (Σ_j B(u_j, u_{m-j}) + L u_m + f_m) / (m + 1), evaluated on the
    stored half and mirrored. Real and imaginary parts are kept apart, and a
    time-reversed copy R[:, P-1-j] = U[:, j] makes the Cauchy sum contiguous.
    """
    n = c.size
    center = n // 2
    P = order + 1
    Ur = np.zeros((n, P))
    Ui = np.zeros((n, P))
    Rr = np.zeros((n, P))
    Ri = np.zeros((n, P))
    for i in range(n):
        Ur[i, 0] = c[i].real
        Ui[i, 0] = c[i].imag
        Rr[i, P - 1] = c[i].real
        Ri[i, P - 1] = c[i].imag
    accr = np.zeros(n)
    acci = np.zeros(n)
    for m in range(order):
        accr[:] = 0.0
        acci[:] = 0.0
        off = P - 1 - m
        for t in range(kk.size):
            p = pp[t]
            q = qq[t]
            sr = 0.0
            si = 0.0
            for j in range(m + 1):
                ar = Ur[p, j]
                ai = Ui[p, j]
                br = Rr[q, off + j]
                bi = Ri[q, off + j]
                sr += ar * br - ai * bi
                si += ar * bi + ai * br
            accr[kk[t]] += cc[t] * sr
            acci[kk[t]] += cc[t] * si
        inv = 1.0 / (m + 1)
        for i in range(center + 1, n):
            lr = lin[i].real
            li = lin[i].imag
            vr = (accr[i] + lr * Ur[i, m] - li * Ui[i, m] + forcing[m, i].real) * inv
            vi = (acci[i] + lr * Ui[i, m] + li * Ur[i, m] + forcing[m, i].imag) * inv
            Ur[i, m + 1] = vr
            Ui[i, m + 1] = vi
            Ur[n - 1 - i, m + 1] = vr
            Ui[n - 1 - i, m + 1] = -vi
            Rr[i, P - 2 - m] = vr
            Ri[i, P - 2 - m] = vi
            Rr[n - 1 - i, P - 2 - m] = vr
            Ri[n - 1 - i, P - 2 - m] = -vi
    return Ur + 1j * Ui


@njit(cache=True)
def horner(U, h):
    """Σ_m U[:, m] h^m."""
    n, p1 = U.shape
    out = U[:, p1 - 1].copy()
    for m in range(p1 - 2, -1, -1):
        for i in range(n):
            out[i] = out[i] * h + U[i, m]
    return out
