"""Compiled inner loops for the eigensolvers and inertia counts."""

import math

import numba
import numpy as np

EPS = np.finfo(np.float64).eps


@numba.njit(cache=True, nogil=True)
def tql_implicit(d, e, max_sweeps):
    """Implicit-shift QL on a symmetric tridiagonal matrix, eigenvalues only.

    ``d`` holds the diagonal, ``e[i]`` couples sites ``i`` and ``i + 1`` with
    ``e[n-1] = 0``. Both are overwritten; ``d`` ends up holding the eigenvalues
    (unsorted). Returns the index of an eigenvalue that failed to converge
    within ``max_sweeps`` sweeps, or -1 on success.
    """
    n = d.shape[0]
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if sweeps == max_sweeps:
                return l
            sweeps += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


@numba.njit(cache=True, nogil=True)
def sturm_count(d, e, shift, tiny):
    """Negative pivots of ``T - shift*I`` for tridiagonal ``T``.

    Returns (count, breakdown) where breakdown is True when some pivot had
    magnitude below ``tiny``.
    """
    n = d.shape[0]
    count = 0
    piv = d[0] - shift
    breakdown = abs(piv) < tiny
    if piv < 0.0:
        count += 1
    for i in range(1, n):
        if piv == 0.0:
            return count, True
        piv = (d[i] - shift) - e[i - 1] * e[i - 1] / piv
        if abs(piv) < tiny:
            breakdown = True
        if piv < 0.0:
            count += 1
    return count, breakdown


@numba.njit(cache=True, nogil=True)
def banded_ldlt_count(band, bw, shift, tiny):
    """Negative pivots of the unpivoted LDL^T factorization of ``A - shift*I``.

    ``band[i, t]`` stores ``A[i, i - bw + t]`` for ``t = 0..bw`` (lower band,
    diagonal in the last column). Fill-in stays inside the band.
    """
    n = band.shape[0]
    L = np.zeros((n, bw + 1))
    D = np.zeros(n)
    count = 0
    breakdown = False
    for i in range(n):
        j0 = max(0, i - bw)
        for j in range(j0, i):
            # L[i, j] = (A[i, j] - sum_k L[i, k] L[j, k] D[k]) / D[j]
            acc = band[i, j - i + bw]
            k0 = max(j0, j - bw)
            for k in range(k0, j):
                acc -= L[i, k - i + bw] * L[j, k - j + bw] * D[k]
            L[i, j - i + bw] = acc / D[j]
        acc = band[i, bw] - shift
        for k in range(j0, i):
            lik = L[i, k - i + bw]
            acc -= lik * lik * D[k]
        D[i] = acc
        if abs(acc) < tiny:
            breakdown = True
            if acc == 0.0:
                return count, True
        if acc < 0.0:
            count += 1
    return count, breakdown
