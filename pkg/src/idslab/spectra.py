"""Symmetric eigensolvers and eigenvalue counting for lattice operators.

Eigenvalues are always sorted ascending. Full spectra come from implicit-shift
QL on a tridiagonal matrix (dense inputs are first reduced by Householder
reflections); counts below an energy come from the inertia of an unpivoted
LDL^T factorization.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import LatticeOperator
from .measures import ProbabilityMeasure, from_samples

MAX_SWEEPS = 50
SYMMETRY_TOL = 1e-12
PIVOT_TOL = 1e-13
SHIFT_NUDGE = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float).ravel()
        if np.any(np.diff(ev) < 0):
            ev = np.sort(ev)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def __len__(self):
        return self.n

    def counting_measure(self) -> ProbabilityMeasure:
        """Normalized counting measure ``(1/n) sum_j delta_{lambda_j}``."""
        return from_samples(self.eigenvalues)

    def count_at_most(self, E: float) -> int:
        return int(np.searchsorted(self.eigenvalues, E, side="right"))

    def to_json(self) -> str:
        return json.dumps(self.eigenvalues.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        return cls(np.array(json.loads(text), dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalue"])
        w.writerows([repr(float(x))] for x in self.eigenvalues)
        return buf.getvalue()


def eig_tridiagonal(diag, offdiag) -> Spectrum:
    d = np.array(diag, dtype=float).ravel()
    off = np.asarray(offdiag, dtype=float).ravel()
    if off.size != max(d.size - 1, 0):
        raise ValueError(f"off-diagonal must have length {d.size - 1}, got {off.size}")
    if d.size == 0:
        return Spectrum(d)
    e = np.zeros_like(d)
    e[:-1] = off
    failed = _kernels.tql_implicit(d, e, MAX_SWEEPS)
    if failed >= 0:
        raise ConvergenceError(f"QL iteration did not converge for eigenvalue {failed} "
                               f"within {MAX_SWEEPS} sweeps")
    return Spectrum(np.sort(d))


def householder_tridiagonal(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a symmetric matrix to tridiagonal form; returns (diag, offdiag)."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    off = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        x = a[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            off[k] = x[0]
            continue
        alpha = -np.copysign(np.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[k + 1:, k + 1:]
        p = sub @ v
        q = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        off[k] = alpha
    if n >= 2:
        off[n - 2] = a[n - 1, n - 2]
    return np.diag(a).copy(), off


def eig_dense_symmetric(matrix) -> Spectrum:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix expected")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    d, off = householder_tridiagonal(a)
    return eig_tridiagonal(d, off)


def spectrum(op: LatticeOperator) -> Spectrum:
    """Full spectrum of a restricted Anderson operator."""
    if op.shape.dimension == 1:
        return eig_tridiagonal(op.diagonal, op.offdiagonal())
    return eig_dense_symmetric(op.to_dense())


def _band(op: LatticeOperator) -> np.ndarray:
    bw = op.bandwidth()
    band = np.zeros((op.n, bw + 1))
    band[:, bw] = op.diagonal
    e = op.edges()
    lo, hi = e.min(axis=1), e.max(axis=1)
    band[hi, lo - hi + bw] = -1.0
    return band


def _inertia(op: LatticeOperator, E: float, tiny: float) -> tuple[int, bool]:
    if op.shape.dimension == 1:
        return _kernels.sturm_count(op.diagonal, op.offdiagonal(), float(E), tiny)
    return _kernels.banded_ldlt_count(_band(op), op.bandwidth(), float(E), tiny)


def count_at_most(op: LatticeOperator, E: float, return_info: bool = False):
    """Number of eigenvalues ``<= E`` via Sylvester's law of inertia.

    On a tiny pivot the energy is nudged up by ``1e-12 * ||H||`` once; if that
    also breaks down the count comes from the full spectrum. With
    ``return_info`` the result is ``(count, fell_back)``.
    """
    norm = op.norm_bound()
    tiny = PIVOT_TOL * norm
    count, broke = _inertia(op, E, tiny)
    fell_back = False
    if broke:
        count, broke = _inertia(op, E + SHIFT_NUDGE * norm, tiny)
        if broke:
            count = spectrum(op).count_at_most(E)
            fell_back = True
    count = int(count)
    return (count, fell_back) if return_info else count


def spectral_transport_cost(s1: Spectrum, s2: Spectrum) -> float:
    """``sum_j |lambda_j - lambda~_j|`` under rank matching of sorted spectra."""
    if s1.n != s2.n:
        raise ValueError(f"spectra have different lengths {s1.n} and {s2.n}")
    return float(np.sum(np.abs(s1.eigenvalues - s2.eigenvalues)))
