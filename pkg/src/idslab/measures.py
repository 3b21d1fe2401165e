"""Probability measures on the real line and exact one-dimensional transport metrics.

Measures are immutable. Atomic measures (point masses, two-point laws,
empirical laws) carry their atoms explicitly; the uniform family exposes an
exact CDF and quantile and is discretized only when atoms are required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

ATOMIC = "atomic"
UNIFORM = "parametric-uniform"
TWO_POINT = "parametric-bernoulli-two-point"
EMPIRICAL = "empirical-from-samples"

KINDS = (ATOMIC, UNIFORM, TWO_POINT, EMPIRICAL)
ATOMIC_KINDS = (ATOMIC, TWO_POINT, EMPIRICAL)

WEIGHT_TOL = 1e-12
DEFAULT_DISCRETIZATION = 1024


class UnsupportedRepresentation(ValueError):
    """Raised when an operation needs atoms but receives a continuous law."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure:
    """A Borel probability measure on R with compact support in [-A, A].

    Use the constructors :func:`point_mass`, :func:`atomic`, :func:`two_point`,
    :func:`uniform` and :func:`from_samples` rather than building this directly.
    """

    kind: str
    locations: np.ndarray = field(default_factory=lambda: _frozen([]))
    weights: np.ndarray = field(default_factory=lambda: _frozen([]))
    params: dict = field(default_factory=dict)
    support_bound: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        object.__setattr__(self, "locations", _frozen(self.locations))
        object.__setattr__(self, "weights", _frozen(self.weights))
        A = float(self.support_bound)
        if not (A >= 0 and math.isfinite(A)):
            raise ValueError(f"support bound must be finite and >= 0, got {A}")
        object.__setattr__(self, "support_bound", A)

        if self.is_atomic:
            x, w = self.locations, self.weights
            if x.ndim != 1 or x.shape != w.shape or x.size == 0:
                raise ValueError("atomic measure needs matching non-empty locations and weights")
            if not np.all(np.isfinite(x)):
                raise ValueError("atom locations must be finite")
            if np.any(np.diff(x) <= 0):
                raise ValueError("atom locations must be strictly increasing")
            if np.any(w <= 0) or np.any(w > 1):
                raise ValueError("atom weights must lie in (0, 1]")
            if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
            if x[0] < -A or x[-1] > A:
                raise ValueError(f"atoms fall outside [-{A}, {A}]")
            cum = np.cumsum(w)
        else:
            lo, hi = float(self.params["low"]), float(self.params["high"])
            if not lo < hi:
                raise ValueError("uniform law needs low < high")
            if lo < -A or hi > A:
                raise ValueError(f"support [{lo}, {hi}] exceeds [-{A}, {A}]")
            cum = np.empty(0)
        cum = _frozen(cum)
        object.__setattr__(self, "_cum", cum)

    @property
    def is_atomic(self) -> bool:
        return self.kind in ATOMIC_KINDS

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(w)) for x, w in zip(self.locations, self.weights)]

    @property
    def support(self) -> tuple[float, float]:
        if self.is_atomic:
            return float(self.locations[0]), float(self.locations[-1])
        return float(self.params["low"]), float(self.params["high"])

    def __eq__(self, other):
        if not isinstance(other, ProbabilityMeasure):
            return NotImplemented
        return (
            self.kind == other.kind
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.weights, other.weights)
            and self.params == other.params
            and self.support_bound == other.support_bound
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "atoms": [[x, w] for x, w in self.atoms],
            "params": dict(self.params),
            "support_bound": self.support_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbabilityMeasure":
        unknown = set(d) - {"kind", "atoms", "params", "support_bound"}
        if unknown:
            raise ValueError(f"unknown measure keys: {sorted(unknown)}")
        kind = d["kind"]
        params = dict(d.get("params", {}))
        atoms = d.get("atoms") or []
        A = d.get("support_bound")
        if kind == UNIFORM:
            if A is None:
                A = max(abs(params["low"]), abs(params["high"]))
            return cls(kind, params=params, support_bound=A)
        if not atoms and kind == TWO_POINT:
            return two_point(params["x0"], params["x1"], params["p"], support_bound=A)
        if not atoms:
            raise ValueError(f"measure of kind {kind!r} needs atoms")
        x = [a[0] for a in atoms]
        w = [a[1] for a in atoms]
        if A is None:
            A = max(abs(x[0]), abs(x[-1]))
        return cls(kind, x, w, params, A)


class CouplingSample(NamedTuple):
    x: float
    x_tilde: float
    u: float


# -- constructors ---------------------------------------------------------


def _bound(x, support_bound):
    return max(abs(float(np.min(x))), abs(float(np.max(x)))) if support_bound is None else support_bound


def point_mass(c: float, support_bound: float | None = None) -> ProbabilityMeasure:
    return ProbabilityMeasure(ATOMIC, [c], [1.0], {}, _bound([c], support_bound))


def atomic(locations: Sequence[float], weights: Sequence[float] | None = None,
           support_bound: float | None = None) -> ProbabilityMeasure:
    """Finite atomic law. Locations are sorted and duplicate atoms merged."""
    x = np.asarray(locations, dtype=float)
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    ux, inv = np.unique(x, return_inverse=True)
    if ux.size != x.size:
        w = np.bincount(inv, weights=w)
        x = ux
    return ProbabilityMeasure(ATOMIC, x, w, {}, _bound(x, support_bound))


def two_point(x0: float, x1: float, p: float, support_bound: float | None = None) -> ProbabilityMeasure:
    """Law putting mass ``1 - p`` at ``x0`` and ``p`` at ``x1`` (requires x0 < x1)."""
    if not x0 < x1:
        raise ValueError("two-point law needs x0 < x1")
    if not 0 < p < 1:
        raise ValueError("two-point probability must lie in (0, 1)")
    params = {"x0": float(x0), "x1": float(x1), "p": float(p)}
    return ProbabilityMeasure(TWO_POINT, [x0, x1], [1.0 - p, p], params,
                              _bound([x0, x1], support_bound))


def uniform(low: float, high: float, support_bound: float | None = None) -> ProbabilityMeasure:
    params = {"low": float(low), "high": float(high)}
    return ProbabilityMeasure(UNIFORM, params=params, support_bound=_bound([low, high], support_bound))


def from_samples(samples: Iterable[float], support_bound: float | None = None) -> ProbabilityMeasure:
    """Empirical law of a finite sample; repeated values become one heavier atom."""
    s = np.sort(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                           dtype=float).ravel())
    if s.size == 0:
        raise ValueError("empty sample")
    x, counts = np.unique(s, return_counts=True)
    return ProbabilityMeasure(EMPIRICAL, x, counts / s.size, {}, _bound(x, support_bound))


def discretize(m: ProbabilityMeasure, n: int = DEFAULT_DISCRETIZATION) -> ProbabilityMeasure:
    """Equal-mass atoms at the quantile midpoints ``(k + 1/2) / n``."""
    if m.is_atomic:
        return m
    u = (np.arange(n) + 0.5) / n
    return atomic(quantile(m, u), support_bound=m.support_bound)


# -- CDF and quantile -----------------------------------------------------


def cdf(m: ProbabilityMeasure, x):
    """Right-continuous distribution function, vectorized over ``x``."""
    xa = np.asarray(x, dtype=float)
    if m.is_atomic:
        idx = np.searchsorted(m.locations, xa, side="right")
        out = np.where(idx > 0, m._cum[np.maximum(idx - 1, 0)], 0.0)
        out = np.where(idx >= m.locations.size, 1.0, out)
    else:
        lo, hi = m.support
        out = np.clip((xa - lo) / (hi - lo), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _quantile_unchecked(m: ProbabilityMeasure, u: np.ndarray) -> np.ndarray:
    if m.is_atomic:
        idx = np.searchsorted(m._cum, u, side="left")
        return m.locations[np.minimum(idx, m.locations.size - 1)]
    lo, hi = m.support
    return lo + u * (hi - lo)


def quantile(m: ProbabilityMeasure, u):
    """Generalized inverse ``inf{x : cdf(x) >= u}`` for ``u`` in (0, 1)."""
    ua = np.asarray(u, dtype=float)
    if np.any(~((ua > 0) & (ua < 1))):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    out = _quantile_unchecked(m, ua)
    return float(out) if np.ndim(out) == 0 else out


# -- Kantorovich-Rubinstein ----------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(flo, flm, fmid, mid - lo)
        right = simpson(fmid, frm, fhi, hi - mid)
        err = left + right - whole
        if depth >= max_depth or abs(err) <= 15.0 * eps:
            total += left + right + err / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


def _kr_atomic(m1: ProbabilityMeasure, m2: ProbabilityMeasure) -> float:
    x = np.union1d(m1.locations, m2.locations)
    if x.size < 2:
        return 0.0
    gap = np.abs(cdf(m1, x[:-1]) - cdf(m2, x[:-1]))
    return float(np.dot(gap, np.diff(x)))


def kr_distance(m1: ProbabilityMeasure, m2: ProbabilityMeasure, tol: float = 1e-10) -> float:
    """Kantorovich-Rubinstein (Wasserstein-1) distance.

    Atomic pairs are integrated exactly as ``sum |F1 - F2| dx`` over the merged
    atoms. Otherwise the quantile form ``int_0^1 |Q1 - Q2| du`` is integrated by
    adaptive Simpson, split at every jump of an atomic quantile so each piece
    has a continuous integrand.
    """
    if m1.is_atomic and m2.is_atomic:
        return _kr_atomic(m1, m2)
    cuts = np.union1d(np.r_[0.0, 1.0], np.concatenate([m._cum[:-1] for m in (m1, m2) if m.is_atomic] or [[]]))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        # atomic quantiles are constant on each open piece
        q = [float(_quantile_unchecked(m, np.array(mid))) if m.is_atomic else None for m in (m1, m2)]

        def integrand(u, q=q):
            a = q[0] if q[0] is not None else float(_quantile_unchecked(m1, np.array(u)))
            b = q[1] if q[1] is not None else float(_quantile_unchecked(m2, np.array(u)))
            return abs(a - b)

        total += adaptive_simpson(integrand, float(lo), float(hi), tol * (hi - lo))
    return total


def w1_sorted_matching(x, y) -> float:
    """W1 between two equal-size equal-weight samples by rank matching."""
    xs, ys = np.sort(np.asarray(x, dtype=float)), np.sort(np.asarray(y, dtype=float))
    if xs.shape != ys.shape:
        raise ValueError("sorted matching needs samples of equal size")
    return float(np.mean(np.abs(xs - ys)))


# -- bounded Lipschitz ----------------------------------------------------


def bl_distance(m1: ProbabilityMeasure, m2: ProbabilityMeasure) -> float:
    """Bounded-Lipschitz distance with test functions ``|f| <= 1``, ``Lip(f) <= 1``.

    Solved as a linear program over the values of ``f`` on the merged support.
    Lipschitz constraints between neighbouring atoms suffice on the line.
    """
    for m in (m1, m2):
        if not m.is_atomic:
            raise UnsupportedRepresentation(
                f"bl_distance needs atomic measures, got {m.kind!r}; discretize first")
    x = np.union1d(m1.locations, m2.locations)
    g = np.zeros(x.size)
    g[np.searchsorted(x, m1.locations)] += m1.weights
    g[np.searchsorted(x, m2.locations)] -= m2.weights
    nz = np.flatnonzero(np.abs(g) > 0)
    if nz.size == 0:
        return 0.0
    # f -> -f symmetry: canonical sign makes the result exactly symmetric
    if g[nz[0]] < 0:
        g = -g
    n = x.size
    if n == 1:
        return float(abs(g[0]))
    gaps = np.diff(x)
    rows = np.repeat(np.arange(n - 1), 2)
    cols = np.column_stack([np.arange(n - 1), np.arange(1, n)]).ravel()
    D = sparse.csr_matrix((np.tile([-1.0, 1.0], n - 1), (rows, cols)), shape=(n - 1, n))
    A_ub = sparse.vstack([D, -D]).tocsr()
    b_ub = np.concatenate([gaps, gaps])
    res = linprog(-g, A_ub=A_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"bounded-Lipschitz LP failed: {res.message}")
    return max(0.0, float(-res.fun))


def metric_sandwich_check(m1: ProbabilityMeasure, m2: ProbabilityMeasure, rtol: float = 1e-12) -> dict:
    """Check ``d_BL <= d_KR <= max(A, 1) d_BL`` with ``A`` the larger support bound."""
    d_bl = bl_distance(m1, m2)
    d_kr = kr_distance(m1, m2)
    A = max(m1.support_bound, m2.support_bound)
    slack = rtol * max(1.0, d_kr)
    upper = max(A, 1.0) * d_bl
    holds = d_bl <= d_kr + slack and d_kr <= upper + slack
    return {
        "d_bl": d_bl,
        "d_kr": d_kr,
        "support_bound": A,
        "upper": upper,
        "holds": bool(holds),
        "bl_convention": "sup over f with Lip(f) <= 1 and sup|f| <= 1",
    }


# -- coupling -------------------------------------------------------------


def quantile_couple_arrays(m1: ProbabilityMeasure, m2: ProbabilityMeasure, u) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    return quantile(m1, u), quantile(m2, u)


def quantile_couple(m1: ProbabilityMeasure, m2: ProbabilityMeasure, u_stream) -> list[CouplingSample]:
    """Monotone coupling: both draws use the same uniform seed."""
    u = np.asarray(list(u_stream) if not isinstance(u_stream, np.ndarray) else u_stream, dtype=float)
    x, xt = quantile_couple_arrays(m1, m2, u)
    return [CouplingSample(float(a), float(b), float(c)) for a, b, c in zip(np.atleast_1d(x), np.atleast_1d(xt), np.atleast_1d(u))]


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms strictly inside (0, 1): cell midpoints of a 2**-52 grid."""
    return (rng.integers(0, 2**52, size=size, dtype=np.int64) + 0.5) * 2.0**-52
