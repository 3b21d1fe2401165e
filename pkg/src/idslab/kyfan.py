"""Ky Fan convex-majorization inequalities for eigenvalue perturbations.

For symmetric ``A``, ``B`` with ``A~ = A + B``, the rank-matched eigenvalue
shifts are majorized by the spectrum of ``B``::

    sum_j phi(lambda~_j - lambda_j) <= sum_j phi(e_j)    for convex phi.

Both spectra are sorted ascending and paired by rank; no other pairing exists
in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectra import eig_dense_symmetric

RTOL = 1e-9


@dataclass(frozen=True)
class ConvexTestFunction:
    """A scalar test function with a convexity certificate.

    ``certified`` is True for the built-in families and for piecewise-linear
    functions whose slopes were checked to be nondecreasing. Uncertified
    functions are accepted so that non-convex controls can be run.
    """

    tag: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    certified: bool = True

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    @property
    def vanishes_at_zero(self) -> bool:
        return float(self(np.array(0.0))) == 0.0

    @classmethod
    def abs(cls):
        return cls("abs", np.abs)

    @classmethod
    def square(cls):
        return cls("square", np.square)

    @classmethod
    def hinge(cls, t: float):
        t = float(t)
        return cls(f"hinge({t!r})", lambda x: np.maximum(x - t, 0.0))

    @classmethod
    def linear(cls, sign: float = 1.0):
        if sign not in (1, -1):
            raise ValueError("linear test function takes sign +1 or -1")
        return cls("linear(+1)" if sign > 0 else "linear(-1)", lambda x: sign * x)

    @classmethod
    def piecewise_linear(cls, breakpoints, slopes, value_at_first: float = 0.0):
        """Continuous piecewise-linear function.

        ``slopes`` has one more entry than ``breakpoints``: the slope left of
        the first breakpoint, between consecutive ones, and right of the last.
        """
        bp = np.asarray(breakpoints, dtype=float)
        sl = np.asarray(slopes, dtype=float)
        if sl.size != bp.size + 1 or bp.size == 0:
            raise ValueError("need len(slopes) == len(breakpoints) + 1 >= 2")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(sl) < 0):
            raise ValueError("slopes must be nondecreasing for a convex function")
        values = value_at_first + np.concatenate([[0.0], np.cumsum(sl[1:-1] * np.diff(bp))])

        def fn(x):
            idx = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, bp.size - 1)
            return values[idx] + np.where(x < bp[0], sl[0], sl[idx + 1]) * (x - bp[idx])

        return cls("piecewise-linear", fn)

    @classmethod
    def custom(cls, fn, tag: str = "custom"):
        """Arbitrary function with no convexity certificate."""
        return cls(tag, fn, certified=False)

    @classmethod
    def parse(cls, text: str) -> "ConvexTestFunction":
        """Build from a short name: ``abs``, ``square``, ``hinge:<t>``, ``linear:+1``."""
        name, _, arg = text.partition(":")
        if name == "abs":
            return cls.abs()
        if name == "square":
            return cls.square()
        if name == "hinge":
            return cls.hinge(float(arg or 0.0))
        if name == "linear":
            return cls.linear(float(arg or 1.0))
        raise ValueError(f"unknown test function {text!r}")


def _check_pair(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A, B


def _spectra(A, B):
    lam = eig_dense_symmetric(A).eigenvalues
    e = eig_dense_symmetric(B).eigenvalues
    lam_t = eig_dense_symmetric(A + B).eigenvalues
    return lam, lam_t, e


def kyfan_convex_margin(A, B, phi: ConvexTestFunction) -> dict:
    A, B = _check_pair(A, B)
    lam, lam_t, e = _spectra(A, B)
    lhs = float(np.sum(phi(lam_t - lam)))
    rhs = float(np.sum(phi(e)))
    tol = RTOL * (1.0 + abs(rhs))
    return {
        "phi": phi.tag,
        "lhs": lhs,
        "rhs": rhs,
        "margin": rhs - lhs,
        "tol": tol,
        "holds": bool(lhs <= rhs + tol),
    }


def kyfan_l1_margin(A, B) -> dict:
    """Absolute-value case: the right side is the trace norm of ``B``."""
    report = kyfan_convex_margin(A, B, ConvexTestFunction.abs())
    report["trace_norm"] = report["rhs"]
    return report


def trace_equality_check(A, B) -> dict:
    """``phi(x) = x`` and ``phi(x) = -x`` together force ``sum(lam~ - lam) = tr B``."""
    A, B = _check_pair(A, B)
    lam, lam_t, _ = _spectra(A, B)
    shift = float(np.sum(lam_t - lam))
    trace = float(np.trace(B))
    tol = RTOL * (1.0 + abs(trace))
    return {
        "shift_sum": shift,
        "trace": trace,
        "error": abs(shift - trace),
        "tol": tol,
        "holds": bool(abs(shift - trace) <= tol),
    }


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (g + g.T)


def batch_check(n_pairs: int, phis, master_seed: int, max_dim: int = 20,
                min_dim: int = 1) -> list[dict]:
    """Seeded batch of random symmetric pairs, one record per (pair, phi)."""
    from .seeding import rng_for

    records = []
    for k in range(n_pairs):
        seed, rng = rng_for(master_seed, k)
        n = int(rng.integers(min_dim, max_dim + 1))
        A = random_symmetric(rng, n)
        B = random_symmetric(rng, n, scale=float(rng.uniform(0.1, 2.0)))
        for phi in phis:
            r = kyfan_convex_margin(A, B, phi)
            r.update(pair=k, dim=n, seed=seed)
            records.append(r)
        t = trace_equality_check(A, B)
        records.append({"phi": "trace", "pair": k, "dim": n, "seed": seed,
                        "lhs": t["shift_sum"], "rhs": t["trace"],
                        "margin": t["tol"] - t["error"], "tol": t["tol"], "holds": t["holds"]})
    return records


def to_json_lines(records) -> str:
    keys = ("pair", "seed", "dim", "phi", "lhs", "rhs", "margin", "holds")
    return "".join(json.dumps({k: r[k] for k in keys}) + "\n" for r in records)
