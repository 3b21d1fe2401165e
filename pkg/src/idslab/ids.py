"""Monte Carlo estimation of the integrated density of states.

The IDS ``N(E)`` is the fraction of eigenvalues of the box operator at or below
``E``, averaged over i.i.d. potentials. It is only ever held on an energy grid,
as a right-continuous step function; the density of states ``rho`` enters
through Riemann-Stieltjes sums against ``N``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import BoxShape, LatticeOperator
from .measures import ProbabilityMeasure, quantile, uniforms
from .parallel import map_ordered
from .seeding import rng_for
from .spectra import Spectrum, count_at_most, spectrum

DEFAULT_GRID_POINTS = 2048
DEFAULT_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class EmpiricalIDS:
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be 1D arrays of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(v) < 0) or v.min(initial=0) < 0 or v.max(initial=0) > 1:
            raise ValueError("IDS values must be nondecreasing within [0, 1]")
        se = np.zeros_like(v) if self.stderr is None else np.array(self.stderr, dtype=float)
        for a in (g, v, se):
            a.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", se)

    @property
    def spacing(self) -> float:
        return float(np.min(np.diff(self.grid))) if self.grid.size > 1 else math.inf

    def _index(self, x) -> np.ndarray:
        # snap by a sliver of the spacing so grid + k*h lands on grid point k
        snap = 1e-9 * (self.spacing if self.grid.size > 1 else 1.0)
        return np.searchsorted(self.grid, np.asarray(x, dtype=float) + snap, side="right") - 1

    def __call__(self, x):
        """Step-function value: N at the largest grid point ``<= x``."""
        idx = self._index(x)
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def masses(self) -> np.ndarray:
        """Mass of ``rho`` on each cell ``(E_{k-1}, E_k]``; the first cell is unbounded below."""
        return np.diff(self.values, prepend=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["E", "N"])
        w.writerows([repr(float(e)), repr(float(n))] for e, n in zip(self.grid, self.values))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "stderr": self.stderr.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_grid(mu: ProbabilityMeasure, dimension: int, num: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid over the Gershgorin window ``[min supp - 1, 4d + max supp + 1]``."""
    lo, hi = mu.support
    return np.linspace(lo - 1.0, 4 * dimension + hi + 1.0, num)


def counts_on_grid(lam: Spectrum, grid) -> np.ndarray:
    """Fraction of eigenvalues ``<= E`` at every grid energy."""
    return np.searchsorted(lam.eigenvalues, grid, side="right") / lam.n


def counts_by_inertia(op: LatticeOperator, grid) -> np.ndarray:
    return np.array([count_at_most(op, E) for E in grid]) / op.n


def draw_potential(shape: BoxShape, mu: ProbabilityMeasure, rng: np.random.Generator) -> np.ndarray:
    return quantile(mu, uniforms(rng, shape.volume))


def aggregate(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error along axis 0, in fixed sample order."""
    curves = np.asarray(curves, dtype=float)
    s = curves.shape[0]
    mean = np.add.reduce(curves, axis=0) / s
    if s < 2:
        return mean, np.zeros_like(mean)
    se = np.sqrt(np.add.reduce((curves - mean) ** 2, axis=0) / (s - 1) / s)
    return mean, se


def empirical_ids(shape: BoxShape | tuple, mu: ProbabilityMeasure, n_samples: int = DEFAULT_SAMPLES,
                  grid=None, master_seed: int = 0, workers: int = 1,
                  method: str = "spectrum") -> EmpiricalIDS:
    """Average finite-box IDS over ``n_samples`` independent potentials.

    Sample ``s`` uses the generator derived from ``(master_seed, s)``, so the
    result does not depend on ``workers``. ``method="inertia"`` counts by
    LDL^T inertia at every grid point instead of diagonalizing.
    """
    if not isinstance(shape, BoxShape):
        shape = BoxShape(tuple(np.atleast_1d(shape)))
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    grid = default_grid(mu, shape.dimension) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be sorted strictly increasing")
    if method not in ("spectrum", "inertia"):
        raise ValueError(f"unknown counting method {method!r}")

    def one(s):
        _, rng = rng_for(master_seed, s)
        op = LatticeOperator(shape, draw_potential(shape, mu, rng))
        if method == "inertia":
            return counts_by_inertia(op, grid)
        return counts_on_grid(spectrum(op), grid)

    curves = np.array(map_ordered(one, range(n_samples), workers))
    mean, se = aggregate(curves)
    meta = {
        "shape": list(shape.side_lengths),
        "n_samples": n_samples,
        "measure": mu.to_dict(),
        "master_seed": master_seed,
    }
    return EmpiricalIDS(grid, np.clip(mean, 0.0, 1.0), se, meta)


def modulus_of_continuity(ids: EmpiricalIDS, delta: float) -> float:
    """Grid sup of ``N(E + delta) - N(E)``."""
    if not delta > 0 or delta < ids.spacing * (1 - 1e-9):
        raise ValueError(f"delta={delta} is below the grid resolution {ids.spacing}")
    j = np.minimum(ids._index(ids.grid + delta), ids.grid.size - 1)
    return float(np.max(ids.values[j] - ids.values))


def log_holder_diagnostic(ids: EmpiricalIDS, deltas) -> dict:
    """Empirical ``sup_delta omega(delta) log(1/delta)``; a measurement, not a test."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any((deltas <= 0) | (deltas > 0.5)):
        raise ValueError("deltas must lie in (0, 1/2]")
    usable = deltas[deltas >= ids.spacing * (1 - 1e-9)]
    omegas = [modulus_of_continuity(ids, d) for d in usable]
    products = [w * math.log(1.0 / d) for w, d in zip(omegas, usable)]
    best = int(np.argmax(products)) if products else None
    return {
        "constant": max(products) if products else 0.0,
        "argmax_delta": float(usable[best]) if products else None,
        "deltas": usable.tolist(),
        "omega": omegas,
        "skipped_below_resolution": deltas[deltas < ids.spacing * (1 - 1e-9)].tolist(),
    }


@dataclass(frozen=True, eq=False)
class LipschitzTestFunction:
    """Piecewise-linear function, constant beyond its outer breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if bp.shape != v.shape or bp.size == 0 or np.any(np.diff(bp) <= 0):
            raise ValueError("need increasing breakpoints with one value each")
        if bp.size > 1 and np.max(np.abs(np.diff(v) / np.diff(bp))) > 1 + 1e-12:
            raise ValueError("slope exceeds 1")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    @property
    def lipschitz_constant(self) -> float:
        if self.breakpoints.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.breakpoints))))

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.breakpoints, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def integrate(self, ids: EmpiricalIDS) -> float:
        """Riemann-Stieltjes sum against ``N``, each cell's mass at its right end."""
        return float(np.dot(self(ids.grid), ids.masses()))

    def integrate_spectrum(self, lam: Spectrum) -> float:
        return float(np.mean(self(lam.eigenvalues)))


def tent_function(E: float, delta: float) -> LipschitzTestFunction:
    """``delta`` up to ``E``, linear down to 0 on ``[E, E + delta]``, 0 after."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return LipschitzTestFunction([E, E + delta], [delta, 0.0])


def ids_sandwich_bounds(ids1: EmpiricalIDS, ids2: EmpiricalIDS, d_kr_mu: float, delta: float,
                        tol: float = 0.0) -> dict:
    """Check ``N(E-delta) - d/delta <= N~(E) <= N(E+delta) + d/delta`` on the grid.

    ``ids1`` is the reference ``N``, ``ids2`` the perturbed ``N~``.
    """
    if ids1.grid.shape != ids2.grid.shape or not np.array_equal(ids1.grid, ids2.grid):
        raise ValueError("both IDS must share one grid")
    if not delta > 0:
        raise ValueError("delta must be positive")
    E = ids1.grid
    slack = d_kr_mu / delta
    upper = ids1(E + delta) + slack - ids2.values
    lower = ids2.values - (ids1(E - delta) - slack)
    ku, kl = int(np.argmin(upper)), int(np.argmin(lower))
    return {
        "delta": delta,
        "d_kr_mu": d_kr_mu,
        "tol": tol,
        "upper_worst_margin": float(upper[ku]),
        "upper_worst_energy": float(E[ku]),
        "lower_worst_margin": float(lower[kl]),
        "lower_worst_energy": float(E[kl]),
        "holds": bool(upper[ku] >= -tol and lower[kl] >= -tol),
    }
