"""Anderson Hamiltonian restricted to a finite box of Z^d (d = 1, 2).

The restriction is the coordinate projection ``P H P*``: every site keeps the
full graph-Laplacian diagonal ``2d``, and only couplings that leave the box are
dropped. Sites are ordered lexicographically (row-major, last axis fastest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class BoxShape:
    side_lengths: tuple[int, ...]

    def __post_init__(self):
        sides = tuple(int(s) for s in np.atleast_1d(self.side_lengths))
        if len(sides) not in (1, 2):
            raise ValueError(f"only d = 1, 2 are supported, got d = {len(sides)}")
        if any(s < 1 for s in sides):
            raise ValueError("side lengths must be positive")
        object.__setattr__(self, "side_lengths", sides)

    @property
    def dimension(self) -> int:
        return len(self.side_lengths)

    @property
    def volume(self) -> int:
        return math.prod(self.side_lengths)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    shape: BoxShape
    potential: np.ndarray

    def __post_init__(self):
        if not isinstance(self.shape, BoxShape):
            object.__setattr__(self, "shape", BoxShape(self.shape))
        v = np.array(self.potential, dtype=float).ravel()
        if v.size != self.shape.volume:
            raise ValueError(
                f"potential has {v.size} values, box {self.shape.side_lengths} has {self.shape.volume} sites")
        v.setflags(write=False)
        object.__setattr__(self, "potential", v)

    @property
    def n(self) -> int:
        return self.shape.volume

    @property
    def diagonal(self) -> np.ndarray:
        return 2.0 * self.shape.dimension + self.potential

    def offdiagonal(self) -> np.ndarray:
        """Sub-diagonal of a 1D operator (all ``-1``)."""
        if self.shape.dimension != 1:
            raise ValueError("off-diagonal pair storage only exists for 1D boxes")
        return -np.ones(self.n - 1)

    def edges(self) -> np.ndarray:
        """Adjacent site pairs ``(i, j)`` with ``i < j`` inside the box."""
        idx = np.arange(self.n).reshape(self.shape.side_lengths)
        pairs = []
        for axis in range(self.shape.dimension):
            lo = np.take(idx, np.arange(idx.shape[axis] - 1), axis=axis).ravel()
            hi = np.take(idx, np.arange(1, idx.shape[axis]), axis=axis).ravel()
            pairs.append(np.column_stack([lo, hi]))
        return np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=int)

    def to_sparse(self) -> sparse.csr_matrix:
        e = self.edges()
        rows = np.concatenate([np.arange(self.n), e[:, 0], e[:, 1]])
        cols = np.concatenate([np.arange(self.n), e[:, 1], e[:, 0]])
        vals = np.concatenate([self.diagonal, -np.ones(2 * len(e))])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def bandwidth(self) -> int:
        """Half-bandwidth of the matrix in lexicographic site order."""
        if self.n == 1:
            return 0
        return 1 if self.shape.dimension == 1 else self.shape.side_lengths[-1]

    def norm_bound(self) -> float:
        """Row-sum bound on the operator norm."""
        return float(np.max(np.abs(self.diagonal)) + 2 * self.shape.dimension)

    def gershgorin(self) -> tuple[float, float]:
        d = self.shape.dimension
        return float(self.potential.min()), float(4 * d + self.potential.max())

    def to_dict(self) -> dict:
        return {"shape": list(self.shape.side_lengths), "potential": self.potential.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeOperator":
        return cls(BoxShape(tuple(d["shape"])), d["potential"])


def build_anderson(shape: BoxShape | tuple[int, ...] | int, potential) -> LatticeOperator:
    if not isinstance(shape, BoxShape):
        shape = BoxShape(tuple(np.atleast_1d(shape)))
    return LatticeOperator(shape, potential)


def free_operator(shape: BoxShape | tuple[int, ...] | int) -> LatticeOperator:
    if not isinstance(shape, BoxShape):
        shape = BoxShape(tuple(np.atleast_1d(shape)))
    return LatticeOperator(shape, np.zeros(shape.volume))


def matvec(op: LatticeOperator, psi) -> np.ndarray:
    """Apply ``H`` by stencil: ``sum over in-box neighbours (psi(n) - psi(m))``
    plus the dropped-neighbour terms ``psi(n)`` and the potential."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (op.n,):
        raise ValueError(f"vector of length {op.n} expected, got shape {psi.shape}")
    grid = psi.reshape(op.shape.side_lengths)
    out = (2.0 * op.shape.dimension) * grid + op.potential.reshape(grid.shape) * grid
    for axis in range(op.shape.dimension):
        n = grid.shape[axis]
        if n < 2:
            continue
        fwd = [slice(None)] * grid.ndim
        bwd = [slice(None)] * grid.ndim
        fwd[axis], bwd[axis] = slice(1, None), slice(None, -1)
        out[tuple(bwd)] -= grid[tuple(fwd)]
        out[tuple(fwd)] -= grid[tuple(bwd)]
    return out.ravel()


def shift_potential(op: LatticeOperator, c: float) -> LatticeOperator:
    """Same box, potential ``V + c``; the spectrum moves by exactly ``c``."""
    return LatticeOperator(op.shape, op.potential + c)
