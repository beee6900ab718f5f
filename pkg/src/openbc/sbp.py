"""Diagonal-norm summation-by-parts first-derivative operators on [0, 1].

``D1 = Pnorm^{-1} Q`` with ``Q + Q^T = diag(-1, 0, ..., 0, 1)``. The
coefficients are stored as exact fractions so the SBP property can be
checked without rounding; the float matrices are derived from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Fr

import numpy as np


class GridTooSmall(ValueError):
    pass


# Left closures. Right closures follow from Q[N-1-i, N-1-j] = -Q[i, j].
_CLOSURES = {
    2: {
        "weights": [Fr(1, 2)],
        "rows": [[Fr(-1, 2), Fr(1, 2)]],
        "interior": [Fr(-1, 2), Fr(0), Fr(1, 2)],
    },
    4: {
        "weights": [Fr(17, 48), Fr(59, 48), Fr(43, 48), Fr(49, 48)],
        "rows": [
            [Fr(-1, 2), Fr(59, 96), Fr(-1, 12), Fr(-1, 32)],
            [Fr(-59, 96), Fr(0), Fr(59, 96), Fr(0)],
            [Fr(1, 12), Fr(-59, 96), Fr(0), Fr(59, 96), Fr(-1, 12)],
            [Fr(1, 32), Fr(0), Fr(-59, 96), Fr(0), Fr(2, 3), Fr(-1, 12)],
        ],
        "interior": [Fr(1, 12), Fr(-2, 3), Fr(0), Fr(2, 3), Fr(-1, 12)],
    },
}

BOUNDARY_ORDER = {2: 1, 4: 2}


@dataclass(frozen=True)
class SbpOperator:
    order: int
    N: int
    h: float
    pnorm: np.ndarray
    Q: np.ndarray
    D1: np.ndarray
    x: np.ndarray
    q_exact: dict = field(repr=False, compare=False)
    w_exact: tuple = field(repr=False, compare=False)

    @property
    def closure_width(self) -> int:
        return len(_CLOSURES[self.order]["weights"])

    def boundary_index(self, side: str) -> int:
        if side == "left":
            return 0
        if side == "right":
            return self.N - 1
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    def inner(self, U, V) -> float:
        """Discrete ``int U . V dx`` for (N,) or (N, n) arrays."""
        U = np.asarray(U, dtype=float).reshape(self.N, -1)
        V = np.asarray(V, dtype=float).reshape(self.N, -1)
        return float(np.sum(self.pnorm[:, None] * U * V))


NORMALS = {"left": -1, "right": 1}


def make_sbp(order: int, N: int) -> SbpOperator:
    if order not in _CLOSURES:
        raise ValueError(f"unsupported SBP order {order}; available: {sorted(_CLOSURES)}")
    spec = _CLOSURES[order]
    width = len(spec["weights"])
    if N < max(2 * width, 2):
        raise GridTooSmall(f"order {order} needs N >= {2 * width}, got {N}")
    q: dict[tuple[int, int], Fr] = {}
    for i, row in enumerate(spec["rows"]):
        for j, c in enumerate(row):
            if c:
                q[(i, j)] = c
                q[(N - 1 - i, N - 1 - j)] = -c
    half = len(spec["interior"]) // 2
    for i in range(width, N - width):
        for k, c in enumerate(spec["interior"]):
            if c:
                q[(i, i + k - half)] = c
    weights = list(spec["weights"]) + [Fr(1)] * (N - 2 * width) + list(reversed(spec["weights"]))
    h = 1.0 / (N - 1)
    Q = np.zeros((N, N))
    for (i, j), c in q.items():
        Q[i, j] = float(c)
    pnorm = h * np.array([float(w) for w in weights])
    D1 = Q / pnorm[:, None]
    x = np.linspace(0.0, 1.0, N)
    for arr in (pnorm, Q, D1, x):
        arr.setflags(write=False)
    return SbpOperator(order, N, h, pnorm, Q, D1, x, q, tuple(weights))


def sbp_defect_exact(op: SbpOperator) -> dict:
    """Nonzero entries of ``Q + Q^T - diag(-1, 0, ..., 0, 1)`` in exact arithmetic."""
    total: dict[tuple[int, int], Fr] = {}
    for (i, j), c in op.q_exact.items():
        total[(i, j)] = total.get((i, j), Fr(0)) + c
        total[(j, i)] = total.get((j, i), Fr(0)) + c
    total[(0, 0)] = total.get((0, 0), Fr(0)) + 1
    last = op.N - 1
    total[(last, last)] = total.get((last, last), Fr(0)) - 1
    return {k: v for k, v in total.items() if v != 0}


def sat_term(op: SbpOperator, side: str, density) -> np.ndarray:
    """Discrete lifting of a boundary density.

    Returns a field that is zero except at the boundary node, where it is
    ``-density / pnorm[idx]``; its energy product is ``-U_b . density``.
    """
    density = np.asarray(density, dtype=float)
    idx = op.boundary_index(side)
    out = np.zeros((op.N, density.shape[0]))
    out[idx] = -density / op.pnorm[idx]
    return out


def viscous_sat_term(op: SbpOperator, side: str, epsilon: float, K_b, flux_density) -> np.ndarray:
    """Lifting for the flux part of the stacked boundary state ``(U, eps F)``.

    With ``eps F = normal * eps * K_b (D1 U)_b / 2`` the returned field has
    energy product ``-(eps F) . flux_density``.
    """
    idx = op.boundary_index(side)
    v = np.asarray(K_b, dtype=float).T @ np.asarray(flux_density, dtype=float)
    col = op.D1[idx] / op.pnorm
    return -(0.5 * NORMALS[side] * epsilon) * np.outer(col, v)
