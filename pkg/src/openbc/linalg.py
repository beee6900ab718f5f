"""Small dense symmetric-matrix kernels.

Everything here works on real symmetric matrices of modest size (n <= 64):
cyclic Jacobi eigendecomposition, LDL^T congruence diagonalization, inertia
counts and positive semi-definiteness certificates with explicit tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

MAX_DIM = 64
ASYMMETRY_RTOL = 1e-12
ZERO_RTOL = 1e-10
PSD_TOL = 1e-10
JACOBI_SWEEPS = 30


class LinalgError(ValueError):
    pass


class AsymmetryError(LinalgError):
    pass


class NonConvergence(LinalgError):
    pass


class SingularPivot(LinalgError):
    """Raised by :func:`congruence_diag` when a 2x2 pivot would be needed."""


class SymMatrix:
    """Dense symmetric matrix.

    The input is symmetrized by averaging with its transpose; the discarded
    asymmetry is kept in ``asymmetry`` and must not exceed
    ``1e-12 * max|entry|``.
    """

    __slots__ = ("a", "asymmetry")

    def __init__(self, entries, *, rtol: float = ASYMMETRY_RTOL):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise LinalgError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] > MAX_DIM:
            raise LinalgError(f"dimension {a.shape[0]} exceeds {MAX_DIM}")
        if not np.all(np.isfinite(a)):
            raise LinalgError("matrix has non-finite entries")
        resid = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        if resid > rtol * scale:
            raise AsymmetryError(
                f"asymmetry {resid:.3e} exceeds {rtol:g} * max|entry| = {rtol * scale:.3e}"
            )
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self.a = a
        self.asymmetry = resid

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.a if dtype is None else self.a.astype(dtype)

    def __repr__(self) -> str:
        return f"SymMatrix({self.a.tolist()!r})"


SymLike = Union[SymMatrix, np.ndarray, list, float]


def as_sym(a: SymLike) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


@dataclass(frozen=True)
class Inertia:
    n_pos: int
    n_zero: int
    n_neg: int

    @property
    def n(self) -> int:
        return self.n_pos + self.n_zero + self.n_neg

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_pos, self.n_zero, self.n_neg)


@dataclass(frozen=True)
class DiagonalSplit:
    """Congruence ``T^T A T = diag(lam)`` with the sign partition of ``lam``.

    ``lam`` is sorted descending (ties by original index). Columns of ``T``
    and rows of ``T_inv`` follow the same order.
    """

    T: np.ndarray
    T_inv: np.ndarray
    lam: np.ndarray
    pos_idx: tuple[int, ...]
    zero_idx: tuple[int, ...]
    neg_idx: tuple[int, ...]
    zero_tol: float
    orthogonal: bool = False

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def inertia(self) -> Inertia:
        return Inertia(len(self.pos_idx), len(self.zero_idx), len(self.neg_idx))


@dataclass(frozen=True)
class CertResult:
    ok: bool
    margin: float
    witness: Optional[np.ndarray] = field(default=None, compare=False)


def zero_tol_for(lam: np.ndarray) -> float:
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    return ZERO_RTOL * max(1.0, top)


def _sorted_split(T, T_inv, lam, orthogonal) -> DiagonalSplit:
    n = lam.shape[0]
    order = np.lexsort((np.arange(n), -lam))
    lam = lam[order]
    T = T[:, order]
    T_inv = T_inv[order, :]
    tol = zero_tol_for(lam)
    pos = tuple(int(i) for i in np.flatnonzero(lam > tol))
    zero = tuple(int(i) for i in np.flatnonzero(np.abs(lam) <= tol))
    neg = tuple(int(i) for i in np.flatnonzero(lam < -tol))
    for arr in (T, T_inv, lam):
        arr.setflags(write=False)
    return DiagonalSplit(T, T_inv, lam, pos, zero, neg, tol, orthogonal)


def eig_sym(A: SymLike, *, max_sweeps: int = JACOBI_SWEEPS) -> DiagonalSplit:
    """Orthogonal diagonalization by cyclic Jacobi rotations.

    Raises NonConvergence if the off-diagonal mass has not dropped to
    roundoff level after ``max_sweeps`` full sweeps.
    """
    a = np.array(as_sym(A).a, dtype=float)
    n = a.shape[0]
    V = np.eye(n)
    scale = float(np.max(np.abs(a))) if n else 0.0
    if scale == 0.0:
        return _sorted_split(V, V.copy(), np.zeros(n), orthogonal=True)
    a /= scale
    target = 1e-15 * float(np.sqrt(np.sum(a * a)))
    converged = n <= 1
    for _ in range(max_sweeps + 1):
        off = float(np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)))
        if off <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    if not converged:
        raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    lam = np.diag(a) * scale
    return _sorted_split(V, V.T.copy(), lam, orthogonal=True)


def congruence_diag(A: SymLike) -> DiagonalSplit:
    """Non-orthogonal diagonalization via diagonally pivoted LDL^T.

    With ``Pi^T A Pi = L D L^T`` the transformation is ``T = Pi L^{-T}`` so
    that ``T^T A T = D``. Only 1x1 pivots are used: if every remaining
    diagonal entry is negligible while the trailing block is not, a 2x2
    pivot would be required and SingularPivot is raised instead.
    """
    a = np.array(as_sym(A).a, dtype=float)
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) if n else 0.0
    tol = ZERO_RTOL * max(1.0, scale)
    L = np.eye(n)
    perm = np.arange(n)
    d = np.zeros(n)
    for k in range(n):
        diag = np.abs(np.diag(a)[k:])
        p = k + int(np.argmax(diag))
        if diag[p - k] <= tol:
            rest = a[k:, k:]
            if np.max(np.abs(rest)) <= tol:
                d[k:] = np.diag(a)[k:]
                break
            raise SingularPivot(
                f"no usable 1x1 pivot at step {k}; trailing block needs a 2x2 pivot"
            )
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            a[:, [k, p]] = a[:, [p, k]]
            L[[k, p], :k] = L[[p, k], :k]
            perm[[k, p]] = perm[[p, k]]
        d[k] = a[k, k]
        col = a[k + 1:, k] / d[k]
        a[k + 1:, k + 1:] -= np.outer(col, a[k, k + 1:])
        L[k + 1:, k] = col
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
    Pi = np.eye(n)[:, perm]
    L_invT = np.linalg.solve(L.T, np.eye(n))
    T = Pi @ L_invT
    T_inv = L.T @ Pi.T
    return _sorted_split(T, T_inv, d, orthogonal=False)


def diagonalize(A: SymLike, method: str = "eig") -> DiagonalSplit:
    """Dispatch on ``method`` ("eig" or "congruence").

    The congruence route falls back to :func:`eig_sym` on SingularPivot.
    """
    if method == "eig":
        return eig_sym(A)
    if method == "congruence":
        try:
            return congruence_diag(A)
        except SingularPivot:
            return eig_sym(A)
    raise LinalgError(f"unknown diagonalization method {method!r}")


def inertia(A: SymLike) -> Inertia:
    return eig_sym(A).inertia


def is_psd(A: SymLike, strict: bool = False, tol: float = PSD_TOL) -> CertResult:
    """Certify ``A >= 0`` (or ``A > 0`` with ``strict``) by its smallest eigenvalue.

    On failure the witness is a unit vector ``v`` with ``v^T A v = margin``.
    """
    A = as_sym(A)
    if A.n == 0:
        return CertResult(True, float("inf"))
    split = eig_sym(A)
    margin = float(split.lam[-1])
    ok = margin > tol if strict else margin >= -tol
    witness = None
    if not ok:
        v = np.array(split.T[:, -1])
        witness = v / np.linalg.norm(v)
    return CertResult(ok, margin, witness)


def spectral_radius(M: SymLike) -> float:
    M = as_sym(M)
    if M.n == 0:
        return 0.0
    return float(np.max(np.abs(eig_sym(M).lam)))


def neumann_valid(M: SymLike, tol: float = PSD_TOL) -> bool:
    """True iff ``sum_k M^k`` converges with margin, i.e. rho(M) < 1 - tol."""
    return spectral_radius(M) < 1.0 - tol


def sqrt_abs(lam: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(np.asarray(lam, dtype=float)))
