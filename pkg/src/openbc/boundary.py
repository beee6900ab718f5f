"""Open boundary operators: split, certification and weak imposition.

The boundary quadratic form ``U^T At U`` is written as
``|A_plus U|^2 - |A_minus U|^2`` with ``A_plus = sqrt(Lam+) T^{-1}`` and
``A_minus = sqrt(|Lam-|) T^{-1}``. A boundary condition is the pair
(R, S) together with data g,

    (A_minus - R A_plus) U = S g,

and its weak imposition adds ``2 A_minus^T ((A_minus - R A_plus) U - S g)``
through a lifting operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import (
    CertResult,
    DiagonalSplit,
    SymLike,
    SymMatrix,
    as_sym,
    diagonalize,
    inertia,
    is_psd,
    neumann_valid,
)

class DimensionMismatch(ValueError):
    pass


class SNotSquare(DimensionMismatch):
    pass


class SingularScaling(ValueError):
    pass


@dataclass(frozen=True)
class SplitOperators:
    """``A_plus`` (n_plus x n) and ``A_minus`` (n_minus x n).

    Rows of ``A_plus`` belonging to zero diagonal entries are kept as
    explicit zero rows, so ``n_plus + n_minus == n`` always.
    """

    A_plus: np.ndarray
    A_minus: np.ndarray
    lam: np.ndarray = field(compare=False)

    @property
    def n(self) -> int:
        return self.A_plus.shape[1]

    @property
    def n_plus(self) -> int:
        return self.A_plus.shape[0]

    @property
    def n_minus(self) -> int:
        return self.A_minus.shape[0]


def build_split(split: DiagonalSplit) -> SplitOperators:
    Ti = split.T_inv
    n = split.n
    plus = list(split.pos_idx) + list(split.zero_idx)
    A_plus = np.zeros((len(plus), n))
    for row, i in enumerate(plus):
        if i in split.pos_idx:
            A_plus[row] = np.sqrt(split.lam[i]) * Ti[i]
    A_minus = np.array([np.sqrt(-split.lam[i]) * Ti[i] for i in split.neg_idx]).reshape(-1, n)
    return SplitOperators(A_plus, A_minus, np.array(split.lam))


def split_boundary_matrix(A_tilde: SymLike, method: str = "eig") -> SplitOperators:
    return build_split(diagonalize(A_tilde, method))


def boundary_form(A_tilde: SymLike, U) -> float:
    a = as_sym(A_tilde).a
    U = np.asarray(U, dtype=float)
    if U.shape != (a.shape[0],):
        raise DimensionMismatch(f"state of shape {U.shape} for a {a.shape[0]}x{a.shape[0]} matrix")
    return float(U @ a @ U)


def split_form(ops: SplitOperators, U) -> float:
    """``|A_plus U|^2 - |A_minus U|^2``; equals ``boundary_form`` by construction."""
    U = np.asarray(U, dtype=float)
    wp = ops.A_plus @ U
    wm = ops.A_minus @ U
    return float(wp @ wp - wm @ wm)


def _matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(1, -1)
    return a


def _check_shapes(R, S, n_plus=None, n_minus=None):
    S = _matrix(S)
    if S.size == 0:
        S = np.zeros((n_minus or 0, n_minus or 0))
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise SNotSquare(f"S must be square, got shape {S.shape}")
    if n_minus is None:
        n_minus = S.shape[0]
    if S.shape[0] != n_minus:
        raise DimensionMismatch(f"S is {S.shape[0]}x{S.shape[0]} but n_minus = {n_minus}")
    R = _matrix(R)
    if R.size == 0:
        if n_plus is None:
            n_plus = R.shape[1] if R.shape[0] == 0 else 0
        R = np.zeros((n_minus, n_plus))
    if n_plus is None:
        n_plus = R.shape[1]
    if R.shape != (n_minus, n_plus):
        raise DimensionMismatch(f"R has shape {R.shape}, expected ({n_minus}, {n_plus})")
    return R, S


@dataclass(frozen=True)
class BoundaryOperatorSet:
    split: SplitOperators
    R: np.ndarray
    S: np.ndarray
    G: Optional[Callable[[float], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        R, S = _check_shapes(self.R, self.S, self.split.n_plus, self.split.n_minus)
        if S.size:
            sv = np.linalg.svd(S, compute_uv=False)
            if sv[-1] <= 1e-10 * sv[0]:
                raise SingularScaling("S is numerically singular")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "S", S)

    @property
    def Sigma_tilde(self) -> np.ndarray:
        return 2.0 * self.split.A_minus.T @ self.S

    def data(self, t: float) -> np.ndarray:
        if self.G is None:
            return np.zeros(self.split.n_minus)
        return np.asarray(self.G(t), dtype=float).reshape(self.split.n_minus)


def coupling_for(n_minus, n_plus, R=None, S=None, r=0.0, s=1.0):
    """Pick (R, S) for the current characteristic counts.

    Explicit matrices are used when their shapes fit; otherwise fall back to
    ``r * eye(n_minus, n_plus)`` and ``s * I``.
    """
    R = None if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    S = None if S is None else np.atleast_2d(np.asarray(S, dtype=float))
    if R is None or R.shape != (n_minus, n_plus):
        R = r * np.eye(n_minus, n_plus)
    if S is None or S.shape != (n_minus, n_minus):
        S = s * np.eye(n_minus)
    return R, S


@dataclass(frozen=True)
class CertReport:
    r_semi: CertResult
    r_strict: CertResult
    s_cond: CertResult
    neumann_ok: bool
    n_plus: int
    n_minus: int

    @property
    def cases(self) -> dict[int, bool]:
        homogeneous = self.r_semi.ok
        inhomogeneous = self.r_strict.ok and self.s_cond.ok
        return {1: homogeneous, 2: inhomogeneous, 3: homogeneous, 4: inhomogeneous}

    def to_dict(self) -> dict:
        def res(c: CertResult):
            out = {"ok": bool(c.ok), "margin": _finite_or_none(c.margin)}
            if c.witness is not None:
                out["witness"] = [float(v) for v in c.witness]
            return out

        return {
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "r_semi": res(self.r_semi),
            "r_strict": res(self.r_strict),
            "s_cond": res(self.s_cond),
            "neumann_valid": bool(self.neumann_ok),
            "cases": {str(k): v for k, v in self.cases.items()},
        }


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


def s_condition_matrix(R, S) -> np.ndarray:
    """``I - S^T S - (R^T S)^T (I - R^T R)^{-1} (R^T S)``, via a dense solve."""
    R, S = _check_shapes(R, S)
    n_plus = R.shape[1]
    X = R.T @ S
    K = np.eye(n_plus) - R.T @ R
    M = np.eye(S.shape[0]) - S.T @ S
    if n_plus:
        M = M - X.T @ np.linalg.solve(K, X)
    return 0.5 * (M + M.T)


def certify(R, S, n_plus: Optional[int] = None, n_minus: Optional[int] = None) -> CertReport:
    R, S = _check_shapes(R, S, n_plus, n_minus)
    n_minus, n_plus = R.shape
    RtR = R.T @ R
    RtR = 0.5 * (RtR + RtR.T)
    K = SymMatrix(np.eye(n_plus) - RtR)
    r_semi = is_psd(K)
    r_strict = is_psd(K, strict=True)
    neumann_ok = neumann_valid(SymMatrix(RtR))
    if neumann_ok:
        s_cond = is_psd(SymMatrix(s_condition_matrix(R, S)))
    else:
        s_cond = CertResult(False, float("nan"))
    return CertReport(r_semi, r_strict, s_cond, neumann_ok, n_plus, n_minus)


def strong_bc_solve(ops, w_plus, g) -> np.ndarray:
    """Incoming content ``A_minus U`` enforced by the strong condition."""
    return ops.R @ np.asarray(w_plus, dtype=float) + ops.S @ np.asarray(g, dtype=float)


def strong_boundary_energy(ops, w_plus, g) -> float:
    w_plus = np.asarray(w_plus, dtype=float)
    w_minus = strong_bc_solve(ops, w_plus, g)
    return float(w_plus @ w_plus - w_minus @ w_minus)


def strong_energy_infimum(R, S, g):
    """Minimum over ``w_plus`` of the strongly imposed boundary term.

    Returns ``(value, w_plus_star)``. Requires ``I - R^T R`` positive
    definite; otherwise the infimum is ``-inf`` and no minimizer is returned.
    """
    R, S = _check_shapes(R, S)
    g = np.asarray(g, dtype=float)
    K = np.eye(R.shape[1]) - R.T @ R
    if not is_psd(SymMatrix(0.5 * (K + K.T)), strict=True).ok:
        return float("-inf"), None
    Sg = S @ g
    w = np.linalg.solve(K, R.T @ Sg)
    return float(w @ K @ w - 2.0 * w @ (R.T @ Sg) - Sg @ Sg), w


def weak_penalty(ops: BoundaryOperatorSet, U, g) -> np.ndarray:
    """Boundary density ``2 A_minus^T ((A_minus - R A_plus) U - S g)``."""
    U = np.asarray(U, dtype=float)
    sp = ops.split
    if sp.n_minus == 0:
        return np.zeros(sp.n)
    resid = (sp.A_minus - ops.R @ sp.A_plus) @ U - ops.S @ np.asarray(g, dtype=float)
    return 2.0 * sp.A_minus.T @ resid


def weak_integrand(ops: BoundaryOperatorSet, U, g) -> float:
    """Boundary term after weak imposition, in characteristic form.

    ``|w+|^2 + |w-|^2 - 2 w-^T R w+ - 2 w-^T S g`` with ``w+- = A_+- U``.
    """
    U = np.asarray(U, dtype=float)
    g = np.asarray(g, dtype=float)
    wp = ops.split.A_plus @ U
    wm = ops.split.A_minus @ U
    return float(wp @ wp + wm @ wm - 2.0 * wm @ (ops.R @ wp) - 2.0 * wm @ (ops.S @ g))


def weak_boundary_quadratic(R, S) -> SymMatrix:
    """Matrix M with ``integrand + |g|^2 = (w+, w-, g)^T M (w+, w-, g)``."""
    R, S = _check_shapes(R, S)
    m, p = R.shape
    M = np.block([
        [np.eye(p), -R.T, np.zeros((p, m))],
        [-R, np.eye(m), -S],
        [np.zeros((m, p)), -S.T, np.eye(m)],
    ])
    return SymMatrix(M)


@dataclass(frozen=True)
class ViscousBoundaryBlock:
    """``[[At, -I], [-I, 0]]`` acting on the stacked state ``(U, eps * F)``."""

    base: SymMatrix
    block: SymMatrix

    @property
    def n(self) -> int:
        return self.base.n


def viscous_block(A_tilde: SymLike) -> ViscousBoundaryBlock:
    base = as_sym(A_tilde)
    n = base.n
    I = np.eye(n)
    return ViscousBoundaryBlock(base, SymMatrix(np.block([[base.a, -I], [-I, np.zeros((n, n))]])))


def viscous_inertia(A_tilde: SymLike) -> tuple[int, int, int]:
    return inertia(viscous_block(A_tilde).block).as_tuple()
