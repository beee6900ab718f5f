"""Skew-symmetric 1D models ``P U_t + (A U)_x + A^T U_x + C U = eps D_x + f``.

A model supplies the norm matrix P, the matrices A(U), C(U), a viscous
flux ``D(U, U_x) = K(U) U_x`` and the diffusion coefficient eps. Two
models ship: skew-split Burgers and the symmetric 2x2 wave system.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import SymMatrix, is_psd

Forcing = Callable[[np.ndarray, float], np.ndarray]


class ModelError(ValueError):
    pass


class ShapeMismatch(ModelError):
    pass


@dataclass(frozen=True)
class SkewModel:
    """Base class; subclasses override the per-state matrix callbacks.

    Field arrays have shape (N, n): one row per grid node.
    """

    epsilon: float = 0.0
    forcing: Optional[Forcing] = dataclasses.field(default=None, compare=False)

    name = "skew"
    n = 1

    @property
    def P(self) -> np.ndarray:
        return np.eye(self.n)

    def A(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def C(self, u: np.ndarray) -> np.ndarray:
        return np.zeros((self.n, self.n))

    def K(self, u: np.ndarray) -> np.ndarray:
        return np.eye(self.n)

    # Vectorized forms; overridden where a closed form is cheap.
    def A_field(self, U: np.ndarray) -> np.ndarray:
        return np.stack([self.A(u) for u in U])

    def C_field(self, U: np.ndarray) -> np.ndarray:
        return np.stack([self.C(u) for u in U])

    def K_field(self, U: np.ndarray) -> np.ndarray:
        return np.stack([self.K(u) for u in U])

    def D(self, u: np.ndarray, u_x: np.ndarray) -> np.ndarray:
        return self.K(u) @ u_x

    def D_field(self, U: np.ndarray, U_x: np.ndarray) -> np.ndarray:
        return np.einsum("jab,jb->ja", self.K_field(U), U_x)

    def max_speed(self, U: np.ndarray) -> float:
        """Largest characteristic speed of the inviscid operator over the field."""
        raise NotImplementedError

    def strong_residual(self, U, U_t, U_x, U_xx) -> np.ndarray:
        """``P U_t + (A U)_x + A^T U_x + C U - eps D_x`` for smooth fields."""
        raise NotImplementedError


@dataclass(frozen=True)
class BurgersModel(SkewModel):
    """``u_t + (u u / 3)_x + (u / 3) u_x = eps u_xx``."""

    name = "burgers"
    n = 1

    def A(self, u):
        return np.array([[u[0] / 3.0]])

    def A_field(self, U):
        return (U[:, 0] / 3.0).reshape(-1, 1, 1)

    def C_field(self, U):
        return np.zeros((U.shape[0], 1, 1))

    def K_field(self, U):
        return np.ones((U.shape[0], 1, 1))

    def max_speed(self, U):
        return float(np.max(np.abs(U))) if U.size else 0.0

    def strong_residual(self, U, U_t, U_x, U_xx):
        return U_t + U * U_x - self.epsilon * U_xx


WAVE_A = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class LinearSymModel(SkewModel):
    """Constant symmetric system; the skew split doubles A, so speeds are +-2."""

    name = "linear"
    n = 2

    def A(self, u):
        return WAVE_A.copy()

    def A_field(self, U):
        return np.broadcast_to(WAVE_A, (U.shape[0], 2, 2))

    def C_field(self, U):
        return np.zeros((U.shape[0], 2, 2))

    def K_field(self, U):
        return np.broadcast_to(np.eye(2), (U.shape[0], 2, 2))

    def max_speed(self, U):
        return 2.0

    def strong_residual(self, U, U_t, U_x, U_xx):
        return U_t + 2.0 * U_x @ WAVE_A.T - self.epsilon * U_xx


MODELS = {"burgers": BurgersModel, "linear": LinearSymModel}


def check_model(model: SkewModel, rng=None, samples: int = 100) -> None:
    """Registration checks: P symmetric PSD, C skew, ``U_x^T D >= 0``."""
    rng = np.random.default_rng(0) if rng is None else rng
    if model.epsilon < 0 or not np.isfinite(model.epsilon):
        raise ModelError(f"epsilon must be finite and non-negative, got {model.epsilon}")
    if not is_psd(SymMatrix(model.P)).ok:
        raise ModelError("P is not positive semi-definite")
    U = rng.uniform(-2.0, 2.0, size=(samples, model.n))
    U_x = rng.uniform(-2.0, 2.0, size=(samples, model.n))
    C = model.C_field(U)
    if np.max(np.abs(C + np.transpose(C, (0, 2, 1))), initial=0.0) > 1e-12:
        raise ModelError("C(U) + C(U)^T != 0")
    if np.min(np.einsum("ja,ja->j", U_x, model.D_field(U, U_x))) < -1e-12:
        raise ModelError("viscous flux is not dissipative")


def make_model(name: str, epsilon: float = 0.0, forcing: Optional[Forcing] = None) -> SkewModel:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    model = cls(epsilon=float(epsilon), forcing=forcing)
    check_model(model)
    return model


def boundary_matrix(model: SkewModel, u_b, normal: int) -> SymMatrix:
    """Symmetric part of ``normal * A(u_b)``."""
    if normal not in (-1, 1):
        raise ModelError(f"normal must be +1 or -1, got {normal}")
    a = normal * model.A(np.asarray(u_b, dtype=float).reshape(model.n))
    return SymMatrix(0.5 * (a + a.T))


def volume_terms(model: SkewModel, U, op, t: float = 0.0) -> np.ndarray:
    """``P U_t`` from interior terms: ``-(D1(AU) + A^T D1 U + CU) + eps D1 D + f``."""
    U = np.asarray(U, dtype=float)
    if U.shape != (op.N, model.n):
        raise ShapeMismatch(f"field shape {U.shape}, expected {(op.N, model.n)}")
    A = model.A_field(U)
    AU = np.einsum("jab,jb->ja", A, U)
    U_x = op.D1 @ U
    out = -(op.D1 @ AU) - np.einsum("jba,jb->ja", A, U_x)
    out -= np.einsum("jab,jb->ja", model.C_field(U), U)
    if model.epsilon > 0:
        out += model.epsilon * (op.D1 @ model.D_field(U, U_x))
    if model.forcing is not None:
        out += model.forcing(op.x, t)
    return out


def rhs(model: SkewModel, U, op, t: float = 0.0) -> np.ndarray:
    """Volume-only time derivative; boundary penalties are added by the solver."""
    return apply_P_inverse(model, volume_terms(model, U, op, t))


def apply_P_inverse(model: SkewModel, F: np.ndarray) -> np.ndarray:
    P = model.P
    if not is_psd(SymMatrix(P), strict=True).ok:
        raise ModelError("semi-definite P cannot be inverted; the solver needs a definite norm")
    if np.array_equal(P, np.eye(model.n)):
        return F
    return np.linalg.solve(P, F.T).T


# Manufactured solutions: exact field and its t, x, xx derivatives.

@dataclass(frozen=True)
class Manufactured:
    u: Callable
    u_t: Callable
    u_x: Callable
    u_xx: Callable

    def forcing_for(self, model: SkewModel) -> Forcing:
        def f(x, t):
            return model.strong_residual(self.u(x, t), self.u_t(x, t), self.u_x(x, t), self.u_xx(x, t))
        return f


def _col(*cols):
    return np.stack(cols, axis=-1)


TWO_PI = 2.0 * np.pi

BURGERS_WAVE = Manufactured(
    u=lambda x, t: _col(np.sin(TWO_PI * (x - t))),
    u_t=lambda x, t: _col(-TWO_PI * np.cos(TWO_PI * (x - t))),
    u_x=lambda x, t: _col(TWO_PI * np.cos(TWO_PI * (x - t))),
    u_xx=lambda x, t: _col(-TWO_PI**2 * np.sin(TWO_PI * (x - t))),
)

LINEAR_WAVE = Manufactured(
    u=lambda x, t: _col(np.sin(TWO_PI * (x - t)), np.cos(TWO_PI * (x + t))),
    u_t=lambda x, t: _col(-TWO_PI * np.cos(TWO_PI * (x - t)), -TWO_PI * np.sin(TWO_PI * (x + t))),
    u_x=lambda x, t: _col(TWO_PI * np.cos(TWO_PI * (x - t)), -TWO_PI * np.sin(TWO_PI * (x + t))),
    u_xx=lambda x, t: _col(-TWO_PI**2 * np.sin(TWO_PI * (x - t)), -TWO_PI**2 * np.cos(TWO_PI * (x + t))),
)

MANUFACTURED = {"burgers": BURGERS_WAVE, "linear": LINEAR_WAVE}


def manufactured_model(name: str, epsilon: float = 0.0):
    """Model with forcing that makes the registered exact solution hold."""
    mms = MANUFACTURED[name]
    base = make_model(name, epsilon)
    return dataclasses.replace(base, forcing=mms.forcing_for(base)), mms
