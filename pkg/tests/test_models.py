import dataclasses

import numpy as np
import pytest
import sympy as sp

from openbc.linalg import eig_sym
from openbc.models import (
    BURGERS_WAVE,
    LINEAR_WAVE,
    BurgersModel,
    LinearSymModel,
    ModelError,
    ShapeMismatch,
    SkewModel,
    apply_P_inverse,
    boundary_matrix,
    check_model,
    make_model,
    manufactured_model,
    rhs,
    volume_terms,
)
from openbc.sbp import NORMALS, make_sbp


@dataclasses.dataclass(frozen=True)
class CoupledModel(SkewModel):
    """Nonsymmetric, state-dependent A with a skew zeroth-order term."""

    name = "coupled"
    n = 2

    def A(self, u):
        return np.array([[u[0], 1.0 + u[1] ** 2], [0.3, -0.5 * u[1]]])

    def C(self, u):
        c = 1.0 + u[0]
        return np.array([[0.0, c], [-c, 0.0]])


@dataclasses.dataclass(frozen=True)
class SemiNormModel(SkewModel):
    name = "seminorm"
    n = 2

    @property
    def P(self):
        return np.diag([1.0, 0.0])

    def A(self, u):
        return np.eye(2)


@dataclasses.dataclass(frozen=True)
class BadCModel(SkewModel):
    name = "badc"
    n = 1

    def A(self, u):
        return np.eye(1)

    def C(self, u):
        return np.eye(1)


@dataclasses.dataclass(frozen=True)
class AntiDiffusiveModel(SkewModel):
    name = "antidiff"
    n = 1

    def A(self, u):
        return np.eye(1)

    def K(self, u):
        return -np.eye(1)


class TestBoundaryMatrix:
    def test_burgers_outflow(self):
        assert boundary_matrix(BurgersModel(), [3.0], 1).a == pytest.approx(np.array([[1.0]]))

    def test_burgers_reversed(self):
        a = boundary_matrix(BurgersModel(), [-3.0], 1)
        assert a.a == pytest.approx(np.array([[-1.0]]))
        assert eig_sym(a).inertia.n_neg == 1

    def test_linear_left(self):
        a = boundary_matrix(LinearSymModel(), [0.0, 0.0], -1)
        assert np.array_equal(a.a, [[0.0, -1.0], [-1.0, 0.0]])
        assert np.allclose(eig_sym(a).lam, [1.0, -1.0])

    def test_linear_right_one_each(self):
        s = eig_sym(boundary_matrix(LinearSymModel(), [0.4, -2.0], 1))
        assert s.inertia.as_tuple() == (1, 0, 1)

    def test_bad_normal(self):
        with pytest.raises(ModelError):
            boundary_matrix(BurgersModel(), [1.0], 0)


class TestCheckModel:
    def test_shipped_models_pass(self):
        for name in ("burgers", "linear"):
            check_model(make_model(name, 0.01))

    def test_unknown_name(self):
        with pytest.raises(ModelError):
            make_model("euler")

    @pytest.mark.parametrize("model", [BadCModel(), AntiDiffusiveModel(), BurgersModel(epsilon=-1.0)])
    def test_rejections(self, model):
        with pytest.raises(ModelError):
            check_model(model)

    def test_semi_definite_norm_rejected(self):
        model = SemiNormModel()
        check_model(model)
        op = make_sbp(2, 9)
        with pytest.raises(ModelError):
            rhs(model, np.ones((9, 2)), op)

    def test_general_norm_is_inverted(self):
        model = CoupledModel()
        F = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(apply_P_inverse(model, F), F)


def test_skew_split_is_burgers_flux_symbolically():
    x = sp.symbols("x")
    u = sp.Function("u")(x)
    skew = sp.diff(u * u / 3, x) + (u / 3) * sp.diff(u, x)
    assert sp.simplify(skew - u * sp.diff(u, x)) == 0


def test_burgers_forcing_symbolic():
    x, t, eps = sp.symbols("x t epsilon")
    u = sp.sin(2 * sp.pi * (x - t))
    f = sp.diff(u, t) + sp.diff(u * u / 3, x) + u / 3 * sp.diff(u, x) - eps * sp.diff(u, x, 2)
    f_num = sp.lambdify((x, t, eps), f, "numpy")
    model, mms = manufactured_model("burgers", 0.01)
    xs = np.linspace(0, 1, 17)
    assert np.allclose(model.forcing(xs, 0.3)[:, 0], f_num(xs, 0.3, 0.01), atol=1e-12)


@pytest.mark.parametrize("name, eps", [("burgers", 0.0), ("burgers", 0.05), ("linear", 0.0), ("linear", 0.02)])
def test_forcing_matches_finite_differences(name, eps):
    model, mms = manufactured_model(name, eps)
    x = np.linspace(0.05, 0.95, 11)
    t, d = 0.37, 1e-4
    u = mms.u(x, t)
    u_t = (mms.u(x, t + d) - mms.u(x, t - d)) / (2 * d)
    u_x = (mms.u(x + d, t) - mms.u(x - d, t)) / (2 * d)
    u_xx = (mms.u(x + d, t) - 2 * u + mms.u(x - d, t)) / d**2
    if name == "linear":
        # constant symmetric A: (AU)_x + A^T U_x = 2 A U_x
        strong = u_t + 2 * np.einsum("jab,jb->ja", model.A_field(u), u_x)
    else:
        strong = u_t + u * u_x
    strong = strong - eps * u_xx
    assert np.allclose(model.forcing(x, t), strong, atol=1e-5)


class TestRhs:
    @pytest.mark.parametrize("name, value", [("burgers", [0.7]), ("linear", [0.3, -1.1])])
    def test_constant_field_is_steady(self, name, value):
        op = make_sbp(2, 21)
        U = np.tile(value, (21, 1))
        assert np.max(np.abs(rhs(make_model(name), U, op))) <= 1e-13

    def test_linear_sine(self):
        errs = []
        for N in (41, 81):
            op = make_sbp(2, N)
            U = np.zeros((N, 2))
            U[:, 0] = np.sin(np.pi * op.x)
            du = rhs(make_model("linear"), U, op)
            assert not du[:, 0].any()
            exact = -2 * np.pi * np.cos(np.pi * op.x)
            errs.append(np.max(np.abs(du[1:-1, 1] - exact[1:-1])))
        assert errs[1] < errs[0] / 3.5
        assert errs[0] < 0.05

    def test_burgers_manufactured_consistency(self):
        errs = []
        for N in (41, 81, 161):
            model, mms = manufactured_model("burgers", 0.01)
            op = make_sbp(2, N)
            du = rhs(model, mms.u(op.x, 0.2), op, 0.2)
            errs.append(np.max(np.abs(du - mms.u_t(op.x, 0.2))[3:-3]))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.8)

    def test_shape_checked(self):
        with pytest.raises(ShapeMismatch):
            rhs(make_model("linear"), np.zeros((5, 1)), make_sbp(2, 5))


def energy_rate_and_boundary(model, U, op):
    vol = volume_terms(model, U, op)
    rate = op.inner(U @ model.P.T, vol)
    bterms = 0.0
    for side in ("left", "right"):
        u_b = U[op.boundary_index(side)]
        a = NORMALS[side] * model.A(u_b)
        bterms += u_b @ (0.5 * (a + a.T)) @ u_b
    return rate, bterms


@pytest.mark.parametrize("model", [BurgersModel(), LinearSymModel(), CoupledModel()], ids=lambda m: m.name)
@pytest.mark.parametrize("order", [2, 4])
def test_volume_terms_cancel(model, order):
    rng = np.random.default_rng(7)
    op = make_sbp(order, 33)
    for _ in range(20):
        U = rng.uniform(-2, 2, (33, model.n))
        rate, bterms = energy_rate_and_boundary(model, U, op)
        scale = np.sum(np.abs(volume_terms(model, U, op)) * np.abs(U) * op.pnorm[:, None]) + abs(bterms)
        assert abs(rate + bterms) <= 1e-11 * max(scale, 1.0)


def test_skew_form_tracks_conservative_solver():
    def conservative_rhs(u, op):
        return -(op.D1 @ (0.5 * u * u))

    def integrate(f, u, dt, steps):
        for _ in range(steps):
            k1 = f(u)
            k2 = f(u + 0.5 * dt * k1)
            k3 = f(u + 0.5 * dt * k2)
            k4 = f(u + dt * k3)
            u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return u

    model = BurgersModel()
    diffs = []
    for N in (101, 201, 401):
        op = make_sbp(2, N)
        u0 = 0.5 * np.exp(-(((op.x - 0.5) / 0.08) ** 2))
        dt = 0.25 * op.h
        steps = round(0.1 / dt)
        skew = integrate(lambda u: rhs(model, u[:, None], op)[:, 0], u0, dt, steps)
        cons = integrate(lambda u: conservative_rhs(u, op), u0, dt, steps)
        diffs.append(np.sqrt(op.inner(skew - cons, skew - cons)))
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(orders > 1.7), orders


def test_manufactured_fields_are_consistent():
    x = np.linspace(0, 1, 5)
    assert BURGERS_WAVE.u(x, 0.0).shape == (5, 1)
    assert LINEAR_WAVE.u(x, 0.0).shape == (5, 2)
