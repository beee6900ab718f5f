"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary."""

import math
import time

import numpy as np
import pytest

from openbc.boundary import (
    boundary_form,
    certify,
    split_boundary_matrix,
    split_form,
    strong_energy_infimum,
    viscous_inertia,
    weak_boundary_quadratic,
)
from openbc.cli import bundled_configs, load_config, main
from openbc.linalg import SingularPivot, congruence_diag, diagonalize, eig_sym, is_psd
from openbc.models import BurgersModel, LinearSymModel, volume_terms
from openbc.sbp import NORMALS, make_sbp
from openbc.solver import convergence_study, run


def random_sym(rng, n):
    a = rng.uniform(-1, 1, (n, n))
    return 0.5 * (a + a.T)


@pytest.mark.acceptance(1, "split identity |U^T At U - (|A+U|^2 - |A-U|^2)| <= 1e-11 (1 + |q|), < 5 s")
def test_split_identity():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        a = random_sym(rng, n)
        ops = split_boundary_matrix(a)
        U = rng.standard_normal((100, n))
        q = np.einsum("ki,ij,kj->k", U, a, U)
        wp = U @ ops.A_plus.T
        wm = U @ ops.A_minus.T
        split = np.sum(wp * wp, 1) - np.sum(wm * wm, 1)
        worst = max(worst, float(np.max(np.abs(q - split) / (1 + np.abs(q)))))
        assert boundary_form(a, U[0]) == pytest.approx(q[0], rel=1e-14, abs=1e-14)
        assert split_form(ops, U[0]) == pytest.approx(split[0], rel=1e-14, abs=1e-14)
    elapsed = time.perf_counter() - start
    print(f"worst relative split error {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-11
    assert elapsed < 5.0


@pytest.mark.acceptance(2, "Sylvester signature: eig_sym and congruence inertias agree on 1000 matrices, < 5 s")
def test_signature_invariance():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    fallbacks = 0
    for _ in range(1000):
        a = random_sym(rng, int(rng.integers(1, 9)))
        try:
            cong = congruence_diag(a)
        except SingularPivot:
            fallbacks += 1
            cong = diagonalize(a, "congruence")
        assert cong.inertia == eig_sym(a).inertia
    elapsed = time.perf_counter() - start
    print(f"{fallbacks} congruence fallbacks, {elapsed:.2f} s")
    assert elapsed < 5.0


def _validate_exit(tmp_path, r, s):
    R = tmp_path / "R.txt"
    S = tmp_path / "S.txt"
    R.write_text(repr(float(r)) + "\n")
    S.write_text(repr(float(s)) + "\n")
    return main(["validate", str(R), str(S)])


@pytest.mark.acceptance(3, "scalar threshold s* = sqrt(0.75) +- 1e-9 via validate; strong infimum -1 within 1e-6")
def test_scalar_threshold(tmp_path, capsys):
    s_star = math.sqrt(0.75)
    assert _validate_exit(tmp_path, 0.5, s_star - 1e-9) == 0
    assert _validate_exit(tmp_path, 0.5, s_star + 1e-9) == 2
    for s in (0.5, 0.8, 0.86):
        assert _validate_exit(tmp_path, 0.5, s) == 0
    for s in (0.87, 0.9, 1.0):
        assert _validate_exit(tmp_path, 0.5, s) == 2
    capsys.readouterr()
    value, _ = strong_energy_infimum([[0.5]], [[s_star]], [1.0])
    print(f"infimum at threshold {value:.15f}")
    assert abs(value + 1.0) <= 1e-6


@pytest.mark.acceptance(4, "weak quadratic PSD <=> r_strict and s_cond over >= 500 random (R, S)")
def test_weak_matrix_oracle():
    rng = np.random.default_rng(4)
    agree = excluded = 0
    outcomes = {True: 0, False: 0}
    while agree < 500:
        m, p = (int(v) for v in rng.integers(1, 5, 2))
        R = rng.uniform(-1, 1, (m, p)) * rng.uniform(0.2, 1.2) / math.sqrt(p)
        S = rng.uniform(-1, 1, (m, m)) * rng.uniform(0.2, 1.2) / math.sqrt(m)
        rep = certify(R, S)
        cert = is_psd(weak_boundary_quadratic(R, S))
        margins = [cert.margin, rep.r_strict.margin]
        if rep.neumann_ok:
            margins.append(rep.s_cond.margin)
        if min(abs(x) for x in margins) < 1e-8:
            excluded += 1
            continue
        assert cert.ok == (rep.r_strict.ok and rep.s_cond.ok), (R, S)
        agree += 1
        outcomes[cert.ok] += 1
    print(f"{agree} instances agree ({outcomes[True]} PSD, {outcomes[False]} not), {excluded} excluded")
    assert outcomes[True] >= 50 and outcomes[False] >= 50


@pytest.mark.acceptance(5, "viscous block inertia (n, 0, n) for 100 random At, n <= 8")
def test_viscous_inertia():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        a = random_sym(rng, n) * rng.uniform(0.1, 10)
        assert viscous_inertia(a) == (n, 0, n)


@pytest.mark.acceptance(6, "discrete skew cancellation: volume energy contribution <= 1e-11 relative, N = 33")
def test_discrete_volume_cancellation():
    rng = np.random.default_rng(6)
    op = make_sbp(2, 33)
    worst = 0.0
    for model in (BurgersModel(), LinearSymModel()):
        for _ in range(100):
            U = rng.uniform(-3, 3, (33, model.n))
            vol = volume_terms(model, U, op)
            rate = op.inner(U @ model.P.T, vol)
            bterms = 0.0
            for side in ("left", "right"):
                u_b = U[op.boundary_index(side)]
                bterms += boundary_form(
                    0.5 * NORMALS[side] * (model.A(u_b) + model.A(u_b).T), u_b
                )
            scale = op.inner(np.abs(U), np.abs(vol)) + abs(bterms)
            worst = max(worst, abs(rate + bterms) / scale)
    print(f"worst relative volume contribution {worst:.2e}")
    assert worst <= 1e-11


@pytest.mark.acceptance(7, "Burgers outflow G = 0, R = 0, N = 101, t = 1: dE/dt <= 1e-10 and residual <= 1e-10, < 10 s")
def test_semidiscrete_stability():
    cfg = load_config("burgers_outflow")
    assert (cfg.grid.N, cfg.time.t_final, cfg.right.r, cfg.left.r) == (101, 1.0, 0.0, 0.0)
    start = time.perf_counter()
    res = run(cfg)
    elapsed = time.perf_counter() - start
    rate = res.ledger.column("dEdt_actual")
    print(f"{len(res.ledger)} stages, max dE/dt {rate.max():.2e}, "
          f"max residual {res.ledger.max_identity_residual():.2e}, {elapsed:.2f} s")
    assert rate.max() <= 1e-10
    assert res.ledger.max_identity_residual() <= 1e-10
    assert elapsed < 10.0


@pytest.mark.acceptance(8, "LinearSym sinusoidal data, certified (R, S): E(t) <= E(0) + budget + 1e-8, < 10 s")
def test_data_bound():
    cfg = load_config("linear_inflow_sine")
    for side in ("left", "right"):
        b = getattr(cfg, side)
        rep = certify(b.R, b.S)
        assert rep.r_strict.ok and rep.s_cond.ok
    start = time.perf_counter()
    res = run(cfg)
    elapsed = time.perf_counter() - start
    samples = res.ledger.samples()
    E0 = samples[0].E
    slack = min(E0 + r.data_budget + 1e-8 - r.E for r in samples)
    print(f"{len(samples)} samples, min slack {slack:.3e}, E_final {samples[-1].E:.4f}, "
          f"budget {samples[-1].data_budget:.4f}, {elapsed:.2f} s")
    assert slack >= 0.0
    assert res.ledger.max_identity_residual() <= 1e-10
    assert elapsed < 10.0


@pytest.mark.acceptance(9, "manufactured convergence on N = 33..257: observed order in [1.7, 2.3], < 60 s")
def test_convergence():
    start = time.perf_counter()
    for name in ("linear_mms", "burgers_mms"):
        study = convergence_study(load_config(name), [33, 65, 129, 257])
        orders = [r["observed_order"] for r in study["rows"][1:]]
        print(name, " ".join(f"{o:.3f}" for o in orders))
        assert not study["degenerate"]
        assert all(1.7 <= o <= 2.3 for o in orders)
    elapsed = time.perf_counter() - start
    print(f"{elapsed:.2f} s")
    assert elapsed < 60.0


@pytest.mark.acceptance(10, "determinism: repeated runs of bundled configs give byte-identical outputs")
def test_determinism(tmp_path, capsys):
    for name in bundled_configs():
        trees = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            assert main(["run", "--config", name, "--out", str(out), "--seed", "7"]) == 0
            trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert trees[0].keys() == trees[1].keys() and len(trees[0]) >= 2
        assert trees[0] == trees[1], name
    capsys.readouterr()
