"""Command-line interface: ``openbc {validate,audit,run,convergence}``.

Exit codes
    0   success (validate: all four cases certified)
    1   refusal (validate: even homogeneous cases fail; run: energy check failed)
    2   validate: homogeneous cases only
    3   run: solver blow-up
    64  usage, parse or configuration error
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import boundary as bnd
from .config import ConfigError, RunConfig
from .linalg import LinalgError, diagonalize, eig_sym, inertia
from .models import ModelError, boundary_matrix
from .sbp import NORMALS
from .solver import SIDES, Solver, SolverBlowup, _fmt, _jsonable, convergence_study

EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_HOMOGENEOUS_ONLY = 2
EXIT_BLOWUP = 3
EXIT_USAGE = 64

log = logging.getLogger("openbc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- matrix files -----------------------------------------------------------

def parse_matrix(text: str, name: str = "<matrix>") -> np.ndarray:
    """Whitespace-separated rows, one per line; blank lines and ``#`` comments skipped."""
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        row = []
        col = 0
        for tok in body.split():
            col = body.index(tok, col)
            try:
                v = float(tok)
            except ValueError:
                raise UsageError(f"{name}:{lineno}:{col + 1}: not a number: {tok!r}") from None
            if not np.isfinite(v):
                raise UsageError(f"{name}:{lineno}:{col + 1}: non-finite entry {tok!r}")
            row.append(v)
            col += len(tok)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise UsageError(f"{name}:{lineno}:1: row has {len(row)} entries, expected {width}")
        rows.append(row)
    if not rows:
        raise UsageError(f"{name}:1:1: empty matrix")
    return np.array(rows)


def read_matrix(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_matrix(text, str(path))


# -- config lookup ----------------------------------------------------------

def bundled_configs() -> list:
    pkg = resources.files("openbc") / "configs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".yaml"))


def load_config(arg: str) -> RunConfig:
    path = Path(arg)
    if not path.exists() and arg in bundled_configs():
        text = (resources.files("openbc") / "configs" / f"{arg}.yaml").read_text()
        return RunConfig.loads(text)
    return RunConfig.load(path)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.output.dir = args.out
    return cfg


# -- validate ---------------------------------------------------------------

def validate_matrices(R: np.ndarray, S: np.ndarray):
    report = bnd.certify(R, S)
    cases = report.cases
    if all(cases.values()):
        code = EXIT_OK
    elif cases[1]:
        code = EXIT_HOMOGENEOUS_ONLY
    else:
        code = EXIT_REFUSED
    return report, code


def cmd_validate(args) -> int:
    R = read_matrix(args.R)
    S = read_matrix(args.S) if args.S else np.eye(R.shape[0])
    try:
        report, code = validate_matrices(R, S)
    except bnd.DimensionMismatch as exc:
        raise UsageError(str(exc)) from None
    d = report.to_dict()
    out = sys.stdout
    print(f"R: {report.n_minus}x{report.n_plus}   S: {report.n_minus}x{report.n_minus}", file=out)
    print(f"I - R^T R >= 0        ok={d['r_semi']['ok']}  margin={_margin(d['r_semi'])}", file=out)
    print(f"I - R^T R >  0        ok={d['r_strict']['ok']}  margin={_margin(d['r_strict'])}", file=out)
    print(f"Neumann series valid  {d['neumann_valid']}", file=out)
    print(f"S condition >= 0      ok={d['s_cond']['ok']}  margin={_margin(d['s_cond'])}", file=out)
    for k, v in report.cases.items():
        print(f"case {k} ({_CASE_NAMES[k]}): {'certified' if v else 'refused'}", file=out)
    if report.r_semi.witness is not None:
        w = " ".join(_fmt(v) for v in report.r_semi.witness)
        print(f"witness v with v^T (I - R^T R) v < 0: {w}", file=out)
    if args.json:
        print(json.dumps(_jsonable(d), sort_keys=True), file=out)
    return code


_CASE_NAMES = {
    1: "strong, homogeneous",
    2: "strong, inhomogeneous",
    3: "weak, homogeneous",
    4: "weak, inhomogeneous",
}


def _margin(entry) -> str:
    m = entry["margin"]
    return "n/a" if m is None else _fmt(m)


# -- audit ------------------------------------------------------------------

def audit_side(solver: Solver, side: str, u_b: np.ndarray) -> dict:
    cfg = solver.cfg
    A_tilde = boundary_matrix(solver.model, u_b, NORMALS[side])

    def describe(matrix) -> dict:
        split = bnd.build_split(diagonalize(matrix, cfg.transformation))
        R, S, cert = solver.coupling(side, split.n_minus, split.n_plus)
        M = bnd.weak_boundary_quadratic(R, S)
        lam_M = eig_sym(M).lam
        entry = {
            "matrix": np.asarray(matrix).tolist(),
            "eigenvalues": eig_sym(matrix).lam.tolist(),
            "inertia": list(inertia(matrix).as_tuple()),
            "A_plus": split.A_plus.tolist(),
            "A_minus": split.A_minus.tolist(),
            "R": R.tolist(),
            "S": S.tolist(),
            "certification": cert.to_dict(),
            "weak_quadratic_eigenvalues": lam_M.tolist(),
            "verdict": {_CASE_NAMES[k]: bool(v) for k, v in cert.cases.items()},
        }
        if split.n_minus == 0:
            entry["note"] = "no boundary condition required at this trace"
        return entry

    out = {"side": side, "normal": NORMALS[side], "trace": u_b.tolist(), "inviscid": describe(A_tilde.a)}
    if solver.viscous:
        out["viscous"] = describe(bnd.viscous_block(A_tilde).block.a)
    return out


def run_audit(cfg: RunConfig) -> dict:
    solver = Solver(cfg)
    U0 = solver.initial_field()
    sides = []
    for side in SIDES:
        b = getattr(cfg, side)
        u_b = np.asarray(b.trace, dtype=float) if b.trace is not None else U0[solver.op.boundary_index(side)]
        if u_b.shape != (solver.model.n,):
            raise ConfigError(f"{side}.trace must have {solver.model.n} entries")
        sides.append(audit_side(solver, side, u_b))
    return {"model": cfg.model.name, "epsilon": cfg.model.epsilon, "transformation": cfg.transformation,
            "boundaries": sides}


def format_audit(report: dict) -> str:
    lines = [f"model {report['model']}  epsilon={report['epsilon']}  transformation={report['transformation']}"]
    for b in report["boundaries"]:
        lines.append("")
        lines.append(f"[{b['side']} boundary, normal {b['normal']:+d}] trace = {b['trace']}")
        for part in ("inviscid", "viscous"):
            if part not in b:
                continue
            e = b[part]
            lines.append(f"  {part} boundary matrix: {e['matrix']}")
            lines.append(f"    eigenvalues {e['eigenvalues']}  inertia {tuple(e['inertia'])}")
            lines.append(f"    A+ = {e['A_plus']}")
            lines.append(f"    A- = {e['A_minus']}")
            if "note" in e:
                lines.append(f"    {e['note']}")
            lines.append(f"    R = {e['R']}  S = {e['S']}")
            for name, ok in e["verdict"].items():
                lines.append(f"    {name}: {'certified' if ok else 'refused'}")
    return "\n".join(lines) + "\n"


def cmd_audit(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = run_audit(cfg)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "audit.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = format_audit(report)
    (out / "audit.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- run / convergence ------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(cfg.output.dir)
    try:
        result = Solver(cfg).run(out)
    except SolverBlowup as exc:
        print(f"solver blow-up at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    s = result.summary()
    v = s["lemma_verdict"]
    print(f"steps={s['steps']} dt={_fmt(s['dt'])} max_identity_residual={_fmt(s['max_identity_residual'])}")
    print(f"E: {_fmt(s['E_initial'])} -> {_fmt(s['E_final'])}  monotone={s['energy_monotone']}"
          f"  data_budget={_fmt(s['data_budget'])}")
    print(f"energy verdict ({v['case']}): {v['pass']}")
    ok = s["identity_ok"] and v["pass"] is not False
    return EXIT_OK if ok else EXIT_REFUSED


def cmd_convergence(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    try:
        grids = [int(g) for g in args.grids.split(",") if g.strip()]
    except ValueError:
        raise UsageError(f"--grids must be a comma-separated list of integers, got {args.grids!r}") from None
    if len(grids) < 2:
        raise UsageError("--grids needs at least two grid sizes")
    study = convergence_study(cfg, grids)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "h", "L2_error", "observed_order"])
        for r in study["rows"]:
            order = "" if r["observed_order"] is None else _fmt(r["observed_order"])
            w.writerow([r["N"], _fmt(r["h"]), _fmt(r["L2_error"]), order])
    for r in study["rows"]:
        order = "-" if r["observed_order"] is None else f"{r['observed_order']:.3f}"
        print(f"N={r['N']:5d}  h={r['h']:.4e}  L2={r['L2_error']:.6e}  order={order}")
    if study["degenerate"]:
        print("degenerate study: errors vanish on every grid, no order estimated")
    return EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="openbc", description="Energy-stable open boundary conditions toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    v = sub.add_parser("validate", help="certify a coupling matrix R and scaling matrix S")
    v.add_argument("R", help="matrix file for R (n_minus x n_plus)")
    v.add_argument("S", nargs="?", help="matrix file for S (n_minus x n_minus); identity if omitted")
    v.add_argument("--json", action="store_true", help="also print the report as JSON")
    v.set_defaults(func=cmd_validate)

    for name, func, help_ in (
        ("audit", cmd_audit, "audit boundary operators at the configured trace states"),
        ("run", cmd_run, "integrate a configuration and write the energy ledger"),
        ("convergence", cmd_convergence, "grid convergence study on a manufactured solution"),
    ):
        c = sub.add_parser(name, help=help_)
        c.add_argument("--config", required=True, help="config file or bundled config name")
        c.add_argument("--out", help="output directory (overrides output.dir)")
        c.add_argument("--seed", type=int, help="random seed (overrides seed)")
        if name == "convergence":
            c.add_argument("--grids", default="33,65,129,257", help="comma-separated grid sizes")
        c.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    level = os.environ.get("OPENBC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ModelError, LinalgError, bnd.DimensionMismatch, bnd.SingularScaling) as exc:
        print(f"openbc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
