"""Command line driver: ``voidrod [--config FILE] [--output-dir DIR] <subcommand> ...``.

Every output file starts with two comment lines recording the toolkit
version and the sha256 of the resolved configuration. Errors print one line
``error <code>`` followed by a human-readable detail on stderr; exit codes
are 0 (success), 2 (configuration or input), 3 (numerical failure) and
4 (precondition not met).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cell_problem import assemble_q2_matrix, cell_basis, refinement_table, saint_venant_torsion_constant
from .config import ExperimentConfig, load_config, parse_list, _parse_dims
from .errors import ConfigError, InvalidInputError, VoidRodError
from .io import (
    dump_deformation,
    dump_limit_config,
    dump_void_set,
    fmt,
    parse_deformation,
    parse_limit_config,
    parse_void_set,
)
from .isoperimetry import exhaustive_isoperimetric, random_dominant_suite
from .material import ElasticDensity, expm_so3
from .recovery import STUDY_COLUMNS, build_recovery_pair, convergence_study, recovery_proxies
from .rod1d import BoundaryClamps, arc_config, eval_E0, helix_config, minimize_E0, straight_config
from .rod3d import (
    Deformation3,
    RodDomain,
    VoidSet,
    classify_cuboids,
    default_alpha,
    eval_Eh,
    kappa_schedule,
    partition_cuboids,
    rigidity_probe,
)

FIXTURES = ("arc", "helix", "straight", "straight-void", "kink", "void-and-kink")


def builtin_fixture(name: str, L: float, n_samples: int = 512, M: float | None = None):
    if name == "arc":
        return arc_config(L, 1.0, n_samples=n_samples, M=M)
    if name == "helix":
        return helix_config(L, 0.7, 1.0, n_samples=n_samples, M=M)
    if name == "straight":
        return straight_config(L, n_samples=n_samples, M=M)
    if name == "straight-void":
        return straight_config(L, voids=[(0.3 * L, 0.6 * L)], n_samples=n_samples, M=M)
    if name == "kink":
        return straight_config(L, breakpoints=[0.5 * L], n_samples=n_samples, M=M)
    if name == "void-and-kink":
        return straight_config(L, breakpoints=[0.75 * L], voids=[(0.25 * L, 0.5 * L)],
                               n_samples=n_samples, M=M)
    raise ConfigError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc


def header(cfg: ExperimentConfig) -> str:
    return f"# voidrod {__version__}\n# config-sha256 {cfg.sha256()}\n"


def _csv_text(columns, rows) -> str:
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class _Context:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path, quiet: bool):
        self.cfg = cfg
        self.out = out_dir
        self.quiet = quiet
        self.written: list[Path] = []

    def write(self, name: str, body: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header(self.cfg))
            fh.write(body)
        self.written.append(path)
        return path

    def show(self, text: str) -> None:
        if not self.quiet:
            sys.stdout.write(text)

    @property
    def density(self) -> ElasticDensity:
        return ElasticDensity(self.cfg.kind, self.cfg.lam, self.cfg.mu)

    def limit_config(self, path: str | None = None):
        path = path or self.cfg.limit_config
        if path:
            cfg = parse_limit_config(_read(path))
            cfg.validate()
            return cfg
        cfg = builtin_fixture(self.cfg.fixture, self.cfg.L, self.cfg.rod_samples, self.cfg.M_value)
        cfg.validate()
        return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_cell_problem(ctx: _Context, args) -> None:
    q = ctx.density.quad_form
    n = args.n or ctx.cfg.cell_n
    B = assemble_q2_matrix(q, n).B
    body = _csv_text(["row", "col0", "col1", "col2"], [(i, *B[i]) for i in range(3)])
    ctx.write("cell_problem_B.csv", body)
    ctx.show(body)
    if not args.no_refinement:
        rows = refinement_table(q, ctx.cfg.cell_refinement)
        cols = ["n", "B11", "B22", "B33", "B11_extrap", "B22_extrap", "B33_extrap"]
        table = _csv_text(cols, [[r[c] if r.get(c) is not None else "" for c in cols] for r in rows])
        ctx.write("cell_refinement.csv", table)
        ctx.show(table)
        if ctx.cfg.lam == 0.0:
            ctx.show(f"# reference torsion mu*J = {fmt(ctx.cfg.mu * saint_venant_torsion_constant())}\n")


def _eval_row(E):
    return [E.elastic, E.void_endpoints, E.collapsed, E.total]


def cmd_rod1d_eval(ctx: _Context, args) -> None:
    cfg = ctx.limit_config(args.input)
    B = assemble_q2_matrix(ctx.density.quad_form, ctx.cfg.cell_n)
    E = eval_E0(cfg, B)
    body = _csv_text(["elastic", "void_endpoints", "collapsed", "total"], [_eval_row(E)])
    ctx.write("rod1d_eval.csv", body)
    ctx.show(body)


def cmd_rod1d_minimize(ctx: _Context, args) -> None:
    c = ctx.cfg
    B = assemble_q2_matrix(ctx.density.quad_form, c.cell_n)
    clamps = BoundaryClamps(expm_so3(np.array(c.left_frame)), expm_so3(np.array(c.right_frame)),
                            None if c.y_left is None else np.array(c.y_left),
                            None if c.y_right is None else np.array(c.y_right))
    cands = parse_list(args.candidates) if args.candidates else list(c.candidates)
    res = minimize_E0(clamps, c.L, B, cands, c.max_discontinuities, c.rod_samples, c.M_value)
    ctx.write("rod1d_minimized.txt", dump_limit_config(res.config))
    rows = []
    for (breaks, voids), total in res.explored:
        rows.append([" ".join(fmt(t) for t in breaks),
                     " ".join(f"{fmt(a)}:{fmt(b)}" for a, b in voids),
                     "infeasible" if total is None else fmt(total)])
    ctx.write("rod1d_candidates.csv", _csv_text(["breakpoints", "voids", "total"], rows))
    body = _csv_text(["elastic", "void_endpoints", "collapsed", "total"], [_eval_row(res.energy)])
    ctx.write("rod1d_minimize.csv", body)
    ctx.show(body)


def cmd_rod3d_eval(ctx: _Context, args) -> None:
    c = ctx.cfg
    if args.deformation:
        defo = parse_deformation(_read(args.deformation))
        dom = defo.dom
    else:
        h = args.h if args.h is not None else c.h_list[-1]
        dom = RodDomain.from_policy(c.L, h, c.n2)
        defo = Deformation3.identity(dom)
    void = parse_void_set(_read(args.void)) if args.void else VoidSet()
    void.validate(dom)
    rep = eval_Eh(defo, void, ctx.density, dom, kappa_schedule(dom.h, c.kappa_exponent))
    body = _csv_text(["h", "elastic", "perimeter", "curvature", "total"],
                     [[dom.h, rep.elastic, rep.perimeter, rep.curvature, rep.total]])
    ctx.write("rod3d_eval.csv", body)
    ctx.show(body)


def _basis(ctx: _Context):
    return cell_basis(ctx.density.quad_form, ctx.cfg.n2) if ctx.cfg.corrector else None


def cmd_recovery(ctx: _Context, args) -> None:
    c = ctx.cfg
    cfg = ctx.limit_config(args.input)
    h = args.h if args.h is not None else c.h_list[-1]
    pair = build_recovery_pair(cfg, h, _basis(ctx), c.n2, c.corrector)
    ctx.write("recovery_void.txt", dump_void_set(pair.void))
    if not args.no_deformation:
        ctx.write("recovery_deformation.txt", dump_deformation(pair.defo))
    rep = eval_Eh(pair.defo, pair.void, ctx.density, pair.defo.dom, kappa_schedule(h, c.kappa_exponent))
    dev, ms = recovery_proxies(pair)
    body = _csv_text(["h", "elastic", "perimeter", "curvature", "total", "max_dev_y", "ms_dev_grad"],
                     [[h, rep.elastic, rep.perimeter, rep.curvature, rep.total, dev, ms]])
    ctx.write("recovery.csv", body)
    ctx.show(body)


PLOT_SCRIPT = '''"""Plot the relative gap of a voidrod convergence study (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "convergence_study.csv"
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
h = [float(r["h"]) for r in rows]
gap = [float(r["gap"]) for r in rows]
plt.loglog(h, [max(g, 1e-17) for g in gap], "o-")
plt.xlabel("h")
plt.ylabel("|E^h - E^0| / E^0")
plt.gca().invert_xaxis()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def cmd_convergence_study(ctx: _Context, args) -> None:
    c = ctx.cfg
    cfg = ctx.limit_config(args.input)
    rows = convergence_study(cfg, ctx.density, c.h_list, c.n2, c.kappa_exponent,
                             basis=_basis(ctx), corrector=c.corrector, cell_n=c.cell_n)
    body = _csv_text(STUDY_COLUMNS, [[r[k] for k in STUDY_COLUMNS] for r in rows])
    ctx.write("convergence_study.csv", body)
    ctx.write("plot_convergence_study.py", PLOT_SCRIPT)
    ctx.show(body)


def cmd_isoperimetry(ctx: _Context, args) -> None:
    c = ctx.cfg
    dims = _parse_dims(args.dims) if args.dims else c.dims
    mode = args.mode or c.iso_mode
    seed = c.seed if args.seed is None else args.seed
    if mode == "exhaustive":
        r = exhaustive_isoperimetric(dims, C_check=c.C_hat)
        cols = ["dims", "n_subsets", "n_precondition", "n_nontrivial", "C_hat", "n_violations"]
        body = _csv_text(cols, [["x".join(map(str, r.dims)), r.n_subsets, r.n_precondition,
                                 r.n_nontrivial, r.C_hat, "" if r.n_violations is None else r.n_violations]])
        ctx.write("isoperimetry_exhaustive.csv", body)
    else:
        C = c.C_hat
        if C is None:
            C = exhaustive_isoperimetric((6, 2, 2)).C_hat
        samples = args.samples or c.samples
        r = random_dominant_suite(dims, samples, seed, C, args.threshold or c.threshold)
        cols = ["dims", "samples", "seed", "threshold", "C_hat", "checked", "skipped", "violations",
                "max_ratio", "C_reestimated"]
        body = _csv_text(cols, [["x".join(map(str, r.dims)), r.samples, r.seed, r.threshold, r.C_hat,
                                 r.checked, r.skipped, len(r.violations), r.max_ratio, r.C_reestimated]])
        ctx.write("isoperimetry_random.csv", body)
        if r.log:
            ctx.write("isoperimetry_random.log", "\n".join(r.log) + "\n")
    ctx.show(body)


def cmd_rigidity_probe(ctx: _Context, args) -> None:
    c = ctx.cfg
    cfg = ctx.limit_config(args.input)
    h = args.h if args.h is not None else c.h_list[-1]
    T = args.T or c.T
    pair = build_recovery_pair(cfg, h, _basis(ctx), c.n2, c.corrector)
    part = partition_cuboids(pair.defo.dom, T, c.rho)
    C_iso = c.C_hat if c.C_hat is not None else exhaustive_isoperimetric((6, 2, 2)).C_hat
    labels = classify_cuboids(part, pair.void, default_alpha(T, c.c_T), C_iso)
    res = rigidity_probe(pair.defo, pair.void, part, labels)
    cols = ["i", "label", "area", "volume", "eps", "residual_sym", "residual_full"]
    body = _csv_text(cols, res.as_rows())
    ctx.write("rigidity_probe.csv", body)
    adj = _csv_text(["i", "j", "rotation_diff_sq"], [[i, j, v] for (i, j), v in sorted(res.adjacent.items())])
    ctx.write("rigidity_adjacent.csv", adj)
    ctx.show(body)


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error {ConfigError.code}\n{self.prog}: {message}\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="voidrod", description="Thin rods with voids: cell problem, 1D limit, 3D energy, recovery.")
    p.add_argument("--version", action="version", version=f"voidrod {__version__}")
    p.add_argument("--config", help="experiment configuration file ([section] key = value)")
    p.add_argument("--output-dir", help="directory for output files (overrides [output] dir)")
    p.add_argument("--fixture", choices=FIXTURES, help="built-in limit configuration")
    p.add_argument("-q", "--quiet", action="store_true", help="do not echo tables to stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("cell-problem", help="effective stiffness matrix and refinement table")
    s.add_argument("--n", type=int, help="cross-section subdivisions (default [mesh] cell_n)")
    s.add_argument("--no-refinement", action="store_true")
    s.set_defaults(func=cmd_cell_problem)

    for name, func, text in (("rod1d-eval", cmd_rod1d_eval, "evaluate the 1D limit energy"),
                             ("convergence-study", cmd_convergence_study, "h-sweep of recovery energies")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--input", help="limit configuration file")
        s.set_defaults(func=func)

    s = sub.add_parser("rod1d-minimize", help="search breaks and voids on a candidate grid")
    s.add_argument("--candidates", help="comma separated positions (default [rod1d] candidates)")
    s.set_defaults(func=cmd_rod1d_minimize)

    s = sub.add_parser("rod3d-eval", help="rescaled 3D energy of a deformation and void")
    s.add_argument("--void", help="void-set file")
    s.add_argument("--deformation", help="deformation3 file (default: identity)")
    s.add_argument("--h", type=float)
    s.set_defaults(func=cmd_rod3d_eval)

    s = sub.add_parser("recovery", help="build a recovery pair and report its energy")
    s.add_argument("--input", help="limit configuration file")
    s.add_argument("--h", type=float)
    s.add_argument("--no-deformation", action="store_true", help="skip writing the nodal field")
    s.set_defaults(func=cmd_recovery)

    s = sub.add_parser("isoperimetry-test", help="exhaustive or randomized isoperimetric checks")
    s.add_argument("--dims", help="grid dimensions such as 10x2 or 64x4x4")
    s.add_argument("--mode", choices=("exhaustive", "random"))
    s.add_argument("--seed", type=int)
    s.add_argument("--samples", type=int)
    s.add_argument("--threshold", type=int, choices=(1, 2))
    s.set_defaults(func=cmd_isoperimetry)

    s = sub.add_parser("rigidity-probe", help="per-cuboid labels, energies and rigidity residuals")
    s.add_argument("--input", help="limit configuration file")
    s.add_argument("--h", type=float)
    s.add_argument("--T", type=int)
    s.set_defaults(func=cmd_rigidity_probe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.fixture:
            cfg.fixture = args.fixture
            cfg.limit_config = None
        out = Path(args.output_dir or cfg.output_dir)
        ctx = _Context(cfg, out, args.quiet)
        args.func(ctx, args)
    except VoidRodError as exc:
        sys.stderr.write(f"error {exc.code}\n{exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
