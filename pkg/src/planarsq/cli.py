"""Command line front end.

Exit codes: 0 success, 2 usage, 3 data, schema or I/O problems, 4 numerical
non-convergence. Outputs go to ``--out`` when given (never overwritten
without ``--force``) and to stdout otherwise; ``--json`` prints a
machine-readable summary on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import (
    Criterion,
    CriterionConfig,
    compare_criteria,
    entanglement_depth,
    moments_from_dict,
    sm_depth,
)
from .curves import (
    ZetaTable,
    curve_eval,
    producibility_hull,
    published_zeta_table,
    sm_curve,
    zeta_table,
)
from .errors import (
    ConvergenceError,
    EigenSolverError,
    PlanarSqError,
    SchemaError,
)
from .spin import SpinLabel, rotate_to_polarization_axis

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None, force: bool) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _spin(text: str) -> SpinLabel:
    try:
        return SpinLabel.of(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid spin {text!r}: {exc}") from None


def _grid(text: str) -> np.ndarray:
    """``a,b,c`` or ``lin:lo:hi:n`` or ``log:lo:hi:n``."""
    try:
        if text.startswith(("lin:", "log:")):
            kind, lo, hi, n = text.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
            if n < 1:
                raise ValueError("n must be positive")
            return np.linspace(lo, hi, n) if kind == "lin" else np.geomspace(lo, hi, n)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}: {exc}") from None


def _load_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_table(args, need_J: SpinLabel | None) -> ZetaTable:
    if getattr(args, "zeta_table", None):
        try:
            text = Path(args.zeta_table).read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"{args.zeta_table}: {exc.strerror}") from None
        try:
            return ZetaTable.from_csv(text, {"source": str(args.zeta_table)})
        except SchemaError as exc:
            raise SchemaError(f"{args.zeta_table}: {exc}") from None
    if getattr(args, "published_table", False):
        return published_zeta_table()
    return zeta_table(need_J or SpinLabel(2), threads=args.threads)


# ---------------------------------------------------------------- commands

def cmd_zeta_table(args) -> int:
    if args.j_max < 0:
        raise UsageError("--j-max must be non-negative")
    table = zeta_table(args.j_max, threads=args.threads) if args.j_max >= 1 else ZetaTable({}, {})
    _emit(table.to_csv(), args.out, args.force)
    if args.json:
        print(json.dumps(table.to_dict()))
    return EXIT_OK


def cmd_bound_curve(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    curve = producibility_hull(args.k, args.j)
    if args.samples is not None:
        if args.samples < 2:
            raise UsageError("--samples must be >= 2")
        X = np.linspace(curve.X[0], curve.X[-1], args.samples)
        text = "X,value\n" + "".join(f"{x!r},{float(v)!r}\n" for x, v in zip(X.tolist(), curve_eval(curve, X)))
    else:
        text = curve.to_csv() if args.format == "csv" else curve.to_json() + "\n"
    _emit(text, args.out, args.force)
    if args.json:
        print(json.dumps({"kind": curve.kind, "k": args.k, "j": str(args.j), "vertices": len(curve.X),
                          "out": args.out}))
    return EXIT_OK


def cmd_sm_curve(args) -> int:
    curve = sm_curve(args.J)
    text = curve.to_csv() if args.format == "csv" else curve.to_json() + "\n"
    _emit(text, args.out, args.force)
    if args.json:
        print(json.dumps({"kind": curve.kind, "J": str(args.J), "vertices": len(curve.X), "out": args.out}))
    return EXIT_OK


def cmd_depth(args) -> int:
    moments = moments_from_dict(_load_json(args.moments), str(args.moments))
    criterion = Criterion(args.criterion)
    config = CriterionConfig(k_max=args.k_max, which=criterion)
    if criterion == Criterion.SORENSEN_MOLMER:
        verdict = sm_depth(rotate_to_polarization_axis(moments), config)
    else:
        need = SpinLabel(args.k_max * moments.spin.two_j)
        table = _load_table(args, need) if criterion != Criterion.HE_K1 else None
        verdict = entanglement_depth(moments, config, table)
    doc = verdict.to_dict()
    _emit(json.dumps(doc, indent=1) + "\n", args.out, args.force)
    if args.json and args.out is not None:
        print(json.dumps(doc))
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    alpha = args.alpha_grid if args.alpha_grid is not None else np.geomspace(0.05, 20, 50)
    beta = args.beta_grid if args.beta_grid is not None else np.linspace(0.02, args.j.J, 50)
    try:
        grid = compare_criteria(args.k, args.j, alpha, beta, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(grid.to_csv(), args.out, args.force)
    if args.json:
        win = grid.winner
        print(json.dumps({"k": args.k, "j": str(args.j), "cells": int(win.size),
                          "planar_wins": int((win == "planar").sum()), "sm_wins": int((win == "sm").sum()),
                          "out": args.out}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .pipeline import SyntheticConfig, generate_synthetic_run, write_run

    raw = _load_json(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise SchemaError(f"{args.config}: expected a JSON object")
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    try:
        cfg = SyntheticConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{args.config or 'config'}: {exc}") from None
    out = Path(args.out)
    runs = generate_synthetic_run(cfg)
    files = []
    for i, run in enumerate(runs):
        a = out / f"group{i:02d}_atoms.csv"
        b = out / f"group{i:02d}_background.csv"
        write_run(a, run.records, run.meta, force=args.force)
        write_run(b, run.background, run.background_meta, force=args.force)
        files += [str(a), str(b)]
    cfg_path = out / "config.json"
    _emit(json.dumps(cfg.to_dict(), indent=1) + "\n", str(cfg_path), args.force)
    if args.json:
        print(json.dumps({"out": str(out), "files": files, "seed": cfg.seed}))
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .pipeline import analyze_run, load_groups

    if not Path(args.records).is_dir():
        raise SchemaError(f"{args.records}: not a directory")
    groups = load_groups(args.records)
    two_j = groups[0][0][1].two_j
    table = _load_table(args, SpinLabel(args.k_max * two_j))
    report = analyze_run(groups, CriterionConfig(k_max=args.k_max), table, n_boot=args.bootstrap,
                         seed=args.seed if args.seed is not None else 0, threads=args.threads)
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    if args.out is None:
        sys.stdout.write(report.to_csv())
    else:
        out = Path(args.out)
        _emit(report.to_csv(), str(out / "report.csv"), args.force)
        _emit(report.to_json() + "\n", str(out / "report.json"), args.force)
    if args.json:
        print(json.dumps(report.to_dict()))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="planarsq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--json", action="store_true", help="print a JSON summary on stdout")
    common.add_argument("--seed", type=int, default=None, help="seed for stochastic steps")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    tables = argparse.ArgumentParser(add_help=False)
    grp = tables.add_mutually_exclusive_group()
    grp.add_argument("--zeta-table", metavar="FILE", help="zeta table CSV (J,zeta_squared)")
    grp.add_argument("--published-table", action="store_true", help="use the printed reference rows")
    tables.add_argument("--k-max", type=int, default=10)

    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("zeta-table", parents=[common], help="tabulate zeta^2_J")
    s.add_argument("--j-max", type=int, required=True)
    s.set_defaults(func=cmd_zeta_table)

    s = sub.add_parser("bound-curve", parents=[common], help="k-producibility hull G_k")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--j", type=_spin, default=SpinLabel(2))
    s.add_argument("--samples", type=int, default=None, help="resample on a uniform X grid (CSV)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_bound_curve)

    s = sub.add_parser("sm-curve", parents=[common], help="single-variance bound F_J")
    s.add_argument("--J", type=_spin, required=True)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_sm_curve)

    s = sub.add_parser("depth", parents=[common, tables], help="certify entanglement depth")
    s.add_argument("--moments", required=True, metavar="FILE")
    s.add_argument("--criterion", choices=[c.value for c in Criterion], default=Criterion.LINEAR_ZETA.value)
    s.set_defaults(func=cmd_depth)

    s = sub.add_parser("compare", parents=[common], help="planar vs single-variance bounds grid")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--j", type=_spin, default=SpinLabel(2))
    s.add_argument("--alpha-grid", type=_grid, default=None)
    s.add_argument("--beta-grid", type=_grid, default=None)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("simulate", parents=[common], help="write synthetic record runs")
    s.add_argument("--config", metavar="FILE", default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", parents=[common, tables], help="analyze a directory of record runs")
    s.add_argument("--records", required=True, metavar="DIR")
    s.add_argument("--bootstrap", type=int, default=500, help="bootstrap resamples for sigma_xi")
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    if args.command == "simulate" and args.out is None:
        parser.error("simulate requires --out DIR")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, EigenSolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PlanarSqError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
