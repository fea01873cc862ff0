"""Command-line entry point: ``krein <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .czkit import StepFunction, cz_decompose, cz_decompose_split, cz_verify
from .errors import BadParameter, KreinError
from .experiments import (ExperimentConfig, Table, divergence_probe, mixed_norm_table, perturbative_slope,
                          remainder_scaling, report_table, steklov_sweep, verify_all, write_outputs)


def floats(text: str) -> tuple[float, ...]:
    """``1,2,4`` or a range ``a:b:log10[:n]`` / ``a:b:lin[:n]`` (n defaults to 5)."""
    text = text.strip()
    try:
        if ":" not in text:
            return tuple(float(x) for x in text.split(",") if x.strip())
        parts = text.split(":")
        a, b, kind = float(parts[0]), float(parts[1]), parts[2] if len(parts) > 2 else "lin"
        n = int(parts[3]) if len(parts) > 3 else 5
    except (ValueError, IndexError) as exc:
        raise BadParameter(f"cannot read number list {text!r}") from exc
    if n < 2:
        raise BadParameter("a range needs at least two points")
    if kind == "log10":
        if a <= 0 or b <= 0:
            raise BadParameter("log10 range needs positive ends")
        return tuple(float(x) for x in np.logspace(np.log10(a), np.log10(b), n))
    if kind == "lin":
        return tuple(float(x) for x in np.linspace(a, b, n))
    raise BadParameter(f"unknown range kind {kind!r}")


def ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise BadParameter(f"cannot read integer list {text!r}") from exc


def _grid_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("grid")
    g.add_argument("--lam", type=float, default=128.0, help="half-width of the lambda window")
    g.add_argument("--points", type=int, default=4096, help="lambda nodes")
    g.add_argument("--dr", type=float, default=0.05)
    g.add_argument("--r-max", type=float, default=20.0)
    g.add_argument("--stride", type=float, default=0.5, help="r spacing of reported rows")
    g.add_argument("--convergence", action="store_true", help="also run at (dr/2, 2 lam)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krein", description="Krein systems with near-constant weights.")
    ap.add_argument("--version", action="version", version=f"krein {__version__}")
    ap.add_argument("--out", default="krein-out", help="output directory for CSV and manifests")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the verification suites")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--only", type=ints, default=None, help="comma-separated criterion numbers")

    s = sub.add_parser("steklov", help="r -> ||P - e^{i lam r}||_{L^p_w}")
    s.add_argument("--weight", default="bump:delta=0.1,a=-1,b=1")
    s.add_argument("--p", type=floats, default=(2.0,))
    _grid_args(s)

    sl = sub.add_parser("slope", help="sup-norm against delta with a log-log fit")
    sl.add_argument("--family", choices=("bump", "gauss"), default="bump")
    sl.add_argument("--deltas", type=floats, default=(1e-3, 1e-2, 1e-1))
    sl.add_argument("--p", type=floats, default=(2.0,))
    _grid_args(sl)

    d = sub.add_parser("diverge", help="n -> ||P_[-n,n] u||_{L^p}")
    d.add_argument("--p2", type=float, required=True)
    d.add_argument("--p", type=float, required=True)
    d.add_argument("--n", type=floats, default=(1, 2, 4, 8, 16, 32, 64))
    d.add_argument("--kind", choices=("log", "bump"), default="log")
    d.add_argument("--lam", type=float, default=512.0)
    d.add_argument("--points", type=int, default=32768)
    d.add_argument("--convergence", action="store_true")

    r = sub.add_parser("remainder", help="sup_r ||R_{k,r}||_{L^p} against delta")
    r.add_argument("--k", type=int, default=1)
    r.add_argument("--family", choices=("bump", "gauss"), default="gauss")
    r.add_argument("--deltas", type=floats, default=(0.02, 0.05, 0.1))
    r.add_argument("--p", type=floats, default=(2.0,))
    _grid_args(r)

    m = sub.add_parser("mixed", help="r -> ||R_{1,r}||_{L^p_w} and its L^2 + L^inf split")
    m.add_argument("--weight", default="gauss:delta=0.1")
    m.add_argument("--q", type=float, default=3.0)
    m.add_argument("--p", type=float, default=2.0)
    _grid_args(m)

    c = sub.add_parser("cz", help="dyadic Calderon-Zygmund decomposition of a step function")
    c.add_argument("--u", required=True, help="pieces a:b=c joined by ';'")
    c.add_argument("--beta", type=Fraction, required=True)
    c.add_argument("--q", type=float, default=0.0)
    c.add_argument("--u2", default=None, help="second summand for the split decomposition")
    c.add_argument("--p1", type=float, default=1.0)
    c.add_argument("--p2", type=float, default=2.0)
    return ap


def _config(args: argparse.Namespace, **extra) -> ExperimentConfig:
    return ExperimentConfig(lam_half=args.lam, n_points=args.points, dr=args.dr, r_max=args.r_max,
                            r_stride=args.stride, out_dir=args.out, seed=args.seed, **extra)


def _refined(cfg: ExperimentConfig) -> ExperimentConfig:
    # doubling the window at fixed node spacing doubles the node count
    return replace(cfg, dr=cfg.dr / 2, lam_half=2 * cfg.lam_half, n_points=2 * cfg.n_points)


def _emit(name: str, run: Callable[[ExperimentConfig], Table], cfg: ExperimentConfig, convergence: bool) -> int:
    jobs = [(name, cfg)] + ([(f"{name}-refined", _refined(cfg))] if convergence else [])
    for label, c in jobs:
        try:
            table = run(c)
        except KreinError as exc:
            write_outputs(label, Table((), [], {}), c, status="error", error=f"{type(exc).__name__}: {exc}")
            raise
        csv_path, _ = write_outputs(label, table, c)
        print(f"{label}: {csv_path}")
        print(json.dumps(table.summary, sort_keys=True, default=str))
    return 0


def _verify(args: argparse.Namespace) -> int:
    rows = verify_all(args.level, args.seed, args.only)
    cfg = ExperimentConfig(out_dir=args.out, seed=args.seed)
    table = report_table(rows)
    status = "complete" if table.summary["failed"] == 0 else "failed"
    write_outputs(f"verify-{args.level}", table, cfg, status=status)
    for row in rows:
        mark = "PASS" if row.passed else "FAIL"
        print(f"{row.experiment} {row.observable} {row.params} {row.value:.4g} {row.tolerance} {mark}")
    print(json.dumps(table.summary))
    return 0 if status == "complete" else 1


def _cz(args: argparse.Namespace) -> int:
    u = StepFunction.parse(args.u)
    if args.u2 is None:
        dec = cz_decompose(u, args.beta, args.q)
        rep = cz_verify(dec, u)
    else:
        u2 = StepFunction.parse(args.u2)
        dec = cz_decompose_split(u, u2, args.p1, args.p2, args.beta, args.q)
        rep = cz_verify(dec, (u, u2))
    for iv in dec.intervals:
        print(f"[{iv.left}, {iv.right}]")
    checks = {"covered": rep.covered, "maximal": rep.maximal, "disjoint": rep.disjoint,
              "sum_bound": rep.sum_bound}
    print(json.dumps(checks))
    return 0 if rep.passed else 1


def dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "verify":
        return _verify(args)
    if cmd == "cz":
        return _cz(args)
    if cmd == "steklov":
        cfg = _config(args, weight=args.weight, ps=args.p, p=max(args.p))
        return _emit("steklov", steklov_sweep, cfg, args.convergence)
    if cmd == "slope":
        cfg = _config(args, family=args.family, deltas=args.deltas, ps=args.p)
        return _emit("slope", perturbative_slope, cfg, args.convergence)
    if cmd == "remainder":
        cfg = _config(args, family=args.family, deltas=args.deltas, ps=args.p, k=args.k)
        return _emit("remainder", remainder_scaling, cfg, args.convergence)
    if cmd == "mixed":
        cfg = _config(args, weight=args.weight, q=args.q, p=args.p)
        return _emit("mixed", mixed_norm_table, cfg, args.convergence)
    if cmd == "diverge":
        cfg = ExperimentConfig(weight="const:c=1", lam_half=args.lam, n_points=args.points, p=args.p,
                               p2=args.p2, p1=min(args.p, args.p2), out_dir=args.out, seed=args.seed)
        ns = args.n

        def run(c: ExperimentConfig) -> Table:
            return divergence_probe(args.p2, args.p, ns, c.lam_half, c.n_points, args.kind)

        return _emit("diverge", run, cfg, args.convergence)
    raise BadParameter(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return dispatch(args)
    except KreinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
