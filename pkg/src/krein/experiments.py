"""Experiments, acceptance criteria and report emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from . import __version__
from .czkit import StepFunction, brute_force_cz, cz_decompose, cz_verify
from .errors import BadParameter, BandOutOfRange, RegularityNotCertified
from .harmonic import GridFunction, LambdaGrid, RGrid, band_multiplier, lp_grid_norm, make_grids, weighted_lp_norm
from .kreincore import (compute_accelerant, continuation_sweep, discrete_operator, solve_resolvent)
from .kreinsol import SplineBump, band_orthogonality_check, evaluate_all, evaluate_P, ode_oracle, orthonormality_check
from .remainder import compute_remainder, moment_certified
from .steklov import assemble_Q, band_apply, functional_residual, neumann_inverse, solve_X
from .weights import Weight, a2_characteristic, bmo_estimate, bump_weight, gauss_weight, make_weight, tail_bound, \
    weight_gap_norm

MODULES = ("harmonic", "weights", "czkit", "kreincore", "kreinsol", "remainder", "steklov", "experiments", "cli")


# ------------------------------------------------------------------ configuration and reports


@dataclass
class ExperimentConfig:
    weight: str = "bump:delta=0.1,a=-1,b=1"
    lam_half: float = 128.0
    n_points: int = 4096
    dr: float = 0.05
    r_max: float = 20.0
    p: float = 2.0
    p_tilde: float = 2.0
    p1: float = 2.0
    p2: float = 2.0
    q: float = 0.0
    k: int = 1
    family: str = "bump"
    deltas: tuple[float, ...] = ()
    taus: tuple[float, ...] = ()
    ps: tuple[float, ...] = (2.0,)
    checkpoints: tuple[float, ...] = ()
    r_stride: float = 0.5
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "krein-out"
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        if not (self.lam_half > 0 and self.dr > 0 and self.r_max > 0):
            raise BadParameter("grid parameters must be positive")
        if self.dr > self.r_max:
            raise BadParameter(f"dr={self.dr} exceeds r_max={self.r_max}")
        if self.r_stride < self.dr:
            raise BadParameter("r_stride must be at least dr")
        make_grids(self.lam_half, self.n_points, self.dr, self.r_max)
        make_weight(self.weight)
        for p in (self.p, *self.ps):
            if not p >= 1:
                raise BadParameter(f"exponent {p} below 1")
        if not 1 <= self.p1 <= self.p2:
            raise BadParameter("need 1 <= p1 <= p2")
        if self.q < 0:
            raise BadParameter("q must be non-negative")
        if not 0 <= self.k <= 3:
            raise BadParameter("k must lie in 0..3")
        if any(d <= -1 for d in self.deltas):
            raise BadParameter("deltas must exceed -1")
        if self.family not in ("bump", "gauss"):
            raise BadParameter(f"unknown family {self.family!r}")
        for r in self.checkpoints:
            if not 0 <= r <= self.r_max:
                raise BadParameter(f"checkpoint {r} outside [0, r_max]")
        return self

    def grids(self) -> tuple[LambdaGrid, RGrid]:
        return make_grids(self.lam_half, self.n_points, self.dr, self.r_max)

    def r_indices(self, rgrid: RGrid) -> list[int]:
        if self.checkpoints:
            return sorted({rgrid.index(r) for r in self.checkpoints})
        stride = max(1, int(round(self.r_stride / rgrid.step)))
        return list(range(0, rgrid.size + 1, stride))


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    params: str
    observable: str
    value: float
    tolerance: str
    passed: bool


def _row(exp: str, observable: str, value: float, ok: bool, tolerance: str, **params) -> ReportRow:
    return ReportRow(exp, json.dumps(params, sort_keys=True), observable, float(value), tolerance, bool(ok))


@dataclass(frozen=True, eq=False)
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    summary: dict


def threads() -> int:
    try:
        return max(1, int(os.environ.get("KREIN_THREADS", "1")))
    except ValueError as exc:
        raise BadParameter("KREIN_THREADS must be an integer") from exc


def _pmap(fn: Callable, items: Sequence) -> list:
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def module_hashes() -> dict[str, str]:
    here = Path(__file__).parent
    out = {}
    for m in MODULES:
        path = here / f"{m}.py"
        if path.exists():
            out[m] = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
    return out


def tail_estimates(cfg: ExperimentConfig) -> dict[str, float]:
    try:
        w = make_weight(cfg.weight)
        return {"l1_tail": tail_bound(w, cfg.lam_half, 1.0), "l2_tail": tail_bound(w, cfg.lam_half, 2.0)}
    except Exception as exc:  # the manifest records why the estimate is missing
        return {"error": repr(exc)}


def write_outputs(name: str, table: Table, cfg: ExperimentConfig, status: str = "complete",
                  error: str | None = None) -> tuple[Path, Path]:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    path.write_text(csv_text(table.columns, table.rows), encoding="utf-8", newline="")
    manifest = {
        "experiment": name,
        "version": __version__,
        "status": status,
        "error": error,
        "config": asdict(cfg),
        "summary": table.summary,
        "tail_error": tail_estimates(cfg),
        "modules": module_hashes(),
        "columns": list(table.columns),
    }
    side = out / f"{name}.json"
    side.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default), encoding="utf-8")
    return path, side


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Slope, R^2 and prefactor of log y against log x."""
    fit = linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.rvalue**2), float(np.exp(fit.intercept))


# ------------------------------------------------------------------ shared pieces


@dataclass(frozen=True, eq=False)
class Solved:
    w: Weight
    lgrid: LambdaGrid
    rgrid: RGrid
    sweep: object


def solve_weight(w: Weight, cfg: ExperimentConfig) -> Solved:
    lg, rg = cfg.grids()
    lg = lg.shifted_off(w.singular_points)
    acc = compute_accelerant(w, rg, lg)
    return Solved(w, lg, rg, continuation_sweep(acc, rg))


def family_weight(family: str, delta: float) -> Weight:
    return bump_weight(delta) if family == "bump" else gauss_weight(delta)


def _sup_deviation_norm(s: Solved, idx: list[int], ps: Sequence[float]) -> dict[float, list[float]]:
    out: dict[float, list[float]] = {p: [] for p in ps}
    for i in idx:
        d = GridFunction(s.lgrid, evaluate_P(s.sweep.slices[i], s.lgrid.nodes))
        for p in ps:
            out[p].append(weighted_lp_norm(d, s.w, p))
    return out


# ------------------------------------------------------------------ experiments


def steklov_sweep(cfg: ExperimentConfig) -> Table:
    """r -> ||P(r, .) - e^{i lam r}||_{L^p_w} with its sup, plateau ratio and first-order prediction."""
    cfg.validate()
    w = make_weight(cfg.weight)
    s = solve_weight(w, cfg)
    idx = cfg.r_indices(s.rgrid)
    norms = _sup_deviation_norm(s, idx, cfg.ps)
    lam = s.lgrid.nodes
    dev = w.nodal(lam) - 1.0
    rows, summary = [], {}
    for p in cfg.ps:
        for i, v in zip(idx, norms[p]):
            rows.append((s.rgrid.nodes[i], p, v))
        pred = 0.0
        for i in idx:
            r = s.rgrid.nodes[i]
            if r > 0:
                first = band_apply(s.lgrid, r)(dev * np.exp(1j * lam * r))
                pred = max(pred, weighted_lp_norm(GridFunction(s.lgrid, first), w, p))
        vals = np.array(norms[p])
        top = float(vals.max()) if vals.size else 0.0
        tail = vals[int(0.75 * (vals.size - 1)):]
        summary[f"p={p!r}"] = {
            "sup": top,
            "plateau": float(tail.max() / top) if top > 0 else 1.0,
            "first_order_prediction": pred,
        }
    return Table(("r", "p", "norm"), rows, summary)


def perturbative_slope(cfg: ExperimentConfig) -> Table:
    """sup_r ||P - e||_{L^p_w} against delta for w = 1 + delta u0, with the log-log fit."""
    cfg.validate()
    if len(cfg.deltas) < 3:
        raise BadParameter("need at least three deltas")

    def one(delta: float):
        w = family_weight(cfg.family, delta)
        s = solve_weight(w, cfg)
        norms = _sup_deviation_norm(s, cfg.r_indices(s.rgrid), cfg.ps)
        tau = a2_characteristic(w).value - 1.0
        return delta, tau, {p: max(v) for p, v in norms.items()}

    res = _pmap(one, list(cfg.deltas))
    rows, summary = [], {}
    for p in cfg.ps:
        xs = [abs(d) for d, _, _ in res]
        ys = [n[p] for _, _, n in res]
        slope, r2, pref = loglog_fit(xs, ys)
        i_min, i_max = int(np.argmin(xs)), int(np.argmax(xs))
        summary[f"p={p!r}"] = {"slope": slope, "r2": r2, "prefactor": pref,
                               "small_over_large": ys[i_min] / ys[i_max]}
        rows.extend((d, tau, p, n[p]) for d, tau, n in res)
    taus = [t for _, t, _ in res if t > 0]
    summary["tau_decades"] = float(np.log10(max(taus) / min(taus))) if taus else 0.0
    return Table(("delta", "tau", "p", "sup_norm"), rows, summary)


def divergence_u(p2: float, kind: str = "log") -> Callable[[np.ndarray], np.ndarray]:
    if kind == "log":
        return lambda lam: (1 + lam**2) ** (-0.5 / p2) * np.log(np.e + np.abs(lam)) ** (-2.0 / p2)
    if kind == "bump":
        return lambda lam: np.exp(-0.5 * lam**2)
    raise BadParameter(f"unknown probe function {kind!r}")


def divergence_probe(p2: float, p: float, ns: Sequence[float], lam_half: float = 512.0,
                     n_points: int = 32768, kind: str = "log") -> Table:
    """n -> ||P_{[-n, n]} u||_{L^p(grid)}."""
    if not 1 < p <= p2:
        raise BadParameter("need 1 < p <= p2")
    grid = LambdaGrid(lam_half, n_points)
    u = divergence_u(p2, kind)(grid.nodes)
    U = np.fft.fft(u)
    rows, skipped = [], []
    for n in ns:
        try:
            m = band_multiplier(grid, -n, n)
        except BandOutOfRange:
            skipped.append(n)
            continue
        rows.append((n, lp_grid_norm(np.fft.ifft(m * U), grid, p)))
    vals = [v for _, v in rows]
    summary = {
        "increasing": bool(all(b > a for a, b in zip(vals, vals[1:]))),
        "ratio": vals[-1] / vals[0] if vals else float("nan"),
        "skipped_above_nyquist": skipped,
        "nyquist": grid.nyquist,
        "u_norm_window": lp_grid_norm(u, grid, p),
    }
    return Table(("n", "norm"), rows, summary)


def _remainder_norms(s: Solved, k: int, ps: Sequence[float], idx: list[int], weighted: bool,
                     check_window: float = 20.0) -> dict[float, list[float]]:
    out: dict[float, list[float]] = {p: [] for p in ps}
    lam = s.lgrid.nodes
    # derivative stencils need a few samples; below that R is left out of the sup
    idx = [i for i in idx if i == 0 or i >= 8]
    for i in idx:
        rem = compute_remainder(s.sweep.slices[i], k, lam, s.w, check_window=check_window)
        gf = GridFunction(s.lgrid, rem.R)
        for p in ps:
            out[p].append(weighted_lp_norm(gf, s.w if weighted else None, p))
    return out


def remainder_scaling(cfg: ExperimentConfig) -> Table:
    """sup_r ||R_{k,r}||_{L^p} against delta for w = 1 + delta v."""
    cfg.validate()
    if len(cfg.deltas) < 3:
        raise BadParameter("need at least three deltas")

    def one(delta: float):
        w = family_weight(cfg.family, delta)
        s = solve_weight(w, cfg)
        norms = _remainder_norms(s, cfg.k, cfg.ps, cfg.r_indices(s.rgrid), weighted=False)
        return delta, {p: max(v) for p, v in norms.items()}

    res = _pmap(one, list(cfg.deltas))
    rows, summary = [], {}
    for p in cfg.ps:
        xs = [abs(d) for d, _ in res]
        ys = [n[p] for _, n in res]
        slope, r2, pref = loglog_fit(xs, ys)
        summary[f"p={p!r}"] = {"slope": slope, "r2": r2, "prefactor": pref}
        rows.extend((d, cfg.k, p, n[p]) for d, n in res)
    return Table(("delta", "k", "p", "sup_norm"), rows, summary)


def best_split(curve: np.ndarray, h: float) -> tuple[float, float]:
    """min over theta of ||(curve - theta)_+||_{l^2(h)} + theta, and the minimiser."""
    curve = np.asarray(curve, dtype=float)
    top = float(curve.max(initial=0.0))
    if top <= 0:
        return 0.0, 0.0

    def f(t: float) -> float:
        return float(np.sqrt(h * np.sum(np.clip(curve - t, 0, None) ** 2)) + t)

    cands = [0.0, top, *np.unique(curve)]
    res = minimize_scalar(f, bounds=(0.0, top), method="bounded", options={"xatol": 1e-12 * top})
    cands.append(float(res.x))
    vals = [f(t) for t in cands]
    i = int(np.argmin(vals))
    return vals[i], cands[i]


def mixed_norm_table(cfg: ExperimentConfig) -> Table:
    """r -> ||R_{1,r}||_{L^p_w} and its discrete L^2 + L^infinity split value."""
    cfg.validate()
    if not cfg.q > 2:
        raise BadParameter("q must exceed 2")
    w = make_weight(cfg.weight)
    if not w.is_constant and not moment_certified(w, math.ceil(cfg.q)):
        raise RegularityNotCertified(f"<lam>^{cfg.q}(w - 1) is not certified integrable for {w.spec!r}")
    s = solve_weight(w, cfg)
    idx = cfg.r_indices(s.rgrid)
    curve = np.array(_remainder_norms(s, 1, [cfg.p], idx, weighted=True)[cfg.p])
    h = (s.rgrid.nodes[idx[1]] - s.rgrid.nodes[idx[0]]) if len(idx) > 1 else s.rgrid.step
    split, theta = best_split(curve, h)
    rows = [(s.rgrid.nodes[i], cfg.p, v) for i, v in zip(idx, curve)]
    return Table(("r", "p", "norm"), rows, {"split": split, "theta": theta, "sup": float(curve.max(initial=0.0))})


# ------------------------------------------------------------------ acceptance criteria


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def criterion_1(seed: int = 0) -> list[ReportRow]:
    def run():
        w = make_weight("const:c=1")
        cfg = ExperimentConfig(weight=w.spec)
        s = solve_weight(w, cfg)
        ev = evaluate_all(s.sweep, s.rgrid, s.lgrid.nodes)
        dev = float(np.max(np.abs(ev.P - np.exp(1j * np.outer(s.rgrid.nodes, s.lgrid.nodes)))))
        a = float(np.max(np.abs(ev.A)))
        rem = 0.0
        for r in (1.0, 5.0, 20.0):
            sl = s.sweep.slices[s.rgrid.index(r)]
            for k in range(4):
                rem = max(rem, float(np.max(np.abs(compute_remainder(sl, k, s.lgrid.nodes[::16], w).R))))
        Q = float(np.max(np.abs(assemble_Q(w, 2.0, 5.0, LambdaGrid(16.0, 256)).entries)))
        return dev, a, rem, Q

    (dev, a, rem, Q), dt = _timed(run)
    tol = "<= 1e-10"
    return [
        _row("C1", "sup|P - e^{i lam r}|", dev, dev <= 1e-10, tol, weight="const:c=1"),
        _row("C1", "sup|A|", a, a <= 1e-10, tol),
        _row("C1", "sup|R_k|, k=0..3", rem, rem <= 1e-10, tol),
        _row("C1", "sup|Q|", Q, Q <= 1e-10, tol, p=2, r=5),
        _row("C1", "runtime_s", dt, dt < 5, "< 5"),
    ]


def criterion_2(seed: int = 0) -> list[ReportRow]:
    def run():
        w = bump_weight(0.1)
        cfg = ExperimentConfig()
        lg, rg = cfg.grids()
        acc = compute_accelerant(w, rg, lg)
        res = 0.0
        for r in (5.0, 10.0, 20.0):
            n = int(round(r / rg.step))
            h = acc.at(np.arange(n + 1)).astype(complex)
            g = solve_resolvent(acc, r).g
            res = max(res, float(np.max(np.abs(discrete_operator(acc, n) @ g - h)) / np.linalg.norm(h)))
        lev = solve_resolvent(acc, 20.0).g
        cg = solve_resolvent(acc, 20.0, method="cg").g
        lc = float(np.max(np.abs(lev - cg)))
        sweep = continuation_sweep(acc, rg, check_every=10)
        cont = max(d for _, d in sweep.checkpoints)
        # discretisation error at r = 2 against a reference at dr/8
        steps = (0.1, 0.05, 0.025)
        ref_dr = steps[0] / 8
        ref = solve_resolvent(compute_accelerant(w, RGrid(ref_dr, 2.0), lg), 2.0).g
        errs = []
        for dr in steps:
            g = solve_resolvent(compute_accelerant(w, RGrid(dr, 2.0), lg), 2.0).g
            stride = int(round(steps[0] / dr))
            fine = int(round(steps[0] / ref_dr))
            errs.append(float(np.max(np.abs(g[::stride] - ref[::fine]))))
        return res, lc, cont, errs

    (res, lc, cont, errs), dt = _timed(run)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    rows = [
        _row("C2", "resolvent residual / ||h||", res, res <= 1e-10, "<= 1e-10", weight="bump:0.1"),
        _row("C2", "levinson vs cg", lc, lc <= 1e-9, "<= 1e-9", r=20),
        _row("C2", "continuation vs direct", cont, cont <= 1e-6, "<= 1e-6", dr=0.05),
    ]
    for dr, e in zip((0.1, 0.05, 0.025), errs):
        rows.append(_row("C2", "discretisation error", e, True, "recorded", dr=dr, r=2))
    for i, q in enumerate(ratios):
        rows.append(_row("C2", "error ratio per halving", q, q >= 3.5, ">= 3.5", step=i))
    rows.append(_row("C2", "runtime_s", dt, dt < 60, "< 60"))
    return rows


def criterion_3(seed: int = 0) -> list[ReportRow]:
    rng = np.random.default_rng(seed)
    w = bump_weight(0.1)
    cfg = ExperimentConfig()
    lg, rg = cfg.grids()
    acc = compute_accelerant(w, rg, lg)
    herm = flip = 0.0
    for r in np.linspace(2.0, 20.0, 10):
        n = int(round(r / rg.step))
        cols: dict[int, np.ndarray] = {}

        def col(j: int) -> np.ndarray:
            if j not in cols:
                cols[j] = solve_resolvent(acc, n * rg.step, offset=j * rg.step).g
            return cols[j]

        for _ in range(5):
            i, j = (int(v) for v in rng.integers(0, n + 1, size=2))
            gst = col(j)[i]
            herm = max(herm, abs(gst - np.conj(col(i)[j])))
            flip = max(flip, abs(gst - col(n - i)[n - j]))
    return [
        _row("C3", "|Gamma(s,t) - conj Gamma(t,s)|", herm, herm <= 1e-8, "<= 1e-8", seed=seed),
        _row("C3", "|Gamma(s,t) - Gamma(r-t,r-s)|", flip, flip <= 1e-8, "<= 1e-8", seed=seed),
    ]


def ode_discrepancy(w: Weight, dr: float, lam: np.ndarray, r_max: float = 20.0) -> float:
    cfg = ExperimentConfig(dr=dr, r_max=r_max)
    s = solve_weight(w, cfg)
    ev = evaluate_all(s.sweep, s.rgrid, lam)
    ode = ode_oracle(ev.A, dr, lam)
    return float(np.max(np.abs(ode.P - ev.P[-1])))


def criterion_4(seed: int = 0) -> list[ReportRow]:
    lam = np.linspace(-10, 10, 201)
    rows = []
    for spec in ("bump:delta=0.1,a=-1,b=1", "bump:delta=-0.3,a=0,b=2"):
        w = make_weight(spec)
        e1 = ode_discrepancy(w, 0.05, lam)
        e2 = ode_discrepancy(w, 0.025, lam)
        rows.append(_row("C4", "sup|P_ode - P_integral|", e1, e1 <= 1e-5, "<= 1e-5", weight=spec, dr=0.05))
        rows.append(_row("C4", "improvement under dr/2", e1 / e2, e1 / e2 >= 8, ">= 8", weight=spec))
    return rows


def criterion_5(seed: int = 0) -> list[ReportRow]:
    rows = []
    f = SplineBump(5.0, 1.0, 1.0)
    for spec in ("bump:delta=0.1,a=-1,b=1", "bump:delta=-0.3,a=0,b=2"):
        w = make_weight(spec)
        for lam_half, n, tol in ((128.0, 4096, 5e-3), (256.0, 8192, 2.5e-3)):
            s = solve_weight(w, ExperimentConfig(lam_half=lam_half, n_points=n))
            res = abs(orthonormality_check(w, f, f, s.sweep, s.rgrid, s.lgrid))
            rows.append(_row("C5", "orthonormality residual", res, res <= tol, f"<= {tol:g}", weight=spec,
                             lam_half=lam_half))
        sl = s.sweep.slices[s.rgrid.index(10.0)]
        bo = abs(band_orthogonality_check(w, sl, 0, f, s.lgrid))
        rows.append(_row("C5", "band orthogonality k=0", bo, bo <= 1e-4, "<= 1e-4", weight=spec, r=10))
    return rows


def criterion_6(seed: int = 0) -> list[ReportRow]:
    cfg = ExperimentConfig(deltas=tuple(np.logspace(-3, -1, 7)), ps=(2.0, 2.2), r_stride=1.0)
    tab, dt = _timed(lambda: perturbative_slope(cfg))
    rows = []
    for p in cfg.ps:
        sm = tab.summary[f"p={p!r}"]
        rows.append(_row("C6", "slope", sm["slope"], 0.9 <= sm["slope"] <= 1.1, "in [0.9, 1.1]", p=p))
        rows.append(_row("C6", "R^2", sm["r2"], sm["r2"] >= 0.99, ">= 0.99", p=p))
    rows.append(_row("C6", "runtime_s", dt, dt < 300, "< 300"))
    return rows


def criterion_7(seed: int = 0) -> list[ReportRow]:
    rows = []
    for k in (0, 1):
        cfg = ExperimentConfig(family="gauss", deltas=tuple(np.logspace(-3, -1, 5)), ps=(2.0, 4.0), k=k, r_stride=1.0)
        tab = remainder_scaling(cfg)
        for p in cfg.ps:
            sl = tab.summary[f"p={p!r}"]["slope"]
            rows.append(_row("C7", "remainder slope", sl, 0.9 <= sl <= 1.1, "in [0.9, 1.1]", k=k, p=p))
    grid = LambdaGrid(16.0, 256)
    for delta in (0.1, 0.3, 0.45):
        nr = neumann_inverse(bump_weight(delta), 5.0, grid)
        rows.append(_row("C7", "neumann vs direct", nr.direct_gap, nr.direct_gap <= 1e-8, "<= 1e-8", delta=delta))
    return rows


def criterion_8(seed: int = 0) -> list[ReportRow]:
    ns = [1, 2, 4, 8, 16, 32, 64]
    p2 = 1.5
    low = divergence_probe(p2, round(0.8 * p2, 12), ns)
    top = divergence_probe(p2, p2, ns)
    return [
        _row("C8", "strictly increasing", float(low.summary["increasing"]), low.summary["increasing"], "true",
             p=round(0.8 * p2, 12), p2=p2),
        _row("C8", "final/initial ratio", low.summary["ratio"], low.summary["ratio"] >= 3, ">= 3", p=round(0.8 * p2, 12), p2=p2),
        _row("C8", "final/initial ratio", top.summary["ratio"], top.summary["ratio"] <= 2, "<= 2", p=p2, p2=p2),
    ]


def criterion_9(seed: int = 0) -> list[ReportRow]:
    w = bump_weight(0.1)
    small = LambdaGrid(16.0, 512)
    Q = assemble_Q(w, 2.0, 5.0, small).entries
    anti = float(np.max(np.abs(Q + Q.conj().T)))
    smin = float(np.linalg.svd(np.eye(Q.shape[0]) - Q, compute_uv=False).min())
    rows = [
        _row("C9", "antisymmetry |Q + Q*|", anti, anti <= 1e-10, "<= 1e-10", N=512),
        _row("C9", "min singular value of I - Q", smin, smin >= 1 - 1e-8, ">= 1 - 1e-8", N=512),
    ]
    res = {}
    for lam_half, n in ((128.0, 4096), (256.0, 8192)):
        s = solve_weight(w, ExperimentConfig(lam_half=lam_half, n_points=n))
        sl = s.sweep.slices[s.rgrid.index(5.0)]
        lam = s.lgrid.nodes
        e = np.exp(1j * lam * 5.0)
        D = evaluate_P(sl, lam)
        res[lam_half] = functional_residual(w, 2.0, 5.0, s.lgrid, D, e).residual
        if lam_half == 128.0:
            rows.append(_row("C9", "functional residual k=0", res[lam_half], res[lam_half] <= 5e-3, "<= 5e-3",
                             lam_half=lam_half))
            rem = compute_remainder(sl, 1, lam, w, check_window=20.0)
            r1 = functional_residual(w, 2.0, 5.0, s.lgrid, rem.R, lam * e + rem.a(1, lam)).residual
            rows.append(_row("C9", "functional residual k=1", r1, r1 <= 2e-2, "<= 2e-2", lam_half=lam_half))
            for p in (1.8, 2.0, 2.2):
                disc = solve_X(w, p, 5.0, s.lgrid, D, e).discrepancy
                rows.append(_row("C9", "solve_X vs direct", disc, disc <= 1e-2, "<= 1e-2", p=p))
    ratio = res[128.0] / res[256.0]
    rows.append(_row("C9", "residual ratio under Lambda doubling", ratio, ratio >= 2, ">= 2", dlam=1 / 16))
    return rows


def random_step(rng: np.random.Generator, max_pieces: int = 16, span: int = 8, bits: int = 4) -> StepFunction:
    m = int(rng.integers(1, max_pieces + 1))
    den = 2**bits
    pts = np.sort(rng.choice(np.arange(-span * den, span * den + 1), size=m + 1, replace=False))
    vals = rng.integers(-4, 5, size=m)
    return StepFunction([Fraction(int(x), den) for x in pts], [int(v) for v in vals])


def cz_finest(u: StepFunction) -> int:
    """Scale index below which every dyadic interval sits inside one piece."""
    return max(int(math.log2(x.denominator)) for x in u.breaks) + 1


def criterion_10(seed: int = 0, count: int = 100) -> list[ReportRow]:
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(count):
        u = random_step(rng)
        beta = Fraction(int(rng.integers(1, 13)), 4)
        cases.append((u, beta, 0.0 if i % 2 == 0 else 2.0))
    t0 = time.perf_counter()
    decs = [cz_decompose(u, beta, q) for u, beta, q in cases]
    reports = [cz_verify(d, u) for d, (u, _, _) in zip(decs, cases)]
    dt = time.perf_counter() - t0
    same = sum(d.intervals == brute_force_cz(u, beta, q, finest=cz_finest(u)) for d, (u, beta, q) in zip(decs, cases))
    props = {name: sum(getattr(r, name) for r in reports) for name in ("covered", "maximal", "disjoint", "sum_bound")}
    u, beta, q = cases[0]
    full = brute_force_cz(u, beta, q, finest=20, coarsest=20) == decs[0].intervals
    rows = [_row("C10", "oracle agreement", same, same == count, f"== {count}", seed=seed)]
    rows += [_row("C10", f"property {k}", v, v == count, f"== {count}") for k, v in props.items()]
    rows.append(_row("C10", "exhaustive oracle 2^-20..2^20 (case 0)", float(full), full, "true"))
    rows.append(_row("C10", "runtime_s", dt, dt < 10, "< 10"))
    return rows


def criterion_11(seed: int = 0) -> list[ReportRow]:
    a2 = a2_characteristic(bump_weight(0.2)).value
    exact = 2.2**2 / (4 * 1.2)
    deltas = (0.05, 0.1, 0.2)
    gaps = [weight_gap_norm(bump_weight(d), 2.0, 2.0) for d in deltas]
    slope, _, _ = loglog_fit(deltas, gaps)
    ratios = []
    for d in deltas:
        w = bump_weight(d)
        tau = a2_characteristic(w).value - 1.0
        ratios.append(bmo_estimate(w) / math.sqrt(tau))
    C = 2.0
    return [
        _row("C11", "|A2 scan - (2+d)^2/(4(1+d))|", abs(a2 - exact), abs(a2 - exact) <= 1e-3, "<= 1e-3", delta=0.2),
        _row("C11", "gap-norm slope", slope, abs(slope - 1) <= 0.05, "in [0.95, 1.05]", deltas=deltas),
        _row("C11", "max BMO / sqrt(tau)", max(ratios), max(ratios) <= C, f"<= C = {C}", deltas=deltas),
    ]


CRITERIA: dict[int, Callable[..., list[ReportRow]]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def quick_suite(seed: int = 0) -> list[ReportRow]:
    """Identity-weight checks plus the exact combinatorial ones."""
    rows = criterion_1(seed)
    cfg = ExperimentConfig(weight="const:c=1", r_stride=2.0)
    tab = steklov_sweep(cfg)
    top = tab.summary["p=2.0"]["sup"]
    rows.append(_row("quick", "steklov sweep sup, w=1", top, top <= 1e-10, "<= 1e-10"))
    mixed = mixed_norm_table(ExperimentConfig(weight="const:c=1", q=3.0, r_stride=2.0)).summary["split"]
    rows.append(_row("quick", "mixed split, w=1", mixed, mixed <= 1e-10, "<= 1e-10"))
    rows += criterion_10(seed, count=20)
    return rows


def verify_all(level: str = "quick", seed: int = 0, only: Sequence[int] | None = None) -> list[ReportRow]:
    if level not in ("quick", "full"):
        raise BadParameter(f"level must be quick or full, got {level!r}")
    if level == "quick" and not only:
        return quick_suite(seed)
    rows: list[ReportRow] = []
    for i in only or sorted(CRITERIA):
        if i not in CRITERIA:
            raise BadParameter(f"no criterion {i}")
        rows += CRITERIA[i](seed)
    return rows


def report_table(rows: Sequence[ReportRow]) -> Table:
    fields = ("experiment", "params", "observable", "value", "tolerance", "passed")
    body = [tuple(getattr(r, f) for f in fields) for r in rows]
    return Table(fields, body, {"passed": sum(r.passed for r in rows), "failed": sum(not r.passed for r in rows)})


__all__ = [
    "CRITERIA",
    "ExperimentConfig",
    "ReportRow",
    "Table",
    "best_split",
    "csv_text",
    "divergence_probe",
    "loglog_fit",
    "mixed_norm_table",
    "perturbative_slope",
    "remainder_scaling",
    "report_table",
    "steklov_sweep",
    "verify_all",
    "write_outputs",
]
