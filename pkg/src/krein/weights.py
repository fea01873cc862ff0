"""Closed-form weights, their A_p and BMO diagnostics, and deviation norms."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import BadSpec, NonFinite, NonIntegrable
from .harmonic import GridFunction, LambdaGrid, weighted_lp_norm
from .quadrature import composite_rule, gauss_legendre01


# ------------------------------------------------------------------ factors


@dataclass(frozen=True)
class Const:
    c: float = 1.0

    def local(self, base, off):
        return np.full(np.broadcast(base, off).shape, self.c)

    breakpoints: ClassVar[tuple] = ()
    singular: ClassVar[tuple] = ()


@dataclass(frozen=True)
class Bump:
    """1 + delta on [a, b], 1 elsewhere."""

    delta: float
    a: float = -1.0
    b: float = 1.0

    def local(self, base, off):
        lam = base + off
        return np.where((lam >= self.a) & (lam <= self.b), 1.0 + self.delta, 1.0)

    @property
    def breakpoints(self) -> tuple:
        return (self.a, self.b)

    singular: ClassVar[tuple] = ()


@dataclass(frozen=True)
class Gauss:
    """1 + delta * exp(-(lam - center)^2 / (2 width^2))."""

    delta: float
    center: float = 0.0
    width: float = 1.0

    def local(self, base, off):
        t = (base - self.center) + off
        return 1.0 + self.delta * np.exp(-0.5 * (t / self.width) ** 2)

    breakpoints: ClassVar[tuple] = ()
    singular: ClassVar[tuple] = ()


@dataclass(frozen=True)
class Power:
    """|(lam - center)/scale|^beta inside the unit cell of the scaled variable, 1 outside."""

    beta: float
    center: float = 0.0
    scale: float = 1.0

    def local(self, base, off):
        t = np.abs(((base - self.center) + off) / self.scale)
        with np.errstate(divide="ignore"):
            return np.where(t <= 1.0, t**self.beta, 1.0)

    @property
    def breakpoints(self) -> tuple:
        return (self.center - self.scale, self.center + self.scale)

    @property
    def singular(self) -> tuple:
        return ((self.center, self.beta),) if self.beta != 0 else ()


@dataclass(frozen=True)
class LogTail:
    """1 + delta <lam>^-a log(e + |lam|)^-b."""

    a: float
    b: float = 0.0
    delta: float = 1.0

    def local(self, base, off):
        lam = base + off
        return 1.0 + self.delta * (1.0 + lam**2) ** (-self.a / 2) * np.log(np.e + np.abs(lam)) ** (-self.b)

    breakpoints: ClassVar[tuple] = (0.0,)
    singular: ClassVar[tuple] = ()


Factor = Const | Bump | Gauss | Power | LogTail


# ------------------------------------------------------------------ weight


@dataclass(frozen=True)
class Weight:
    """Finite product of closed-form factors raised to ``exponent``."""

    factors: tuple[Factor, ...]
    spec: str = ""
    deviation_exponents: tuple[float, float] = (2.0, 2.0)
    exponent: float = 1.0

    def __post_init__(self) -> None:
        centers = [s[0] for f in self.factors for s in f.singular]
        if len(set(centers)) != len(centers):
            raise BadSpec("coincident singular points")
        for f in self.factors:
            if isinstance(f, Power):
                if not -1.0 < f.beta < 1.0:
                    raise BadSpec(f"power exponent {f.beta} outside (-1, 1)")
                if not f.scale > 0:
                    raise BadSpec("power scale must be positive")
            if isinstance(f, Const) and not f.c > 0:
                raise BadSpec("constant must be positive")
            if isinstance(f, (Bump, Gauss)) and not f.delta > -1.0:
                raise BadSpec("bump height must exceed -1")
            if isinstance(f, Gauss) and not f.width > 0:
                raise BadSpec("gauss width must be positive")
            if isinstance(f, LogTail) and not (f.delta > -1.0 and f.a > 0):
                raise BadSpec("logtail needs a > 0 and delta > -1")
            if isinstance(f, Bump) and not f.a < f.b:
                raise BadSpec("bump needs a < b")
        p1, p2 = self.deviation_exponents
        if not 1.0 <= p1 <= p2 <= 2.0:
            raise BadSpec(f"deviation exponents {self.deviation_exponents} violate 1 <= p1 <= p2 <= 2")

    def local(self, base, off) -> np.ndarray:
        base = np.asarray(base, dtype=float)
        off = np.asarray(off, dtype=float)
        val = np.ones(np.broadcast(base, off).shape)
        for f in self.factors:
            val = val * f.local(base, off)
        return val if self.exponent == 1.0 else val**self.exponent

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return self.local(lam, np.zeros_like(lam))

    def nodal(self, lam) -> np.ndarray:
        """Point values, except that a node sitting on a jump takes the mean of the one-sided limits."""
        lam = np.asarray(lam, dtype=float)
        val = self(lam)
        for b in self.breakpoints:
            eps = 1e-9 * max(1.0, abs(b))
            hit = np.abs(lam - b) <= 1e-12 * max(1.0, abs(b))
            if np.any(hit):
                val[hit] = 0.5 * (self(np.array([b - eps]))[0] + self(np.array([b + eps]))[0])
        return val

    def pow(self, s: float) -> "Weight":
        return Weight(self.factors, self.spec, self.deviation_exponents, self.exponent * s)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({b for f in self.factors for b in f.breakpoints}))

    @property
    def singularities(self) -> tuple[tuple[float, float], ...]:
        return tuple((c, b * self.exponent) for f in self.factors for c, b in f.singular)

    @property
    def singular_points(self) -> tuple[float, ...]:
        return tuple(c for c, _ in self.singularities)

    @property
    def is_constant(self) -> bool:
        return all(isinstance(f, Const) or getattr(f, "delta", 1.0) == 0.0 for f in self.factors)

    def tail_decay(self) -> float:
        """Algebraic decay rate of |w - 1| at infinity (inf for compact support)."""
        rates = [f.a for f in self.factors if isinstance(f, LogTail) and f.delta != 0]
        consts = [f.c for f in self.factors if isinstance(f, Const)]
        if consts and not np.isclose(np.prod(consts), 1.0):
            return 0.0
        return min(rates) if rates else np.inf

    def floor(self, window: tuple[float, float], n: int = 20001) -> float:
        """Sampled essential infimum on ``window`` (singular points excluded)."""
        lam = np.linspace(*window, n)
        v = self(lam)
        v = v[np.isfinite(v)]
        return float(np.min(v))

    def rule(self, a: float, b: float, g: Callable | None = None, panels_per_unit: float = 4.0):
        """Quadrature rule on [a, b] adapted to this weight's breakpoints and singularities."""
        return composite_rule(a, b, breakpoints=self.breakpoints, singular_points=self.singular_points,
                              g=g if g is not None else self.local, panels_per_unit=panels_per_unit)


# ------------------------------------------------------------------ parsing

_FACTOR_KEYS = {
    "const": (Const, {"c": "c"}),
    "bump": (Bump, {"delta": "delta", "a": "a", "b": "b"}),
    "gauss": (Gauss, {"delta": "delta", "center": "center", "width": "width"}),
    "power": (Power, {"beta": "beta", "center": "center", "scale": "scale"}),
    "logtail": (LogTail, {"a": "a", "b": "b", "delta": "delta"}),
}


def _split_top(s: str, sep: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in s:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def _parse_factors(spec: str) -> list[Factor]:
    spec = spec.strip()
    m = re.fullmatch(r"(\w+)\s*:\s*(.*)", spec, flags=re.S)
    if not m:
        raise BadSpec(f"malformed weight spec {spec!r}")
    kind, body = m.group(1), m.group(2).strip()
    if kind == "prod":
        if not (body.startswith("[") and body.endswith("]")):
            raise BadSpec("prod expects [f1;f2;...]")
        parts = [p for p in _split_top(body[1:-1], ";") if p.strip()]
        if not parts:
            raise BadSpec("empty product")
        return [f for p in parts for f in _parse_factors(p)]
    if kind not in _FACTOR_KEYS:
        raise BadSpec(f"unknown weight kind {kind!r}")
    cls, keys = _FACTOR_KEYS[kind]
    kwargs: dict[str, float] = {}
    for item in filter(None, (x.strip() for x in body.split(","))):
        if "=" not in item:
            raise BadSpec(f"expected key=value, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        if k not in keys:
            raise BadSpec(f"unknown key {k!r} for {kind}")
        try:
            kwargs[keys[k]] = float(v)
        except ValueError as exc:
            raise BadSpec(f"bad number {v!r}") from exc
    try:
        return [cls(**kwargs)]
    except TypeError as exc:
        raise BadSpec(f"missing parameters for {kind}: {exc}") from exc


def make_weight(spec: str | Sequence[Factor], deviation_exponents: tuple[float, float] = (2.0, 2.0)) -> Weight:
    """Build a weight from a spec string such as ``bump:delta=0.1,a=-1,b=1``."""
    if isinstance(spec, str):
        return Weight(tuple(_parse_factors(spec)), spec, deviation_exponents)
    return Weight(tuple(spec), "", deviation_exponents)


def bump_weight(delta: float, a: float = -1.0, b: float = 1.0) -> Weight:
    return make_weight(f"bump:delta={float(delta)!r},a={float(a)!r},b={float(b)!r}")


def gauss_weight(delta: float, center: float = 0.0, width: float = 1.0) -> Weight:
    return make_weight(f"gauss:delta={float(delta)!r},center={float(center)!r},width={float(width)!r}")


def power_weight(beta: float, center: float = 0.0, scale: float = 1.0) -> Weight:
    return make_weight(f"power:beta={float(beta)!r},center={float(center)!r},scale={float(scale)!r}")


# ------------------------------------------------------------------ interval scans


@dataclass
class _CellData:
    """Per-cell quadrature on a fine dyadic mesh of step h over [-X, X]."""

    h: float
    x0: float
    n_cells: int
    nodes: np.ndarray  # (n_cells, G) regular nodes, zero weight in special cells
    wts: np.ndarray
    special: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=dict)


def _cell_data(w: Weight, depth: int, span: float, g_order: int = 4) -> _CellData:
    h = 2.0 ** (-depth - 1)
    X = span
    n_cells = int(round(2 * X / h))
    x, gw = gauss_legendre01(g_order)
    left = -X + h * np.arange(n_cells)
    nodes = left[:, None] + h * x[None, :]
    wts = np.broadcast_to(h * gw, nodes.shape).copy()
    special: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    sing = set(w.singular_points)
    cells = set()
    for p in (*w.breakpoints, *w.singular_points):
        k = (p + X) / h
        if k < 0 or k > n_cells:
            continue
        if abs(k - round(k)) < 1e-9:
            j = int(round(k))
            cand = {j - 1, j}
            if p in sing:
                cand |= {j - 2, j + 1}
        else:
            j = int(np.floor(k))
            cand = {j}
            if p in sing:
                cand |= {j - 1, j + 1}
        cells |= {c for c in cand if 0 <= c < n_cells}
    for c in sorted(cells):
        a = left[c]
        b = a + h
        feats = [p for p in (*w.breakpoints, *w.singular_points) if a - 1e-12 <= p <= b + 1e-12]
        feats = [a if abs(p - a) < 1e-12 else b if abs(p - b) < 1e-12 else p for p in feats]
        rule = composite_rule(a, b, breakpoints=feats, singular_points=[p for p in feats if p in sing or
                              any(abs(p - s) < 1e-12 for s in sing)], g=w.local)
        special[c] = (rule.base, rule.off, rule.wts)
        wts[c] = 0.0
    return _CellData(h, -X, n_cells, nodes, wts, special)


def _family(cd: _CellData, depth: int, window: tuple[float, float]):
    """Yield (m, starts) for each level: intervals of m cells starting at cell index ``starts``."""
    for n in range(-depth, depth + 1):
        m = int(round(2.0 ** (-n) / cd.h))
        if m > cd.n_cells:
            continue
        for off in (0, m // 2):
            starts = np.arange(off, cd.n_cells - m + 1, m)
            lo = cd.x0 + starts * cd.h
            keep = (lo < window[1]) & (lo + m * cd.h > window[0])
            if np.any(keep):
                yield m, starts[keep]


def _cell_integrals(cd: _CellData, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    out = np.sum(cd.wts * func(cd.nodes, np.zeros_like(cd.nodes)), axis=1)
    for c, (base, off, wts) in cd.special.items():
        out[c] = np.sum(wts * func(base, off))
    return out


@dataclass(frozen=True)
class ApEstimate:
    p: float
    value: float
    search_depth: int
    argmax_interval: tuple[float, float]


def _span(window: tuple[float, float], depth: int) -> float:
    return float(np.ceil(max(abs(window[0]), abs(window[1])) / 2.0**depth) + 1) * 2.0**depth


def a2_characteristic(w: Weight, p: float = 2.0, depth: int = 6,
                      window: tuple[float, float] = (-128.0, 128.0)) -> ApEstimate:
    """Lower bound for [w]_{A_p} over dyadic and half-shifted dyadic intervals.

    Lengths range over 2^-depth .. 2^depth; intervals must meet ``window``.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    e = 1.0 / (1.0 - p)
    for c, beta in w.singularities:
        if beta * e <= -1.0:
            raise NonIntegrable(f"w^(1/(1-p)) not locally integrable at {c} (beta={beta}, p={p})")
    cd = _cell_data(w, depth, _span(window, depth))
    W = np.concatenate([[0.0], np.cumsum(_cell_integrals(cd, w.local))])
    V = np.concatenate([[0.0], np.cumsum(_cell_integrals(cd, lambda b, o: w.local(b, o) ** e))])
    best, arg = 1.0, (window[0], window[1])
    for m, starts in _family(cd, depth, window):
        L = m * cd.h
        aw = (W[starts + m] - W[starts]) / L
        av = (V[starts + m] - V[starts]) / L
        vals = aw * av ** (p - 1.0)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            lo = cd.x0 + starts[i] * cd.h
            arg = (lo, lo + L)
    if not np.isfinite(best):
        raise NonIntegrable("A_p average is not finite")
    return ApEstimate(p, best, depth, arg)


def bmo_estimate(w: Weight, depth: int = 8, window: tuple[float, float] = (-128.0, 128.0)) -> float:
    """Lower bound for ||log w||_BMO over the same interval family as the A_p scan."""
    cd = _cell_data(w, depth, _span(window, depth))
    with np.errstate(divide="ignore"):
        logw = np.log(w.local(cd.nodes, np.zeros_like(cd.nodes)))
    logw = np.where(cd.wts > 0, logw, 0.0)
    F = np.concatenate([[0.0], np.cumsum(np.sum(cd.wts * logw, axis=1))])
    spec_vals = {c: (np.log(w.local(b, o)), wt) for c, (b, o, wt) in cd.special.items()}
    for c, (lv, wt) in spec_vals.items():
        F[c + 1:] += np.sum(wt * lv)
    best = 0.0
    for m, starts in _family(cd, depth, window):
        L = m * cd.h
        mean = (F[starts + m] - F[starts]) / L
        idx = starts[:, None] + np.arange(m)[None, :]
        dev = np.abs(logw[idx] - mean[:, None, None])
        acc = np.sum(cd.wts[idx] * dev, axis=(1, 2))
        for c, (lv, wt) in spec_vals.items():
            k = np.nonzero((starts <= c) & (c < starts + m))[0]
            if k.size:
                acc[k] += np.sum(wt[None, :] * np.abs(lv[None, :] - mean[k, None]), axis=1)
        best = max(best, float(np.max(acc / L)))
    return best


# ------------------------------------------------------------------ deviation and gap norms


def _threshold_crossings(w: Weight, window: tuple[float, float], n: int = 40001) -> list[float]:
    """Points where |w - 1| crosses 1 on the window, refined by bracketing."""
    lam = np.linspace(*window, n)
    pts = [p for p in w.singular_points if window[0] < p < window[1]]
    lam = np.unique(np.concatenate([lam, np.array(pts) + 1e-13, np.array(pts) - 1e-13]))

    def phi(x: float) -> float:
        v = float(w(np.array([x]))[0])
        return abs(v - 1.0) - 1.0 if np.isfinite(v) else 1.0

    vals = np.array([abs(v - 1) - 1 if np.isfinite(v) else 1.0 for v in w(lam)])
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        a, b = lam[i], lam[i + 1]
        if any(a <= x <= b for x in w.breakpoints):
            out.extend(x for x in w.breakpoints if a <= x <= b)
            continue
        out.append(optimize.brentq(phi, a, b, xtol=1e-15, rtol=1e-15))
    return sorted(out)


@dataclass(frozen=True, eq=False)
class Deviation:
    u1: GridFunction
    u2: GridFunction
    norms: tuple[float, float]


def decompose_deviation(w: Weight, grid: LambdaGrid | None = None) -> Deviation:
    """Split w - 1 = u1 + u2 at |w - 1| = 1; norms in L^p1 and L^p2 on the grid window."""
    grid = grid or LambdaGrid(128.0, 4096)
    grid = grid.shifted_off(w.singular_points)
    d = w(grid.nodes) - 1.0
    big = np.abs(d) > 1.0
    u1 = GridFunction(grid, np.where(big, d, 0.0))
    u2 = GridFunction(grid, d - u1.values)
    window = (grid.origin, grid.origin + 2 * grid.half_width)
    cuts = _threshold_crossings(w, window)
    p1, p2 = w.deviation_exponents

    norms = []
    for upper, p in ((True, p1), (False, p2)):
        if w.is_constant and np.allclose(d, 0):
            norms.append(0.0)
            continue
        def integrand(b, o, upper=upper, p=p):
            loc = np.abs(w.local(b, o) - 1.0)
            sel = loc > 1.0
            return np.where(sel if upper else ~sel, loc**p, 0.0)

        rule = composite_rule(*window, breakpoints=(*cuts, *w.breakpoints), singular_points=w.singular_points,
                              g=integrand, panels_per_unit=4.0)
        vals = integrand(rule.base, rule.off)
        total = float(np.sum(rule.wts * vals))
        if not np.isfinite(total):
            raise NonFinite("deviation norm is not finite")
        norms.append(total ** (1.0 / p))
    return Deviation(u1, u2, (norms[0], norms[1]))


def weight_gap_norm(w: Weight, pt: float, p: float, q: float = 0.0,
                    window: tuple[float, float] = (-128.0, 128.0)) -> float:
    """|| w^(1/pt) - w^(-1/pt') ||_{L^p(<lam>^q dlam)} on the window."""
    if not pt > 1:
        raise ValueError("pt must exceed 1")
    ptd = pt / (pt - 1.0)
    for c, beta in w.singularities:
        e = min(beta / pt, -beta / ptd) * p
        if e <= -1.0:
            raise NonFinite(f"gap integrand not integrable at {c}: local exponent {e:.3f}")

    def g(base, off):
        v = w.local(base, off)
        return np.abs(v ** (1.0 / pt) - v ** (-1.0 / ptd))

    return weighted_lp_norm(lambda lam: g(lam, np.zeros_like(lam)), None, p, q, window=window,
                            breakpoints=w.breakpoints) if not w.singularities else _gap_singular(w, g, p, q, window)


def _gap_singular(w: Weight, g, p: float, q: float, window: tuple[float, float]) -> float:
    def integrand(base, off):
        lam = base + off
        return g(base, off) ** p * (1.0 + lam**2) ** (q / 2)

    rule = composite_rule(*window, breakpoints=w.breakpoints, singular_points=w.singular_points,
                          g=integrand, panels_per_unit=4.0)
    total = float(np.sum(rule.wts * integrand(rule.base, rule.off)))
    if not np.isfinite(total):
        raise NonFinite("gap norm is not finite")
    return total ** (1.0 / p)


def tail_bound(w: Weight, half_width: float, p: float = 1.0) -> float:
    """int_{|lam| > Lambda} |w - 1|^p dlam from the closed form."""
    if w.tail_decay() == 0.0:
        return np.inf

    def f(x: float) -> float:
        return abs(float(w(np.array([x]))[0]) - 1.0) ** p

    total = 0.0
    for a, b in ((half_width, np.inf), (-np.inf, -half_width)):
        val, _ = integrate.quad(f, a, b, limit=200, epsabs=1e-14)
        total += val
    return total


def deviation_moment(w: Weight, k: int, window: tuple[float, float] = (-128.0, 128.0)) -> float:
    """L = int <lam>^k |w - 1| dlam over the window plus the closed-form tail."""
    if k > 0 and w.tail_decay() <= k + 1:
        return np.inf

    def integrand(base, off):
        lam = base + off
        return np.abs(w.local(base, off) - 1.0) * (1.0 + lam**2) ** (k / 2)

    rule = composite_rule(*window, breakpoints=w.breakpoints, singular_points=w.singular_points,
                          g=integrand, panels_per_unit=4.0)
    inner = float(np.sum(rule.wts * integrand(rule.base, rule.off)))
    if np.isfinite(w.tail_decay()):
        def f(x: float) -> float:
            return abs(float(w(np.array([x]))[0]) - 1.0) * (1 + x * x) ** (k / 2)
        for a, b in ((window[1], np.inf), (-np.inf, window[0])):
            inner += integrate.quad(f, a, b, limit=200)[0]
    return inner
