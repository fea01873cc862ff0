"""Dyadic Calderon-Zygmund decompositions for mu = <lam>^q dlam.

Step functions carry exact rational data.  For q = 0 and even integer q the
mu-integrals are exact rationals, so selection ties are decided exactly; other
q fall back to adaptive quadrature and treat near-ties as "not selected".
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import BadParameter, DepthExceeded

Number = int | float | Fraction
QUAD_TOL = 1e-12


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        raise BadParameter(f"non-finite value {x}")
    return Fraction(x)


def _is_dyadic(x: Fraction) -> bool:
    d = x.denominator
    return d & (d - 1) == 0


def _exact_q(q: float) -> int | None:
    """Half-exponent m when <lam>^q = (1 + lam^2)^m is a polynomial, else None."""
    if q == 0:
        return 0
    if float(q).is_integer() and int(q) % 2 == 0:
        return int(q) // 2
    return None


def _poly_antiderivative(m: int, x: Fraction) -> Fraction:
    # int_0^x (1 + t^2)^m dt
    return sum((Fraction(math.comb(m, k), 2 * k + 1) * x ** (2 * k + 1) for k in range(m + 1)), Fraction(0))


def mu_measure(a: Number, b: Number, q: float) -> Fraction | float:
    """mu([a, b]) for mu = <lam>^q dlam; exact for q = 0 and even integer q."""
    if q < 0:
        raise BadParameter("q must be non-negative")
    a, b = _frac(a), _frac(b)
    if b <= a:
        return Fraction(0)
    m = _exact_q(q)
    if m is not None:
        return _poly_antiderivative(m, b) - _poly_antiderivative(m, a)
    val, _ = quad(lambda t: (1.0 + t * t) ** (q / 2), float(a), float(b), epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return val


# ------------------------------------------------------------------ dyadic intervals


@dataclass(frozen=True)
class DyadicInterval:
    """[j 2^-n, (j+1) 2^-n]; n may be negative."""

    j: int
    n: int

    @property
    def left(self) -> Fraction:
        return Fraction(self.j, 2**self.n) if self.n >= 0 else Fraction(self.j * 2 ** (-self.n))

    @property
    def right(self) -> Fraction:
        return Fraction(self.j + 1, 2**self.n) if self.n >= 0 else Fraction((self.j + 1) * 2 ** (-self.n))

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**self.n) if self.n >= 0 else Fraction(2 ** (-self.n))

    @property
    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.j // 2, self.n - 1)

    @property
    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return DyadicInterval(2 * self.j, self.n + 1), DyadicInterval(2 * self.j + 1, self.n + 1)

    def contains(self, other: "DyadicInterval") -> bool:
        """other is a descendant of (or equal to) self."""
        if other.n < self.n:
            return False
        return other.j >> (other.n - self.n) == self.j

    def almost_disjoint(self, other: "DyadicInterval") -> bool:
        return self.right <= other.left or other.right <= self.left

    def sort_key(self) -> tuple[int, int]:
        return self.n, self.j

    def __repr__(self) -> str:
        return f"[{self.left}, {self.right}]"


def _maximal(intervals: Sequence[DyadicInterval]) -> list[DyadicInterval]:
    """Intervals not strictly contained in another member, sorted by (n, j)."""
    ordered = sorted(set(intervals), key=DyadicInterval.sort_key)
    kept: list[DyadicInterval] = []
    for iv in ordered:
        if not any(k.contains(iv) for k in kept):
            kept.append(iv)
    return kept


# ------------------------------------------------------------------ functions


@dataclass(frozen=True)
class StepFunction:
    """u = values[i] on [breaks[i], breaks[i+1]], zero outside [breaks[0], breaks[-1]]."""

    breaks: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __init__(self, breaks: Sequence[Number], values: Sequence[Number]):
        b = tuple(_frac(x) for x in breaks)
        v = tuple(_frac(x) for x in values)
        if len(b) != len(v) + 1 or not v:
            raise BadParameter("need len(breaks) == len(values) + 1 >= 2")
        if any(x >= y for x, y in zip(b, b[1:])):
            raise BadParameter("breakpoints must increase strictly")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, a: Number, b: Number, c: Number = 1) -> "StepFunction":
        return cls([a, b], [c])

    @classmethod
    def parse(cls, spec: str) -> "StepFunction":
        """Pieces ``a:b=c`` joined by ``;``, e.g. ``0:1/2=3;1/2:1=1``; gaps are zero."""
        pieces = []
        for part in filter(None, (x.strip() for x in spec.split(";"))):
            try:
                span, val = part.split("=")
                a, b = span.split(":")
                pieces.append((Fraction(a.strip()), Fraction(b.strip()), Fraction(val.strip())))
            except ValueError as exc:
                raise BadParameter(f"bad step piece {part!r}") from exc
        if not pieces:
            raise BadParameter("empty step function")
        pieces.sort()
        breaks, values = [pieces[0][0]], []
        for a, b, c in pieces:
            if a < breaks[-1]:
                raise BadParameter("step pieces overlap")
            if a > breaks[-1]:
                values.append(Fraction(0))
                breaks.append(a)
            values.append(c)
            breaks.append(b)
        return cls(breaks, values)

    @property
    def dyadic(self) -> bool:
        return all(_is_dyadic(x) for x in self.breaks)

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.breaks[0], self.breaks[-1]

    def __call__(self, x: Number) -> Fraction:
        x = _frac(x)
        i = bisect_right(self.breaks, x) - 1
        return self.values[i] if 0 <= i < len(self.values) else Fraction(0)

    def abs(self) -> "StepFunction":
        return StepFunction(self.breaks, [abs(c) for c in self.values])

    def power(self, p: float) -> "StepFunction":
        """|u|^p; exact for integer p."""
        if float(p).is_integer():
            return StepFunction(self.breaks, [abs(c) ** int(p) for c in self.values])
        return StepFunction(self.breaks, [Fraction(float(abs(c)) ** p) for c in self.values])

    def __add__(self, other: "StepFunction") -> "StepFunction":
        pts = sorted(set(self.breaks) | set(other.breaks))
        vals = [self((x + y) / 2) + other((x + y) / 2) for x, y in zip(pts, pts[1:])]
        return StepFunction(pts, vals)

    def dilate(self, s: Number) -> "StepFunction":
        """x -> u(s x) for s > 0."""
        s = _frac(s)
        if s <= 0:
            raise BadParameter("dilation factor must be positive")
        return StepFunction([x / s for x in self.breaks], self.values)

    def constant_on(self, a: Fraction, b: Fraction) -> bool:
        """No jump strictly inside (a, b)."""
        return bisect_right(self.breaks, a) == bisect_left(self.breaks, b)

    def mu_integral(self, a: Number, b: Number, q: float) -> Fraction | float:
        """int_a^b |u| dmu."""
        a, b = _frac(a), _frac(b)
        lo = max(bisect_right(self.breaks, a) - 1, 0)
        hi = min(bisect_left(self.breaks, b), len(self.values))
        total: Fraction | float = Fraction(0)
        for i in range(lo, hi):
            x, y = max(a, self.breaks[i]), min(b, self.breaks[i + 1])
            if y > x and self.values[i] != 0:
                total += abs(self.values[i]) * mu_measure(x, y, q)
        return total

    def norm(self, p: float, q: float) -> float:
        """||u||_{L^p_mu}."""
        return float(self.power(p).mu_integral(*self.support, q)) ** (1.0 / p)

    def exceed_set(self, level: Number) -> list[tuple[Fraction, Fraction]]:
        """Pieces of {|u| > level}."""
        level = _frac(level)
        return [(x, y) for x, y, c in zip(self.breaks, self.breaks[1:], self.values) if abs(c) > level]


@dataclass(frozen=True)
class ClosedForm:
    """A function known through exact interval mu-integrals of |u|.

    ``bound(a, b)``, when given, is an upper bound for |u| on [a, b]; it lets
    the descent stop where no subinterval can exceed the level.
    """

    mu_integral: Callable[[Fraction, Fraction, float], float]
    support: tuple[Fraction, Fraction]
    bound: Callable[[Fraction, Fraction], float] | None = None


# ------------------------------------------------------------------ decomposition


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    beta: Fraction
    q: float
    intervals: list[DyadicInterval]
    total_mu: Fraction | float
    source: str = "one-exponent"
    exponents: tuple[float, float] | None = None
    parents_ok: bool | None = None


def _exceeds(num, den, beta: Fraction) -> bool:
    """num / den > beta, strictly; near-ties in floating arithmetic count as not exceeding."""
    if isinstance(num, Fraction) and isinstance(den, Fraction):
        return num > beta * den
    lhs, rhs = float(num), float(beta) * float(den)
    return lhs - rhs > QUAD_TOL * max(1.0, abs(rhs))


def _root_intervals(support: tuple[Fraction, Fraction], l1: Fraction | float, beta: Fraction) -> list[DyadicInterval]:
    """[-2^K, 0] and [0, 2^K] with 2^K >= ||u||_{L^1_mu} / beta and the support inside."""
    need = max(abs(support[0]), abs(support[1]), Fraction(1))
    need = max(need, _frac(l1) / beta if isinstance(l1, Fraction) else Fraction(float(l1) / float(beta)))
    K = 0
    while Fraction(2**K) < need:
        K += 1
    return [DyadicInterval(-1, -K), DyadicInterval(0, -K)]


def cz_decompose(u: StepFunction | ClosedForm, beta: Number, q: float = 0.0, depth: int = 64) -> CZDecomposition:
    """Maximal dyadic intervals with <|u|>_{I,mu} > beta, found by descending from the roots."""
    beta = _frac(beta)
    if beta <= 0:
        raise BadParameter("beta must be positive")
    if q < 0:
        raise BadParameter("q must be non-negative")
    step = isinstance(u, StepFunction)
    if step and not u.dyadic:
        raise BadParameter("step function breakpoints must be dyadic rationals")
    lo, hi = u.support
    l1 = u.mu_integral(lo, hi, q)
    found: list[DyadicInterval] = []
    stack = [(iv, 0) for iv in _root_intervals((lo, hi), l1, beta)]
    while stack:
        iv, level = stack.pop()
        a, b = iv.left, iv.right
        if b <= lo or a >= hi:
            continue
        num = u.mu_integral(a, b, q)
        if num == 0:
            continue
        if _exceeds(num, mu_measure(a, b, q), beta):
            found.append(iv)
            continue
        if step:
            if u.constant_on(a, b):
                continue
        elif u.bound is not None and u.bound(a, b) <= float(beta):
            continue
        if level >= depth:
            raise DepthExceeded(f"descent passed depth {depth} at {iv}")
        stack.extend((c, level + 1) for c in iv.children)
    found.sort(key=DyadicInterval.sort_key)
    total = sum((mu_measure(iv.left, iv.right, q) for iv in found), Fraction(0))
    return CZDecomposition(beta, q, found, total)


def cz_decompose_split(u1: StepFunction, u2: StepFunction, p1: float, p2: float, beta: Number,
                       q: float = 0.0, depth: int = 64) -> CZDecomposition:
    """Decompose |u_i|^{p_i} at level (beta/2)^{p_i}, merge and keep the maximal intervals."""
    if not 1 <= p1 <= p2:
        raise BadParameter("need 1 <= p1 <= p2")
    beta = _frac(beta)
    half = beta / 2
    parts: list[DyadicInterval] = []
    for u, p in ((u1, p1), (u2, p2)):
        if all(c == 0 for c in u.values):
            continue
        level = half ** int(p) if float(p).is_integer() else Fraction(float(half) ** p)
        parts.extend(cz_decompose(u.power(p), level, q, depth).intervals)
    kept = _maximal(parts)
    total = sum((mu_measure(iv.left, iv.right, q) for iv in kept), Fraction(0))
    s = u1 + u2
    ok = all(not _exceeds(s.mu_integral(k.left, k.right, q), mu_measure(k.left, k.right, q), beta)
             for k in {iv.parent for iv in kept})
    return CZDecomposition(beta, q, kept, total, "two-exponent", (p1, p2), ok)


def split_constant(p1: float, p2: float) -> float:
    """C(p1, p2) = 2^{p2} in sum mu(I_j) <= C beta^{-p2}(beta^{p2-p1}||u1||^{p1} + ||u2||^{p2})."""
    return 2.0**p2


def split_bound(u1: StepFunction, u2: StepFunction, p1: float, p2: float, beta: Number, q: float = 0.0) -> float:
    b = float(beta)
    n1 = float(u1.power(p1).mu_integral(*u1.support, q))
    n2 = float(u2.power(p2).mu_integral(*u2.support, q))
    return split_constant(p1, p2) * b**-p2 * (b ** (p2 - p1) * n1 + n2)


def flatness_threshold(L: float, q: float) -> float:
    """Smallest D with <D>^q >= 100 L (zero when q = 0 or that already holds at D = 0)."""
    if L < 0 or q < 0:
        raise BadParameter("need L >= 0 and q >= 0")
    if q == 0:
        return 0.0
    t = (100.0 * L) ** (2.0 / q) - 1.0
    return math.sqrt(t) if t > 0 else 0.0


def flatness_ratio(L: float, q: float) -> float:
    """max/min of <lam>^q over I and its neighbours for I = [D, D + l] with mu(I) = L."""
    D = flatness_threshold(L, q)
    if q == 0 or L == 0:
        return 1.0
    ell = brentq(lambda s: float(mu_measure(D, D + s, q)) - L, 1e-15, max(1.0, L))
    x = np.linspace(D - ell, D + 2 * ell, 2001)
    v = (1.0 + x * x) ** (q / 2)
    return float(v.max() / v.min())


# ------------------------------------------------------------------ verification


@dataclass(frozen=True)
class CZReport:
    covered: bool
    maximal: bool
    disjoint: bool
    sum_bound: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.covered and self.maximal and self.disjoint and self.sum_bound


def _covers(intervals: Sequence[DyadicInterval], a: Fraction, b: Fraction) -> bool:
    pos = a
    for iv in sorted(intervals, key=lambda i: i.left):
        if iv.right <= pos:
            continue
        if iv.left > pos:
            return False
        pos = iv.right
        if pos >= b:
            return True
    return pos >= b


def cz_verify(dec: CZDecomposition, u: StepFunction | tuple[StepFunction, StepFunction]) -> CZReport:
    """Check covering, maximality, almost disjointness and the sum bound."""
    ivs = dec.intervals
    q, beta = dec.q, dec.beta
    ordered = sorted(ivs, key=lambda i: (i.left, i.right))
    disjoint = all(x.right <= y.left for x, y in zip(ordered, ordered[1:]))
    if dec.source == "two-exponent":
        u1, u2 = u
        p1, p2 = dec.exponents
        half = beta / 2
        pieces = u1.exceed_set(half) + u2.exceed_set(half)
        covered = all(_covers(ivs, a, b) for a, b in pieces)
        maximal = bool(dec.parents_ok)
        bound = split_bound(u1, u2, p1, p2, beta, q)
        sum_ok = float(dec.total_mu) <= bound * (1 + 1e-12)
        return CZReport(covered, maximal, disjoint, sum_ok, {"bound": bound})
    covered = all(_covers(ivs, a, b) for a, b in u.exceed_set(beta))
    maximal = True
    for iv in ivs:
        par = iv.parent
        if not _exceeds(u.mu_integral(iv.left, iv.right, q), mu_measure(iv.left, iv.right, q), beta):
            maximal = False
        if _exceeds(u.mu_integral(par.left, par.right, q), mu_measure(par.left, par.right, q), beta):
            maximal = False
    l1 = u.mu_integral(*u.support, q)
    e_mu = sum((abs(mu_measure(a, b, q)) for a, b in u.exceed_set(beta)), Fraction(0))
    if isinstance(l1, Fraction) and isinstance(dec.total_mu, Fraction) and isinstance(e_mu, Fraction):
        sum_ok = e_mu <= dec.total_mu <= l1 / beta
    else:
        tol = 1e-10 * max(1.0, float(l1) / float(beta))
        sum_ok = float(e_mu) <= float(dec.total_mu) + tol and float(dec.total_mu) <= float(l1) / float(beta) + tol
    return CZReport(covered, maximal, disjoint, sum_ok, {"l1_over_beta": l1 / beta, "mu_E": e_mu})


# ------------------------------------------------------------------ brute force oracle


def _oracle_parts(u: StepFunction, q: float):
    """Floating point x -> mu([0, x]) and the per-piece mu-integral of |u| over [a, b].

    Summing piece by piece makes an interval inside one piece give exactly
    |c| * mu(I), so ties with beta stay ties.
    """
    m = _exact_q(q)
    if m is None:
        raise BadParameter("the oracle handles q = 0 and even integer q only")
    coef = np.array([math.comb(m, k) / (2 * k + 1) for k in range(m + 1)])

    def M(x):
        x = np.asarray(x, dtype=float)
        return sum(c * x ** (2 * k + 1) for k, c in enumerate(coef))

    br = np.array([float(b) for b in u.breaks])
    vals = np.array([float(abs(c)) for c in u.values])

    def integral(a, b):
        out = np.zeros(np.shape(a))
        for lo, hi, c in zip(br[:-1], br[1:], vals):
            if c == 0:
                continue
            x, y = np.clip(a, lo, hi), np.clip(b, lo, hi)
            out += np.where(y > x, c * (M(y) - M(x)), 0.0)
        return out

    return integral, M


def brute_force_cz(u: StepFunction, beta: Number, q: float = 0.0, finest: int = 20, coarsest: int = 20,
                   chunk: int = 1 << 20) -> list[DyadicInterval]:
    """Scan every dyadic interval of length 2^-finest .. 2^coarsest meeting the support, keep those whose
    mu-average exceeds beta and that lie in no coarser such interval."""
    integral, M = _oracle_parts(u, q)
    b = float(beta)
    lo, hi = float(u.support[0]), float(u.support[1])
    selected: list[DyadicInterval] = []
    starts = np.empty(0)
    ends = np.empty(0)
    for n in range(-coarsest, finest + 1):
        h = 2.0 ** (-n)
        j0, j1 = math.floor(lo / h), math.ceil(hi / h)
        for c0 in range(j0, j1, chunk):
            js = np.arange(c0, min(c0 + chunk, j1), dtype=np.int64)
            a = js * h
            num = integral(a, a + h)
            den = M(a + h) - M(a)
            hit = num - b * den > 1e-12 * np.maximum(1.0, b * den)
            if not np.any(hit):
                continue
            js, a = js[hit], a[hit]
            if starts.size:
                k = np.searchsorted(starts, a, side="right") - 1
                inside = (k >= 0) & (a + h <= ends[np.maximum(k, 0)])
                js = js[~inside]
            selected.extend(DyadicInterval(int(j), n) for j in js)
        if selected:
            lefts = np.array([float(iv.left) for iv in selected])
            order = np.argsort(lefts)
            starts = lefts[order]
            ends = np.array([float(iv.right) for iv in selected])[order]
    return sorted(selected, key=DyadicInterval.sort_key)


__all__ = [
    "ClosedForm",
    "CZDecomposition",
    "CZReport",
    "DyadicInterval",
    "StepFunction",
    "brute_force_cz",
    "cz_decompose",
    "cz_decompose_split",
    "cz_verify",
    "flatness_ratio",
    "flatness_threshold",
    "mu_measure",
    "split_bound",
    "split_constant",
]
