"""Quadrature rules for closed-form integrands with endpoint power singularities.

Rules are returned as node/weight triples ``(base, off, wts)``: the abscissa is
``base + off`` but integrands receive the two parts separately, so a factor
``|lam - lam0|**beta`` can be evaluated as ``|(base - lam0) + off|**beta``
without cancellation when ``base == lam0`` and ``off`` is tiny.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import NonIntegrable

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]

# geometric grading toward a singular endpoint
GRADE_RATIO = 0.15
GRADE_LEVELS = 18
GL_ORDER = 16


@lru_cache(maxsize=None)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class Rule:
    base: np.ndarray
    off: np.ndarray
    wts: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.base + self.off

    def __add__(self, other: "Rule") -> "Rule":
        return Rule(
            np.concatenate([self.base, other.base]),
            np.concatenate([self.off, other.off]),
            np.concatenate([self.wts, other.wts]),
        )

    def integrate(self, func: Integrand) -> complex | float:
        vals = func(self.base, self.off)
        return np.sum(self.wts * vals)


def _empty() -> Rule:
    z = np.zeros(0)
    return Rule(z, z, z)


def panel_rule(a: float, b: float, n_panels: int = 1, order: int = GL_ORDER) -> Rule:
    if b <= a:
        return _empty()
    x, w = gauss_legendre01(order)
    h = (b - a) / n_panels
    starts = h * np.arange(n_panels)
    off = (starts[:, None] + h * x[None, :]).ravel()
    wts = np.tile(h * w, n_panels)
    return Rule(np.full(off.shape, float(a)), off, wts)


def local_exponent(g: Integrand, base: float, d: float, sign: float) -> float:
    """Estimate e in |g(base + sign*t)| ~ c t**e as t -> 0 from two samples."""
    t = np.array([d, 10.0 * d])
    vals = np.abs(g(np.full(2, base), sign * t))
    if not np.all(np.isfinite(vals)):
        raise NonIntegrable(f"integrand not finite near {base!r}")
    if vals[0] == 0.0:
        return np.inf
    if vals[1] == 0.0:
        return -np.inf
    return float(np.log(vals[0] / vals[1]) / np.log(0.1))


def graded_rule(
    base: float,
    length: float,
    sign: float,
    g: Integrand | None,
    order: int = GL_ORDER,
    ratio: float = GRADE_RATIO,
    levels: int = GRADE_LEVELS,
) -> Rule:
    """Rule on the segment from ``base`` to ``base + sign*length``, graded toward ``base``.

    The innermost piece [0, d_min] is closed analytically assuming
    ``g ~ c t**e`` there, with ``e`` estimated from ``g``; the closure is a
    single node at ``d_min`` carrying weight ``d_min / (e + 1)``.
    """
    x, w = gauss_legendre01(order)
    hi = length * ratio ** np.arange(levels)
    lo = hi * ratio
    widths = hi - lo
    off = (lo[:, None] + widths[:, None] * x[None, :]).ravel()
    wts = (widths[:, None] * w[None, :]).ravel()
    dmin = float(lo[-1])
    e = 0.0 if g is None else local_exponent(g, base, dmin, sign)
    if e <= -1.0 + 1e-9:
        raise NonIntegrable(f"local exponent {e:.3f} <= -1 at {base!r}")
    if np.isfinite(e):
        off = np.append(off, dmin)
        wts = np.append(wts, dmin / (e + 1.0))
    return Rule(np.full(off.shape, float(base)), sign * off, wts)


def piece_rule(
    a: float,
    b: float,
    sing_left: bool = False,
    sing_right: bool = False,
    g: Integrand | None = None,
    n_panels: int = 1,
    order: int = GL_ORDER,
) -> Rule:
    """Rule on [a, b] that is smooth inside, with optional singular endpoints."""
    if b <= a:
        return _empty()
    length = b - a
    if not (sing_left or sing_right):
        return panel_rule(a, b, n_panels, order)
    rule = _empty()
    lo, hi = a, b
    # the graded segment stays short so oscillatory factors are resolved
    seg = min(length / 2 if (sing_left and sing_right) else length / 2, length / max(n_panels, 1))
    if sing_left:
        rule = rule + graded_rule(a, seg, 1.0, g, order)
        lo = a + seg
    if sing_right:
        rule = rule + graded_rule(b, seg, -1.0, g, order)
        hi = b - seg
    if hi > lo:
        rule = rule + panel_rule(lo, hi, max(1, n_panels - 1), order)
    return rule


def composite_rule(
    a: float,
    b: float,
    breakpoints: Sequence[float] = (),
    singular_points: Sequence[float] = (),
    g: Integrand | None = None,
    panels_per_unit: float = 1.0,
    order: int = GL_ORDER,
) -> Rule:
    """Rule on [a, b] split at breakpoints; pieces touching a singular point are graded."""
    cuts = sorted({a, b, *(p for p in (*breakpoints, *singular_points) if a < p < b)})
    sing = set(singular_points)
    rule = _empty()
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((hi - lo) * panels_per_unit)))
        rule = rule + piece_rule(lo, hi, lo in sing, hi in sing, g, n, order)
    return rule
