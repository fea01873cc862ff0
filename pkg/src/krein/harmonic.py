"""Grids, discrete Fourier tools and weighted quadrature on the spatial line.

Fourier convention: fhat(xi) = int f(x) exp(-2 pi i x xi) dx.  Frequency bands
are given in units s = 2 pi xi, so that band [a, b] keeps exp(i lam s) for s
in [a, b].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal, Protocol, Sequence

import numpy as np

from .errors import BadParameter, BandOutOfRange, GridMismatch, NonFinite, NyquistViolation
from .quadrature import GL_ORDER, Rule, composite_rule, gauss_legendre01


class WeightLike(Protocol):
    def local(self, base: np.ndarray, off: np.ndarray) -> np.ndarray: ...

    @property
    def breakpoints(self) -> tuple[float, ...]: ...

    @property
    def singular_points(self) -> tuple[float, ...]: ...


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class LambdaGrid:
    """Uniform periodic grid lam_j = -Lambda + shift + j*dlam, j = 0..N-1."""

    half_width: float
    n_points: int
    shift: float = 0.0

    def __post_init__(self) -> None:
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise BadParameter(f"half_width must be positive, got {self.half_width}")
        if not _is_pow2(int(self.n_points)) or self.n_points < 16:
            raise BadParameter(f"n_points must be a power of two >= 16, got {self.n_points}")

    @property
    def step(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def origin(self) -> float:
        return -self.half_width + self.shift

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.n_points)

    @property
    def nyquist(self) -> float:
        """Largest representable |s| in exp(i lam s) units."""
        return np.pi * self.n_points / (2.0 * self.half_width)

    @property
    def frequencies(self) -> np.ndarray:
        """s-values of the DFT bins in numpy fft ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.step)

    def dual(self) -> "LambdaGrid":
        return LambdaGrid(self.n_points / (4.0 * self.half_width), self.n_points)

    def shifted_off(self, points: Sequence[float]) -> "LambdaGrid":
        """Copy shifted by half a cell if any of ``points`` lands on a node."""
        h = self.step
        for p in points:
            k = (p - self.origin) / h
            if abs(k - round(k)) < 1e-9:
                return LambdaGrid(self.half_width, self.n_points, self.shift + 0.5 * h)
        return self


@dataclass(frozen=True)
class RGrid:
    """Nodes r_i = i*dr, i = 0..M."""

    step: float
    max_r: float

    def __post_init__(self) -> None:
        if not (self.step > 0 and self.max_r > 0):
            raise BadParameter("step and max_r must be positive")
        if self.step > self.max_r * (1 + 1e-12):
            raise BadParameter(f"step {self.step} exceeds max_r {self.max_r}")
        m = self.max_r / self.step
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise BadParameter(f"max_r {self.max_r} is not a multiple of step {self.step}")

    @property
    def size(self) -> int:
        return int(round(self.max_r / self.step))

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.size + 1)

    def index(self, r: float) -> int:
        k = r / self.step
        i = int(round(k))
        if abs(k - i) > 1e-9 * max(1.0, k) or i < 0 or i > self.size:
            raise GridMismatch(f"r={r} is not a node of {self}")
        return i


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: LambdaGrid
    values: np.ndarray
    dual: LambdaGrid | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n_points,):
            raise GridMismatch(f"expected {self.grid.n_points} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, grid: LambdaGrid, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.asarray(f(grid.nodes), dtype=complex))

    def like(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values, self.dual)


def make_grids(lam_half: float, n: int, dr: float, r_max: float) -> tuple[LambdaGrid, RGrid]:
    for name, v in (("Lambda", lam_half), ("dr", dr), ("R", r_max)):
        if not v > 0:
            raise BadParameter(f"{name} must be positive, got {v}")
    if dr > r_max:
        raise BadParameter(f"dr={dr} exceeds R={r_max}")
    lg = LambdaGrid(lam_half, n)
    if r_max >= lg.nyquist:
        raise NyquistViolation(f"R={r_max} >= Nyquist {lg.nyquist:.6g} for Lambda={lam_half}, N={n}")
    return lg, RGrid(dr, r_max)


def _scaled_dft(vals: np.ndarray, x0: float, dx: float, y0: float, dy: float, sign: int) -> np.ndarray:
    # out_k = dx * sum_j f_j exp(sign 2 pi i (x0 + j dx)(y0 + k dy)), with dx*dy = 1/N
    n = vals.size
    j = np.arange(n)
    pre = vals * np.exp(sign * 2j * np.pi * j * dx * y0)
    core = np.fft.fft(pre) if sign < 0 else np.fft.ifft(pre) * n
    k = np.arange(n)
    return dx * np.exp(sign * 2j * np.pi * x0 * (y0 + k * dy)) * core


def fourier_pair(f: GridFunction, direction: Literal["forward", "inverse"] = "forward") -> GridFunction:
    g = f.grid
    if direction == "forward":
        d = g.dual()
        out = _scaled_dft(f.values.astype(complex), g.origin, g.step, d.origin, d.step, -1)
        return GridFunction(d, out, dual=g)
    if direction == "inverse":
        d = f.dual if f.dual is not None else g.dual()
        if d.n_points != g.n_points or abs(d.step * g.step * g.n_points - 1.0) > 1e-12:
            raise GridMismatch("target grid is not dual to the input grid")
        out = _scaled_dft(f.values.astype(complex), g.origin, g.step, d.origin, d.step, +1)
        return GridFunction(d, out, dual=g)
    raise BadParameter(f"unknown direction {direction!r}")


def apply_multiplier(f: GridFunction, m: np.ndarray) -> GridFunction:
    return f.like(np.fft.ifft(m * np.fft.fft(f.values)))


def hilbert_multiplier(grid: LambdaGrid) -> np.ndarray:
    return -1j * np.sign(grid.frequencies)


def hilbert_transform(f: GridFunction) -> GridFunction:
    return apply_multiplier(f, hilbert_multiplier(f.grid))


def band_multiplier(grid: LambdaGrid, a: float, b: float, fractional: bool = False) -> np.ndarray:
    """Indicator of [a, b] on the DFT bins.

    The sharp mask is an exact projection.  With ``fractional`` each bin keeps
    the share of its cell covered by [a, b], which tracks the continuous band
    more closely when the edges fall between bins.
    """
    if not a < b:
        raise BadParameter(f"empty band [{a}, {b}]")
    nyq = grid.nyquist
    if max(abs(a), abs(b)) > nyq * (1 + 1e-12):
        raise BandOutOfRange(f"band [{a}, {b}] exceeds Nyquist {nyq:.6g}")
    s = grid.frequencies
    ds = 2.0 * np.pi / (grid.n_points * grid.step)
    if not fractional:
        tol = 1e-9 * ds
        return ((s >= a - tol) & (s <= b + tol)).astype(float)
    lo = np.maximum(s - ds / 2, a)
    hi = np.minimum(s + ds / 2, b)
    return np.clip((hi - lo) / ds, 0.0, 1.0)


def band_project(f: GridFunction, a: float, b: float) -> GridFunction:
    return apply_multiplier(f, band_multiplier(f.grid, a, b))


def modulation(grid: LambdaGrid, r: float) -> np.ndarray:
    return np.exp(1j * r * grid.nodes)


# ---------------------------------------------------------------- quadrature


@lru_cache(maxsize=64)
def product_weights(grid: LambdaGrid, w: WeightLike | None, q: float = 0.0) -> np.ndarray:
    """Weights c_j = int w(lam) <lam>^q phi_j(lam) dlam for periodic hat functions phi_j.

    Cells are [lam_j, lam_j + dlam] over one period; a cell containing a
    breakpoint or a singularity of ``w`` is integrated with a graded rule.
    """
    h = grid.step
    left = grid.nodes
    x, gw = gauss_legendre01(8)

    def integrand(base: np.ndarray, off: np.ndarray) -> np.ndarray:
        lam = base + off
        val = np.ones_like(lam) if w is None else w.local(base, off)
        if q:
            val = val * (1.0 + lam**2) ** (q / 2)
        return val

    lam = left[:, None] + h * x[None, :]
    vals = integrand(lam, np.zeros_like(lam))
    # integral of integrand against the two hat halves on each cell
    right_part = h * np.sum(gw * x * vals, axis=1)
    left_part = h * np.sum(gw * (1.0 - x) * vals, axis=1)

    if w is not None:
        special = set()
        pts = [*w.breakpoints, *w.singular_points]
        for p in pts:
            k = (p - grid.origin) / h
            if k < -1e-9 or k > grid.n_points + 1e-9:
                continue
            if abs(k - round(k)) < 1e-9:
                j = int(round(k))
                special.update({j % grid.n_points, (j - 1) % grid.n_points})
            else:
                special.add(int(np.floor(k)))
        sing = tuple(w.singular_points)
        for i in sorted(special):
            a = left[i]
            b = a + h
            snap = {p: (a if abs(p - a) < 1e-9 * h else b if abs(p - b) < 1e-9 * h else p) for p in pts}
            feats = [snap[p] for p in pts if a <= snap[p] <= b]
            rule = composite_rule(a, b, breakpoints=feats, g=integrand,
                                  singular_points=[snap[p] for p in sing if a <= snap[p] <= b])
            t = (rule.points - a) / h
            v = integrand(rule.base, rule.off)
            right_part[i] = np.sum(rule.wts * t * v)
            left_part[i] = np.sum(rule.wts * (1.0 - t) * v)

    c = left_part + np.roll(right_part, 1)
    if not np.all(np.isfinite(c)):
        raise NonFinite("product quadrature weights are not finite")
    c.setflags(write=False)
    return c


def weighted_lp_norm(
    f: GridFunction | Callable[[np.ndarray], np.ndarray],
    w: WeightLike | None,
    p: float,
    q: float = 0.0,
    *,
    window: tuple[float, float] | None = None,
    breakpoints: Sequence[float] = (),
    panels_per_unit: float = 4.0,
) -> float:
    """(int |f|^p w <lam>^q dlam)^(1/p).

    A GridFunction is integrated by product trapezoid over one period of its
    grid.  A callable is integrated on ``window`` with pieces split at
    ``breakpoints`` and at the features of ``w``.
    """
    if not p >= 1:
        raise BadParameter(f"p must be >= 1, got {p}")
    if isinstance(f, GridFunction):
        c = product_weights(f.grid, w, float(q))
        total = float(np.sum(c * np.abs(f.values) ** p))
    else:
        if window is None:
            raise BadParameter("callable integrand needs a window")
        a, b = window
        feats = () if w is None else (*w.breakpoints, *w.singular_points)
        sing = () if w is None else tuple(w.singular_points)

        def integrand(base: np.ndarray, off: np.ndarray) -> np.ndarray:
            lam = base + off
            val = np.abs(f(lam)) ** p
            if w is not None:
                val = val * w.local(base, off)
            if q:
                val = val * (1.0 + lam**2) ** (q / 2)
            return val

        rule = composite_rule(a, b, breakpoints=(*breakpoints, *feats), singular_points=sing,
                              g=integrand, panels_per_unit=panels_per_unit)
        total = float(np.real(rule.integrate(integrand)))
    if not np.isfinite(total):
        raise NonFinite("weighted norm is not finite")
    return total ** (1.0 / p)


def sigma_inner_product(f: GridFunction, g: GridFunction, w: WeightLike | None) -> complex:
    """(1/2pi) int f conj(g) w dlam on the shared grid."""
    if f.grid != g.grid:
        raise GridMismatch("inner product of functions on different grids")
    c = product_weights(f.grid, w, 0.0)
    return complex(np.sum(c * f.values * np.conj(g.values)) / (2.0 * np.pi))


def lp_grid_norm(values: np.ndarray, grid: LambdaGrid, p: float) -> float:
    """Plain periodic-trapezoid L^p norm of nodal values."""
    return float((grid.step * np.sum(np.abs(values) ** p)) ** (1.0 / p))


__all__ = [
    "LambdaGrid",
    "RGrid",
    "GridFunction",
    "Rule",
    "GL_ORDER",
    "make_grids",
    "fourier_pair",
    "hilbert_transform",
    "band_project",
    "band_multiplier",
    "hilbert_multiplier",
    "apply_multiplier",
    "modulation",
    "product_weights",
    "weighted_lp_norm",
    "sigma_inner_product",
    "lp_grid_norm",
]
