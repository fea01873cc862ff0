"""Continuous orthogonal polynomials P(r, lam), P_*(r, lam) and the coefficient A(r)."""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import czt

from .errors import StepTooLarge, SupportViolation
from .harmonic import GridFunction, LambdaGrid, RGrid, product_weights, sigma_inner_product
from .kreincore import ResolventSlice, Sweep, gregory_weights
from .quadrature import gauss_legendre01
from .weights import Weight


# ------------------------------------------------------------------ Filon-type transforms


@lru_cache(maxsize=None)
def _lagrange(offsets: tuple[int, ...]) -> np.ndarray:
    """Monomial coefficients (rows: basis polynomial, cols: power) for nodes ``offsets``."""
    x = np.array(offsets, dtype=float)
    V = np.vander(x, increasing=True)
    return np.linalg.inv(V).T


_MOMENT_CACHE: OrderedDict = OrderedDict()
_MOMENT_LOCK = threading.Lock()


def _moments(offsets: tuple[int, ...], theta: np.ndarray) -> np.ndarray:
    """m_k(theta) = int_0^1 L_k(u) exp(i theta u) du for the Lagrange basis on ``offsets``.

    Sweeps reuse the same theta for every r, so recent results are kept.
    """
    key = (offsets, theta.shape, hashlib.blake2b(theta.tobytes(), digest_size=16).digest())
    with _MOMENT_LOCK:
        hit = _MOMENT_CACHE.get(key)
        if hit is not None:
            _MOMENT_CACHE.move_to_end(key)
            return hit
    m = _moments_uncached(offsets, theta)
    m.setflags(write=False)
    with _MOMENT_LOCK:
        _MOMENT_CACHE[key] = m
        if len(_MOMENT_CACHE) > 32:
            _MOMENT_CACHE.popitem(last=False)
    return m


def _moments_uncached(offsets: tuple[int, ...], theta: np.ndarray) -> np.ndarray:
    order = 24 + int(np.ceil(np.max(np.abs(theta), initial=0.0)))
    u, wu = gauss_legendre01(order)
    coef = _lagrange(offsets)
    basis = coef @ np.vander(u, len(offsets), increasing=True).T  # (d+1, order)
    ph = np.exp(1j * np.outer(theta, u)) * wu  # (nt, order)
    return ph @ basis.T  # (nt, d+1)


def _partial_dft(vals: np.ndarray, theta: np.ndarray, full: np.ndarray, a: int, b: int) -> np.ndarray:
    """sum_{i=a}^{b} vals_i exp(i theta i), using the full sum when the range is long."""
    n = vals.shape[0] - 1
    if b - a + 1 <= 8:
        idx = np.arange(a, b + 1)
        return np.exp(1j * np.outer(theta, idx)) @ vals[a:b + 1]
    head = np.arange(0, a)
    tail = np.arange(b + 1, n + 1)
    out = full.copy()
    if head.size:
        out -= np.exp(1j * np.outer(theta, head)) @ vals[head]
    if tail.size:
        out -= np.exp(1j * np.outer(theta, tail)) @ vals[tail]
    return out


def _full_dft(vals: np.ndarray, theta: np.ndarray, uniform: tuple[float, float] | None) -> np.ndarray:
    n1 = vals.shape[0]
    if uniform is not None and theta.size > 64 and n1 > 64:
        t0, dt = uniform
        return czt(vals, m=theta.size, w=np.exp(1j * dt), a=np.exp(-1j * t0))
    return np.exp(1j * np.outer(theta, np.arange(n1))) @ vals


def fourier_integral(vals: np.ndarray, dr: float, lam: np.ndarray, sign: int = 1) -> np.ndarray:
    """int_0^{n dr} v(s) exp(sign i lam s) ds with v replaced by its piecewise-cubic interpolant.

    The interpolant is integrated exactly against the exponential, so the
    error is O(dr^4) uniformly in lam.
    """
    vals = np.asarray(vals, dtype=complex)
    lam = np.asarray(lam, dtype=float)
    n = vals.size - 1
    if n <= 0 or not np.any(vals):
        return np.zeros(lam.shape, dtype=complex)
    theta = sign * lam.ravel() * dr
    d = min(3, n)
    uniform = None
    if lam.ndim == 1 and lam.size > 1 and np.allclose(np.diff(lam), lam[1] - lam[0], rtol=1e-12, atol=1e-12):
        uniform = (theta[0], theta[1] - theta[0])
    full = _full_dft(vals, theta, uniform)
    out = np.zeros(theta.shape, dtype=complex)
    # runs of intervals j sharing the stencil offset st_j - j, st_j = clip(j-1, 0, n-d)
    offs_j = np.clip(np.arange(n) - 1, 0, n - d) - np.arange(n)
    cuts = np.nonzero(np.diff(offs_j))[0] + 1
    spans = [(int(offs_j[r[0]]), int(r[0]), int(r[-1])) for r in np.split(np.arange(n), cuts)]
    for o, ja, jb in spans:
        offs = tuple(range(o, o + d + 1))
        m = _moments(offs, theta)
        for k in range(d + 1):
            a, b = ja + o + k, jb + o + k
            s = _partial_dft(vals, theta, full, a, b)
            out += m[:, k] * np.exp(-1j * theta * (o + k)) * s
    return (dr * out).reshape(lam.shape)


def filon_matrix_check(vals: np.ndarray, dr: float, lam: np.ndarray, sign: int = 1) -> np.ndarray:
    """Reference: the same interpolant integrated by dense Gauss-Legendre per interval."""
    vals = np.asarray(vals, dtype=complex)
    n = vals.size - 1
    d = min(3, n)
    u, wu = gauss_legendre01(40)
    out = np.zeros(lam.shape, dtype=complex)
    for j in range(n):
        st = min(max(j - 1, 0), n - d)
        offs = tuple(range(st - j, st - j + d + 1))
        coef = _lagrange(offs)
        interp = (coef @ np.vander(u, d + 1, increasing=True).T).T @ vals[st:st + d + 1]
        s = (j + u) * dr
        out += dr * (np.exp(sign * 1j * np.outer(lam, s)) * wu) @ interp
    return out


# ------------------------------------------------------------------ P, P_*, A


def evaluate_P(sl: ResolventSlice, grid: LambdaGrid | np.ndarray) -> GridFunction | np.ndarray:
    """P(r, lam) - exp(i lam r) = -exp(i lam r) int_0^r g_r(s) exp(-i lam s) ds."""
    lam = grid.nodes if isinstance(grid, LambdaGrid) else np.asarray(grid, dtype=float)
    diff = -np.exp(1j * lam * sl.r) * fourier_integral(sl.g, sl.step, lam, sign=-1)
    return GridFunction(grid, diff) if isinstance(grid, LambdaGrid) else diff


def evaluate_Pstar(P: np.ndarray, lam: np.ndarray, r: float) -> np.ndarray:
    """P_*(r, lam) = exp(i lam r) conj(P(r, lam)) on real lam."""
    return np.exp(1j * np.asarray(lam) * r) * np.conj(P)


def extract_A(sweep: Sweep | list[ResolventSlice]) -> np.ndarray:
    """A(r_i) = conj(Gamma_{r_i}(r_i, 0))."""
    slices = sweep.slices if isinstance(sweep, Sweep) else sweep
    return np.array([np.conj(s.g[-1]) for s in slices])


@dataclass(frozen=True, eq=False)
class KreinEvaluation:
    rgrid: RGrid
    lam: np.ndarray
    P: np.ndarray  # (M+1, n_lam)
    Pstar: np.ndarray
    A: np.ndarray


def evaluate_all(sweep: Sweep, rgrid: RGrid, lam: np.ndarray) -> KreinEvaluation:
    rs = rgrid.nodes
    P = np.empty((rs.size, lam.size), dtype=complex)
    for i, sl in enumerate(sweep.slices):
        P[i] = np.exp(1j * lam * sl.r) + evaluate_P(sl, lam)
    Ps = np.exp(1j * np.outer(rs, lam)) * np.conj(P)
    return KreinEvaluation(rgrid, lam, P, Ps, extract_A(sweep))


def _midpoints(A: np.ndarray) -> np.ndarray:
    """Cubic interpolation of A at r_i + dr/2."""
    n = A.size - 1
    if n < 3:
        return 0.5 * (A[:-1] + A[1:])
    mid = np.empty(n, dtype=complex)
    mid[1:-1] = (-A[:-3] + 9 * A[1:-2] + 9 * A[2:-1] - A[3:]) / 16
    mid[0] = (5 * A[0] + 15 * A[1] - 5 * A[2] + A[3]) / 16
    mid[-1] = (5 * A[-1] + 15 * A[-2] - 5 * A[-3] + A[-4]) / 16
    return mid


@dataclass(frozen=True, eq=False)
class OdeResult:
    P: np.ndarray
    Pstar: np.ndarray
    modulus_defect: float


def ode_oracle(A: np.ndarray, dr: float, lam: np.ndarray | float) -> OdeResult:
    """Integrate P' = i lam P - conj(A) P_*, P_*' = -A P from P = P_* = 1 at r = 0.

    Classical RK4 in the rotating frame P = exp(i lam r) Q, with A
    interpolated by cubics between nodes.  Returns values at r = n dr.
    """
    A = np.asarray(A, dtype=complex)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.max(np.abs(A), initial=0.0) * dr > 0.5:
        raise StepTooLarge(f"|A| dr = {np.max(np.abs(A)) * dr:.3f} exceeds 0.5")
    n = A.size - 1
    mid = _midpoints(A)
    Q = np.ones(lam.shape, dtype=complex)
    S = np.ones(lam.shape, dtype=complex)
    defect = 0.0

    def rhs(r: float, a: complex, q: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ph = np.exp(1j * lam * r)
        return -np.conj(a) * np.conj(ph) * s, -a * ph * q

    for i in range(n):
        r0 = i * dr
        k1q, k1s = rhs(r0, A[i], Q, S)
        k2q, k2s = rhs(r0 + dr / 2, mid[i], Q + dr / 2 * k1q, S + dr / 2 * k1s)
        k3q, k3s = rhs(r0 + dr / 2, mid[i], Q + dr / 2 * k2q, S + dr / 2 * k2s)
        k4q, k4s = rhs(r0 + dr, A[i + 1], Q + dr * k3q, S + dr * k3s)
        Q = Q + dr / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        S = S + dr / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
        defect = max(defect, float(np.max(np.abs(np.abs(S) - np.abs(Q)))))
    P = np.exp(1j * lam * n * dr) * Q
    return OdeResult(P, S, defect)


# ------------------------------------------------------------------ test functions


@dataclass(frozen=True)
class SplineBump:
    """Cubic B-spline supported on [center - width, center + width], unit peak height scaled by ``height``."""

    center: float
    width: float
    height: float = 1.0

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.width, self.center + self.width)

    def __call__(self, s: np.ndarray) -> np.ndarray:
        h = self.width / 2
        x = np.abs((np.asarray(s, dtype=float) - self.center) / h)
        out = np.where(x < 1, 2 / 3 - x**2 + x**3 / 2, np.where(x < 2, (2 - x) ** 3 / 6, 0.0))
        return self.height * 1.5 * out

    def transform(self, lam: np.ndarray) -> np.ndarray:
        """int f(s) exp(i lam s) ds in closed form."""
        h = self.width / 2
        lam = np.asarray(lam, dtype=float)
        return self.height * 1.5 * h * np.sinc(lam * h / (2 * np.pi)) ** 4 * np.exp(1j * lam * self.center)

    def inner(self, other: "SplineBump", n: int = 4001) -> float:
        """int f g ds (both real), by dense Gauss-Legendre on the overlap."""
        a = max(self.support[0], other.support[0])
        b = min(self.support[1], other.support[1])
        if b <= a:
            return 0.0
        knots = sorted({a, b, *[k for f in (self, other) for k in np.linspace(*f.support, 5) if a < k < b]})
        u, wu = gauss_legendre01(8)
        tot = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            s = lo + (hi - lo) * u
            tot += (hi - lo) * float(np.sum(wu * self(s) * other(s)))
        return tot


def _edge_kernel(sweep: Sweep, f: np.ndarray, dr: float) -> np.ndarray:
    """K(v_j) = int_{v_j}^R f(s) g_s(s - v_j) ds, so that
    int_0^R f(s) (P(s, lam) - exp(i lam s)) ds = -int_0^R K(v) exp(i lam v) dv."""
    M = len(sweep.slices) - 1
    K = np.zeros(M + 1, dtype=complex)
    for j in range(M + 1):
        n = M - j
        col = np.array([sweep.slices[i].g[i - j] for i in range(j, M + 1)])
        K[j] = dr * np.sum(gregory_weights(n) * f[j:] * col) if n else 0.0
    return K


def transform_O(sweep: Sweep, rgrid: RGrid, f: SplineBump, lam: np.ndarray) -> np.ndarray:
    """(O f)(lam) = int_0^R f(s) P(s, lam) ds."""
    fs = f(rgrid.nodes).astype(complex)
    K = _edge_kernel(sweep, fs, rgrid.step)
    return f.transform(lam) - fourier_integral(K, rgrid.step, lam, sign=1)


def orthonormality_check(w: Weight, f: SplineBump, g: SplineBump, sweep: Sweep, rgrid: RGrid,
                         grid: LambdaGrid) -> complex:
    """<O f, O g>_sigma - <f, g>, whose modulus is the residual."""
    margin = 2 * rgrid.step
    for fn in (f, g):
        if fn.support[0] < 0 or fn.support[1] > rgrid.max_r - margin:
            raise SupportViolation(f"test function support {fn.support} too close to the r-window")
    Of = GridFunction(grid, transform_O(sweep, rgrid, f, grid.nodes))
    Og = GridFunction(grid, transform_O(sweep, rgrid, g, grid.nodes))
    return sigma_inner_product(Of, Og, w) - f.inner(g)


def band_orthogonality_check(w: Weight, sl: ResolventSlice, k: int, f: SplineBump,
                             grid: LambdaGrid, panels_per_unit: float = 2.0) -> complex:
    """(1/2pi) int P(r, lam) w(lam) conj(lam^k int_0^r f(s) exp(i lam s) ds) dlam.

    The unweighted part is band-limited, so the nodal trapezoid sum is
    spectrally accurate; the part carrying w - 1 uses Gauss panels split at
    the features of w, with P evaluated off the grid.
    """
    if f.support[0] < 0 or f.support[1] > sl.r:
        raise SupportViolation("test function must live in (0, r)")
    lam = grid.nodes
    P = np.exp(1j * lam * sl.r) + evaluate_P(sl, lam)
    F = lam**k * f.transform(lam)
    flat = grid.step * np.sum(P * np.conj(F))
    rule = w.rule(grid.origin, grid.origin + 2 * grid.half_width, panels_per_unit=panels_per_unit)
    dev = w.local(rule.base, rule.off) - 1.0
    keep = dev != 0
    pts = rule.points[keep]
    Pp = np.exp(1j * pts * sl.r) + evaluate_P(sl, pts)
    Fp = pts**k * f.transform(pts)
    bent = np.sum(rule.wts[keep] * dev[keep] * Pp * np.conj(Fp))
    return complex((flat + bent) / (2 * np.pi))


def plancherel_ratio(sl: ResolventSlice, grid: LambdaGrid) -> float:
    """||P - e||_{L^2(grid)} / (sqrt(2 pi) ||g_r||_{L^2(0, r)})."""
    d = evaluate_P(sl, grid.nodes)
    lhs = np.sqrt(grid.step * np.sum(np.abs(d) ** 2))
    rhs = np.sqrt(2 * np.pi * sl.step * np.sum(gregory_weights(sl.n) * np.abs(sl.g) ** 2))
    return float(lhs / rhs) if rhs > 0 else float("nan")
