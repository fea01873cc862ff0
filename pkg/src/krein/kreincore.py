"""Accelerant and resolvent-kernel solvers.

The resolvent identity on [0, r] is discretised by Nystrom with fourth-order
Gregory end corrections.  Writing T_ij = H(t_i - t_j) and Omega for the
quadrature weights, the system (I + T Omega) g = h is the Hermitian Toeplitz
matrix I + dr T plus a low-rank endpoint correction, which is solved by
Levinson recursion and a Woodbury update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from .errors import DivergedFromDirect, GridMismatch, NotPositive, NyquistViolation, NonFinite
from .harmonic import LambdaGrid, RGrid
from .weights import Bump, Const, Gauss, Weight


# ------------------------------------------------------------------ accelerant


@dataclass(frozen=True, eq=False)
class Accelerant:
    """Samples H(k dr), k = 0..K; negative lags follow from H(-x) = conj(H(x))."""

    step: float
    samples: np.ndarray
    source: str = ""
    method: str = ""

    @property
    def H0(self) -> complex:
        return complex(self.samples[0])

    @property
    def max_lag(self) -> int:
        return self.samples.size - 1

    def at(self, k: np.ndarray | int) -> np.ndarray:
        k = np.asarray(k)
        if np.any(np.abs(k) > self.max_lag):
            raise GridMismatch(f"lag beyond sampled range {self.max_lag}")
        v = self.samples[np.abs(k)]
        return np.where(k >= 0, v, np.conj(v))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.samples)


def _closed_form(w: Weight, x: np.ndarray, half_width: float) -> np.ndarray | None:
    facs = [f for f in w.factors if not (isinstance(f, Const) and f.c == 1.0)]
    if w.exponent != 1.0 or len(facs) > 1:
        return None
    if not facs:
        return np.zeros(x.shape, dtype=complex)
    f = facs[0]
    if isinstance(f, Bump):
        a, b = max(f.a, -half_width), min(f.b, half_width)
        out = np.empty(x.shape, dtype=complex)
        small = np.abs(x) < 1e-8
        xs = x[~small]
        out[~small] = (np.exp(1j * b * xs) - np.exp(1j * a * xs)) / (1j * xs)
        out[small] = (b - a) + 0.5j * (b * b - a * a) * x[small]
        return f.delta * out / (2 * np.pi)
    if isinstance(f, Gauss):
        s = f.width
        return f.delta * s * np.sqrt(2 * np.pi) * np.exp(1j * f.center * x - 0.5 * (s * x) ** 2) / (2 * np.pi)
    return None


def accelerant_values(w: Weight, x: np.ndarray, half_width: float, method: str = "auto") -> tuple[np.ndarray, str]:
    """(1/2pi) int_{-Lambda}^{Lambda} (w - 1) exp(i lam x) dlam at the points x."""
    x = np.asarray(x, dtype=float)
    if method in ("auto", "closed"):
        out = _closed_form(w, x, half_width)
        if out is not None:
            return out, "closed"
        if method == "closed":
            raise ValueError("no closed form for this weight")

    def dev(base, off):
        return np.abs(w.local(base, off) - 1.0)

    xmax = float(np.max(np.abs(x))) if x.size else 0.0
    rule = w.rule(-half_width, half_width, g=dev, panels_per_unit=max(1.0, xmax / 6.0))
    vals = (w.local(rule.base, rule.off) - 1.0) * rule.wts
    lam = rule.points
    out = np.empty(x.shape, dtype=complex)
    flat = x.ravel()
    res = np.empty(flat.size, dtype=complex)
    chunk = max(1, 4_000_000 // max(lam.size, 1))
    for i in range(0, flat.size, chunk):
        res[i:i + chunk] = np.exp(1j * np.outer(flat[i:i + chunk], lam)) @ vals
    out[...] = (res / (2 * np.pi)).reshape(x.shape)
    if not np.all(np.isfinite(out)):
        raise NonFinite("accelerant samples are not finite")
    return out, "quadrature"


def compute_accelerant(w: Weight, rgrid: RGrid, lgrid: LambdaGrid, method: str = "auto",
                       lags: int | None = None) -> Accelerant:
    if rgrid.max_r >= lgrid.nyquist:
        raise NyquistViolation(f"R={rgrid.max_r} >= Nyquist {lgrid.nyquist:.6g}")
    k = np.arange((rgrid.size if lags is None else lags) + 1)
    vals, how = accelerant_values(w, k * rgrid.step, lgrid.half_width, method)
    vals[0] = vals[0].real
    vals.setflags(write=False)
    return Accelerant(rgrid.step, vals, w.spec, how)


# ------------------------------------------------------------------ quadrature weights


@lru_cache(maxsize=None)
def gregory_weights(n: int) -> np.ndarray:
    """Weights (in units of dr) for n+1 equispaced nodes, order 4 for every n >= 1."""
    if n == 0:
        return np.zeros(1)
    small = {
        1: [0.5, 0.5],
        2: [1 / 3, 4 / 3, 1 / 3],
        3: [3 / 8, 9 / 8, 9 / 8, 3 / 8],
        4: [14 / 45, 64 / 45, 24 / 45, 64 / 45, 14 / 45],
    }
    if n in small:
        out = np.array(small[n])
    else:
        out = np.ones(n + 1)
        end = np.array([3 / 8, 7 / 6, 23 / 24])
        out[:3] = end
        out[-3:] = end[::-1]
    out.setflags(write=False)
    return out


def trapezoid_weights(n: int) -> np.ndarray:
    out = np.ones(n + 1)
    out[0] = out[-1] = 0.5
    if n == 0:
        out[0] = 0.0
    return out


# ------------------------------------------------------------------ Toeplitz machinery


def apply_Hr(acc: Accelerant, f: np.ndarray, r: float, weights: np.ndarray | None = None) -> np.ndarray:
    """(H_r f)(t_i) = int_0^r H(t_i - u) f(u) du by FFT convolution."""
    n = int(round(r / acc.step))
    if abs(n * acc.step - r) > 1e-9 * max(1.0, r):
        raise GridMismatch(f"r={r} is not on the grid")
    f = np.asarray(f)
    if f.shape[0] != n + 1:
        raise GridMismatch(f"expected {n + 1} samples, got {f.shape[0]}")
    om = (trapezoid_weights(n) if weights is None else weights) * acc.step
    return toeplitz_matvec(acc, n, om * f)


def toeplitz_matvec(acc: Accelerant, n: int, v: np.ndarray) -> np.ndarray:
    """sum_j H((i - j) dr) v_j for i, j = 0..n."""
    m = n + 1
    size = 1 << int(np.ceil(np.log2(2 * m)))
    col = np.zeros(size, dtype=complex)
    col[:m] = acc.samples[:m]
    col[size - n:] = np.conj(acc.samples[1:m][::-1]) if n else col[size - n:]
    vv = np.zeros((size,) + v.shape[1:], dtype=complex)
    vv[:m] = v
    spec = np.fft.fft(col)
    spec = spec.reshape((size,) + (1,) * (v.ndim - 1))
    return np.fft.ifft(spec * np.fft.fft(vv, axis=0), axis=0)[:m]


def levinson(col: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the Hermitian Toeplitz system with first column ``col``.

    ``rhs`` may have several columns.  Raises NotPositive when a leading
    principal minor is not positive.
    """
    col = np.asarray(col, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    n = col.size
    c0 = col[0].real
    if not c0 > 0:
        raise NotPositive(f"diagonal {c0} is not positive")
    fwd = np.zeros(n, dtype=complex)
    bwd = np.zeros(n, dtype=complex)
    fwd[0] = bwd[0] = 1.0 / c0
    x = np.zeros((n, b.shape[1]), dtype=complex)
    x[0] = b[0] / c0
    for m in range(1, n):
        # row m of the (m+1) system applied to padded vectors
        seg = col[m:0:-1]
        ef = seg @ fwd[:m]
        eb = np.conj(col[1:m + 1]) @ bwd[:m]
        den = 1.0 - eb * ef
        if not (den.real > 0 and np.isfinite(den)):
            raise NotPositive(f"Levinson pivot {den.real:.3e} at order {m}")
        f_new = np.zeros(m + 1, dtype=complex)
        b_new = np.zeros(m + 1, dtype=complex)
        f_new[:m] = fwd[:m]
        f_new[1:] -= ef * bwd[:m]
        b_new[1:] = bwd[:m]
        b_new[:m] -= eb * fwd[:m]
        fwd[:m + 1] = f_new / den
        bwd[:m + 1] = b_new / den
        ex = seg @ x[:m]
        x[:m + 1] += np.outer(bwd[:m + 1], b[m] - ex)
    return x[:, 0] if vec else x


@dataclass(frozen=True, eq=False)
class ResolventSlice:
    """g_i = Gamma_r(s_i, offset) at s_i = i dr, i = 0..n."""

    r: float
    step: float
    g: np.ndarray
    offset: float = 0.0
    residual: float = 0.0

    @property
    def n(self) -> int:
        return self.g.size - 1

    def edge_row(self) -> np.ndarray:
        """Gamma_r(r, t_j) = g(r - t_j) for offset-0 slices."""
        return self.g[::-1]


def _system_parts(acc: Accelerant, n: int):
    dr = acc.step
    om = gregory_weights(n)
    col = dr * acc.samples[: n + 1].astype(complex)
    col[0] += 1.0
    idx = np.nonzero(np.abs(om - 1.0) > 1e-15)[0]
    return om, col, idx


def discrete_operator(acc: Accelerant, n: int) -> np.ndarray:
    """Dense I + T Omega (for tests and small problems)."""
    k = np.arange(n + 1)
    T = acc.at(k[:, None] - k[None, :])
    return np.eye(n + 1) + T * (acc.step * gregory_weights(n))[None, :]


def _woodbury_solve(acc: Accelerant, n: int, rhs: np.ndarray) -> np.ndarray:
    om, col, idx = _system_parts(acc, n)
    dr = acc.step
    k = np.arange(n + 1)
    U = acc.at(k[:, None] - idx[None, :])  # columns of T at corrected nodes
    sol = levinson(col, np.column_stack([rhs, U]))
    xh, XU = sol[:, 0], sol[:, 1:]
    C = dr * (om[idx] - 1.0)
    small = np.eye(idx.size) + C[:, None] * XU[idx]
    corr = np.linalg.solve(small, C * xh[idx])
    return xh - XU @ corr


def _cg_solve(acc: Accelerant, n: int, rhs: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    dr = acc.step
    om = gregory_weights(n) * dr
    sq = np.sqrt(om)
    # symmetrised system (I + W^1/2 T W^1/2) y = W^1/2 h with y = W^1/2 g
    def mv(y: np.ndarray) -> np.ndarray:
        return y + sq * toeplitz_matvec(acc, n, sq * y)

    op = LinearOperator((n + 1, n + 1), matvec=mv, dtype=complex)
    y, info = cg(op, sq * rhs, rtol=rtol, atol=0.0, maxiter=10 * (n + 1))
    if info != 0:
        raise NotPositive(f"conjugate gradient failed (info={info})")
    # recover g from the unsymmetrised identity g = h - T W g
    return rhs - toeplitz_matvec(acc, n, sq * y)


def resolvent_residual(acc: Accelerant, n: int, g: np.ndarray, rhs: np.ndarray) -> float:
    om = gregory_weights(n) * acc.step
    res = g + toeplitz_matvec(acc, n, om * g) - rhs
    return float(np.linalg.norm(res) / max(np.linalg.norm(rhs), 1e-300))


def solve_resolvent(acc: Accelerant, r: float, offset: float = 0.0, method: str = "levinson") -> ResolventSlice:
    """Column Gamma_r(., offset) of the discrete resolvent identity."""
    dr = acc.step
    n = int(round(r / dr))
    j = int(round(offset / dr))
    if abs(n * dr - r) > 1e-9 * max(1, r) or abs(j * dr - offset) > 1e-9 * max(1, offset) or not 0 <= j <= n:
        raise GridMismatch(f"r={r}, offset={offset} not on the grid")
    if n > acc.max_lag:
        raise GridMismatch("accelerant not sampled far enough")
    k = np.arange(n + 1)
    h = acc.at(k - j).astype(complex)
    if acc.is_zero:
        return ResolventSlice(n * dr, dr, np.zeros(n + 1, dtype=complex), j * dr)
    if n == 0:
        g = h.copy()
    elif method == "levinson":
        g = _woodbury_solve(acc, n, h)
    elif method == "cg":
        g = _cg_solve(acc, n, h)
    elif method == "dense":
        g = np.linalg.solve(discrete_operator(acc, n), h)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = resolvent_residual(acc, n, g, h) if n else 0.0
    return ResolventSlice(n * dr, dr, g, j * dr, res)


def positivity_margin(acc: Accelerant, r: float) -> float:
    """Smallest eigenvalue of the symmetrised discrete I + H_r."""
    n = int(round(r / acc.step))
    if n == 0:
        return 1.0 + 0.0 * acc.H0.real
    sq = np.sqrt(gregory_weights(n) * acc.step)
    if n < 300:
        k = np.arange(n + 1)
        M = np.eye(n + 1) + sq[:, None] * acc.at(k[:, None] - k[None, :]) * sq[None, :]
        return float(np.linalg.eigvalsh(M)[0])

    def mv(y: np.ndarray) -> np.ndarray:
        return y + sq * toeplitz_matvec(acc, n, sq * y)

    op = LinearOperator((n + 1, n + 1), matvec=mv, dtype=complex)
    vals = eigsh(op, k=1, which="SA", tol=1e-10, return_eigenvectors=False)
    return float(vals[0])


# ------------------------------------------------------------------ continuation in r


@dataclass
class Sweep:
    slices: list[ResolventSlice]
    checkpoints: list[tuple[float, float]] = field(default_factory=list)

    @property
    def A(self) -> np.ndarray:
        return np.array([np.conj(s.g[-1]) for s in self.slices])


def _boundary_value(acc: Accelerant, g: np.ndarray, n1: int) -> complex:
    # last row of the discrete identity at r = n1*dr, solved for the new node
    om = gregory_weights(n1) * acc.step
    lags = n1 - np.arange(n1)
    rhs = acc.samples[n1] - np.sum(om[:n1] * acc.at(lags) * g[:n1])
    return rhs / (1.0 + om[n1] * acc.samples[0])


def continuation_sweep(acc: Accelerant, rgrid: RGrid, check_every: int = 10,
                       tolerance: float = 1e-4) -> Sweep:
    """Propagate g_r = Gamma_r(., 0) along the r-grid.

    Interior nodes follow d/dr g_r(s) = -conj(g_r(r - s)) g_r(r) with an
    Adams-Bashforth-Moulton predictor-corrector of order 3 (Heun while fewer
    than two past slopes exist); the new edge node comes from the last row of
    the discrete identity.  Every ``check_every`` steps the slice is compared
    with a direct solve.
    """
    dr = rgrid.step
    if abs(dr - acc.step) > 1e-15:
        raise GridMismatch("accelerant and r-grid steps differ")
    M = rgrid.size
    g = np.array([acc.samples[0]], dtype=complex)
    slices = [ResolventSlice(0.0, dr, g.copy())]
    checks: list[tuple[float, float]] = []
    past: list[np.ndarray] = []
    for n in range(M):
        F0 = -np.conj(g[::-1]) * g[n]
        pred = g + dr * F0
        if len(past) == 2:
            k = past[0].size
            pred[:k] = g[:k] + dr / 12 * (23 * F0[:k] - 16 * past[1][:k] + 5 * past[0])
        gp = np.append(pred, 0j)
        gp[n + 1] = _boundary_value(acc, gp, n + 1)
        F1 = -np.conj(gp[n + 1:0:-1]) * gp[n + 1]
        new = np.append(g + 0.5 * dr * (F0 + F1), 0j)
        if past:
            k = past[-1].size
            new[:k] = g[:k] + dr / 12 * (5 * F1[:k] + 8 * F0[:k] - past[-1])
        new[n + 1] = _boundary_value(acc, new, n + 1)
        past = (past + [F0])[-2:]
        g = new
        if not np.all(np.isfinite(g)):
            raise NonFinite(f"continuation produced non-finite values at r={(n + 1) * dr}")
        slices.append(ResolventSlice((n + 1) * dr, dr, g.copy()))
        if check_every and (n + 1) % check_every == 0:
            ref = solve_resolvent(acc, (n + 1) * dr).g
            scale = np.linalg.norm(ref)
            disc = float(np.linalg.norm(g - ref) / scale) if scale > 0 else float(np.linalg.norm(g))
            checks.append(((n + 1) * dr, disc))
            if disc > tolerance:
                raise DivergedFromDirect(f"continuation differs from direct solve by {disc:.2e} at r={(n + 1) * dr}")
    return Sweep(slices, checks)


def direct_sweep(acc: Accelerant, rgrid: RGrid) -> Sweep:
    """Independent Levinson solve at every r node."""
    return Sweep([solve_resolvent(acc, r) for r in rgrid.nodes])
