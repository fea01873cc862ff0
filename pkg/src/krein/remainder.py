"""Remainders R_{k,r}, boundary coefficients a_{l,r} and the alpha split of a_{1,r}."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CrossCheckFailed, RegularityNotCertified
from .kreincore import ResolventSlice, gregory_weights
from .kreinsol import evaluate_P, fourier_integral
from .weights import LogTail, Weight

MAX_K = 3


def moment_certified(w: Weight, k: int) -> bool:
    """True when <lam>^k (w - 1) is integrable, judged from the closed form."""
    if k == 0:
        return True
    for f in w.factors:
        if isinstance(f, LogTail) and f.delta != 0:
            if f.a < k + 1 or (f.a == k + 1 and f.b <= 1):
                return False
    return w.tail_decay() != 0.0


@lru_cache(maxsize=None)
def fd_weights(m: int, offsets: tuple[int, ...]) -> np.ndarray:
    """Weights for the m-th derivative at 0 from samples at integer ``offsets`` (unit spacing)."""
    x = np.array(offsets, dtype=float)
    V = np.vander(x, increasing=True).T
    rhs = np.zeros(len(x))
    rhs[m] = float(np.prod(np.arange(1, m + 1)))
    return np.linalg.solve(V, rhs)


def derivative(vals: np.ndarray, h: float, m: int, accuracy: int = 4) -> np.ndarray:
    """m-th derivative of equispaced samples: centred stencils inside, one-sided near the ends."""
    vals = np.asarray(vals)
    if m == 0:
        return vals.copy()
    n = vals.size
    width = 2 * ((m + 1) // 2) - 1 + accuracy
    half = width // 2
    if n < width + 1:
        raise ValueError(f"need at least {width + 1} samples for derivative order {m}")
    out = np.empty(n, dtype=vals.dtype)
    wc = fd_weights(m, tuple(range(-half, half + 1)))
    inner = np.zeros(n - 2 * half, dtype=vals.dtype)
    for k, c in zip(range(-half, half + 1), wc):
        inner += c * vals[half + k:n - half + k]
    out[half:n - half] = inner
    size = m + accuracy
    for i in range(half):
        wl = fd_weights(m, tuple(range(-i, size - i)))
        out[i] = wl @ vals[:size]
        wr = fd_weights(m, tuple(range(-(size - 1 - i), i + 1)))
        out[n - 1 - i] = wr @ vals[n - size:]
    return out / h**m


def edge_row(sl: ResolventSlice) -> np.ndarray:
    """Gamma_r(r, t_j) = g_r(r - t_j), j = 0..n."""
    return sl.g[::-1]


@dataclass(frozen=True, eq=False)
class BoundaryDerivatives:
    c: np.ndarray  # d^{l-1}/dt^{l-1} Gamma_r(r, t) at t = r, l = 1..k
    d: np.ndarray  # same at t = 0


def gamma_boundary_derivatives(sl: ResolventSlice, k: int, w: Weight | None = None) -> BoundaryDerivatives:
    if not 0 <= k <= MAX_K:
        raise ValueError(f"k must lie in 0..{MAX_K}")
    if w is not None and not moment_certified(w, k):
        raise RegularityNotCertified(f"<lam>^{k}(w-1) is not integrable for {w.spec!r}")
    e = edge_row(sl)
    c = np.empty(k, dtype=complex)
    d = np.empty(k, dtype=complex)
    for l in range(1, k + 1):
        m = l - 1
        if m == 0:
            c[0], d[0] = e[-1], e[0]
            continue
        size = m + 4
        d[l - 1] = fd_weights(m, tuple(range(size))) @ e[:size] / sl.step**m
        c[l - 1] = fd_weights(m, tuple(range(-size + 1, 1))) @ e[-size:] / sl.step**m
    return BoundaryDerivatives(c, d)


def compute_a_coeffs(c: np.ndarray, d: np.ndarray, l: int, r: float, lam: np.ndarray) -> np.ndarray:
    """a_{l,r}(lam) = i^l (exp(i lam r) c_l - d_l)."""
    lam = np.asarray(lam, dtype=float)
    return (1j**l) * (np.exp(1j * lam * r) * c[l - 1] - d[l - 1])


@dataclass(frozen=True, eq=False)
class RemainderEval:
    k: int
    r: float
    c: np.ndarray
    d: np.ndarray
    R: np.ndarray
    R_algebraic: np.ndarray
    discrepancy: float

    def a(self, l: int, lam: np.ndarray) -> np.ndarray:
        return compute_a_coeffs(self.c, self.d, l, self.r, lam)


def compute_remainder(sl: ResolventSlice, k: int, lam: np.ndarray, w: Weight | None = None,
                      check_window: float | None = None, tolerance: float = 1e-4) -> RemainderEval:
    """R_{k,r}(lam) = -i^k int_0^r d^k/dt^k Gamma_r(r, t) exp(i lam t) dt.

    The integral is cross-checked against lam^k (P - e^{i lam r}) - sum_l lam^{k-l} a_{l,r}
    on |lam| <= ``check_window``.
    """
    lam = np.asarray(lam, dtype=float)
    bd = gamma_boundary_derivatives(sl, k, w)
    diff = evaluate_P(sl, lam)
    if k == 0:
        return RemainderEval(0, sl.r, bd.c, bd.d, diff, diff, 0.0)
    e = edge_row(sl)
    if sl.n == 0 or not np.any(e):
        R = np.zeros(lam.shape, dtype=complex)
    else:
        dk = derivative(e, sl.step, k)
        R = -(1j**k) * fourier_integral(dk, sl.step, lam, sign=1)
    alg = lam**k * diff
    for l in range(1, k + 1):
        alg = alg - lam ** (k - l) * compute_a_coeffs(bd.c, bd.d, l, sl.r, lam)
    sel = np.ones(lam.shape, bool) if check_window is None else np.abs(lam) <= check_window
    disc = float(np.max(np.abs(R - alg)[sel], initial=0.0))
    if disc > tolerance:
        raise CrossCheckFailed(f"remainder formulas differ by {disc:.2e} (k={k}, r={sl.r})")
    return RemainderEval(k, sl.r, bd.c, bd.d, R, alg, disc)


@dataclass(frozen=True, eq=False)
class AlphaDecomposition:
    alpha_inf: np.ndarray
    alpha_2: np.ndarray
    limit: complex
    tail_assumed_zero: bool = True


def cumulative_integral(f: np.ndarray, h: float) -> np.ndarray:
    """int_0^{r_i} f for every node, fourth order (Gregory) once enough nodes exist."""
    f = np.asarray(f)
    out = np.zeros(f.size, dtype=f.dtype)
    for i in range(1, f.size):
        out[i] = h * np.sum(gregory_weights(i) * f[: i + 1])
    return out


def alpha_decomposition(A: np.ndarray, H0: complex, dr: float) -> AlphaDecomposition:
    """alpha_inf(r) = -i(-H(0) + int_0^r |A|^2), alpha_2(r) = -i conj(A(r))."""
    A = np.asarray(A, dtype=complex)
    a_inf = -1j * (-H0 + cumulative_integral(np.abs(A) ** 2, dr))
    a2 = -1j * np.conj(A)
    return AlphaDecomposition(a_inf, a2, complex(a_inf[-1]))
