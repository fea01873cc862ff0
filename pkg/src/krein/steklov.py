"""Weighted band projections, Q_{w,p}, operator norms and the functional equations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import BadParameter, NoConvergence, NotContractive, Singular, WeightVanishes
from .harmonic import LambdaGrid, band_multiplier

DENSE_CAP = 4096
PAD = 4  # the band projection acts on the window zero-padded to PAD times its length


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    grid: LambdaGrid
    entries: np.ndarray
    label: str

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.entries @ x


def _check_dense(grid: LambdaGrid) -> None:
    if grid.n_points > DENSE_CAP:
        raise BadParameter(f"dense assembly capped at N={DENSE_CAP}, got {grid.n_points}")


def _padded(grid: LambdaGrid, pad: int) -> LambdaGrid:
    if pad < 1:
        raise BadParameter("pad must be a positive integer")
    return LambdaGrid(grid.half_width * pad, grid.n_points * pad, grid.shift)


def assemble_band_matrix(r: float, grid: LambdaGrid, pad: int = PAD, fractional: bool = True) -> OperatorMatrix:
    """Nodal matrix of the projection onto the band [0, r]: the window block of a padded circulant.

    ``pad=1, fractional=False`` gives the exact periodic projection; the default
    trades exact idempotence for a closer match to the continuous band.
    """
    _check_dense(grid)
    big = _padded(grid, pad)
    col = np.fft.ifft(band_multiplier(big, 0.0, r, fractional=fractional))
    n = grid.n_points
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % big.n_points
    return OperatorMatrix(grid, col[idx], f"band[0,{r}]")


def weight_powers(w, p: float, grid: LambdaGrid) -> tuple[np.ndarray, np.ndarray]:
    """Nodal w^{1/p} and w^{1/p'}."""
    vals = w.nodal(grid.nodes)
    if not np.all(np.isfinite(vals)) or np.any(vals <= np.finfo(float).tiny):
        raise WeightVanishes("weight vanishes or blows up at a grid node; shift the grid")
    pd = p / (p - 1.0)
    return vals ** (1.0 / p), vals ** (1.0 / pd)


def assemble_Q(w, p: float, r: float, grid: LambdaGrid) -> OperatorMatrix:
    """Q = w^{1/p} P w^{-1/p} - w^{-1/p'} P w^{1/p'}."""
    if not p > 1:
        raise BadParameter("p must exceed 1")
    grid = grid.shifted_off(w.singular_points)
    M = assemble_band_matrix(r, grid).entries
    d1, d2 = weight_powers(w, p, grid)
    Q = d1[:, None] * M / d1[None, :] - M * d2[None, :] / d2[:, None]
    return OperatorMatrix(grid, Q, f"Q[{w.spec},p={p},r={r}]")


# ------------------------------------------------------------------ norms


def _dual(x: np.ndarray, p: float) -> np.ndarray:
    """Duality map: the unit l^{p'} vector attaining <x, y> = ||x||_p."""
    ax = np.abs(x)
    nrm = np.linalg.norm(x, p)
    if nrm == 0:
        return np.zeros_like(x)
    phase = np.sign(x) if np.isrealobj(x) else np.where(ax > 0, np.exp(1j * np.angle(x)), 0)
    return phase * (ax / nrm) ** (p - 1)


@dataclass(frozen=True, eq=False)
class NormEstimate:
    value: float
    iterate: np.ndarray
    iterations: int


def _boyd(apply, apply_h, n: int, p: float, x0: np.ndarray, maxiter: int) -> tuple[float, np.ndarray, int]:
    q = p / (p - 1.0)
    x = x0 / np.linalg.norm(x0, p)
    best, best_x = 0.0, x
    for it in range(1, maxiter + 1):
        y = apply(x)
        est = float(np.linalg.norm(y, p))
        if est > best:
            best, best_x = est, x
        z = apply_h(_dual(y, p))
        if np.linalg.norm(z, q) <= np.real(np.vdot(x, z)) * (1 + 1e-12) or est == 0:
            return best, best_x, it
        x_new = _dual(z, q)
        if np.linalg.norm(x_new - x, p) < 1e-12:
            return best, best_x, it
        x = x_new
    return best, best_x, maxiter


def operator_pnorm(M: OperatorMatrix | np.ndarray, p: float, mode: str = "lower", probes: int = 64,
                   seed: int = 0, maxiter: int = 10_000) -> NormEstimate:
    """p = 2: largest singular value by power iteration.  Otherwise a certified lower bound by
    nonlinear power iteration on the duality maps, maximised over random probes."""
    A = M.entries if isinstance(M, OperatorMatrix) else np.asarray(M)
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    if p == 2 or mode == "exact2":
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        x /= np.linalg.norm(x)
        prev = 0.0
        for it in range(1, maxiter + 1):
            y = A.conj().T @ (A @ x)
            lam = float(np.linalg.norm(y))
            if lam == 0:
                return NormEstimate(0.0, x, it)
            x = y / lam
            if abs(lam - prev) <= 1e-10 * lam:
                return NormEstimate(float(np.sqrt(lam)), x, it)
            prev = lam
        raise NoConvergence("power iteration did not converge")
    AH = A.conj().T
    best = NormEstimate(0.0, np.zeros(n), 0)
    starts = [np.ones(n, dtype=complex)] + [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(probes - 1)]
    for x0 in starts:
        val, x, it = _boyd(lambda v: A @ v, lambda v: AH @ v, n, p, x0, maxiter)
        if val > best.value:
            best = NormEstimate(val, x, it)
    return best


@dataclass(frozen=True, eq=False)
class InverseCertificate:
    p: float
    lower_bound: float
    exact_2norm: float


def inverse_norm_certificate(w, p: float, r: float, grid: LambdaGrid, probes: int = 16,
                             seed: int = 0) -> InverseCertificate:
    """Lower bound for ||(I - Q_{w,p})^{-1}||_{p,p} plus the exact 2-norm."""
    Q = assemble_Q(w, p, r, grid).entries
    B = np.eye(Q.shape[0]) - Q
    try:
        s = np.linalg.svd(B, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    if s[-1] <= 1e-14 * s[0]:
        raise Singular("I - Q is numerically singular")
    lu = lu_factor(B)
    if p == 2:
        return InverseCertificate(p, float(1 / s[-1]), float(1 / s[-1]))
    rng = np.random.default_rng(seed)
    n = B.shape[0]
    best = 0.0
    starts = [np.ones(n, dtype=complex)] + [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(probes - 1)]
    for x0 in starts:
        val, _, _ = _boyd(lambda v: lu_solve(lu, v), lambda v: lu_solve(lu, v, trans=2), n, p, x0, 500)
        best = max(best, val)
    return InverseCertificate(p, best, float(1 / s[-1]))


# ------------------------------------------------------------------ matrix-free operators


def band_apply(grid: LambdaGrid, r: float, pad: int = PAD):
    big = _padded(grid, pad)
    m = band_multiplier(big, 0.0, r, fractional=True)
    n, start = grid.n_points, (big.n_points - grid.n_points) // 2

    def apply(f):
        buf = np.zeros(big.n_points, dtype=complex)
        buf[start:start + n] = f
        return np.fft.ifft(m * np.fft.fft(buf))[start:start + n]

    return apply


def q_apply(w, p: float, r: float, grid: LambdaGrid, pad: int = PAD):
    d1, d2 = weight_powers(w, p, grid)
    P = band_apply(grid, r, pad)
    return lambda f: d1 * P(f / d1) - P(f * d2) / d2


def equation_rhs(w, p: float, r: float, grid: LambdaGrid, carrier: np.ndarray) -> np.ndarray:
    """-w^{-1/p'} P_{[0,r]} [w^{1/p'} (w^{1/p} - w^{-1/p'}) carrier]."""
    d1, d2 = weight_powers(w, p, grid)
    P = band_apply(grid, r)
    return -P(d2 * (d1 - 1.0 / d2) * carrier) / d2


@dataclass(frozen=True, eq=False)
class SteklovSolution:
    p: float
    r: float
    X: np.ndarray
    rhs: np.ndarray
    residual: float
    discrepancy: float = float("nan")


def functional_residual(w, p: float, r: float, grid: LambdaGrid, direct: np.ndarray,
                        carrier: np.ndarray) -> SteklovSolution:
    """Plug X = w^{1/p} * direct into (I - Q) X = rhs(carrier); residual normalised in l^p.

    k = 0: direct = P - e^{i lam r}, carrier = e^{i lam r}.
    k = 1: direct = R_{1,r}, carrier = lam e^{i lam r} + a_{1,r}.
    """
    d1, _ = weight_powers(w, p, grid)
    X = d1 * direct
    Q = q_apply(w, p, r, grid)
    rhs = equation_rhs(w, p, r, grid, carrier)
    res = X - Q(X) - rhs
    nr = np.linalg.norm(rhs, p)
    val = float(np.linalg.norm(res, p) / nr) if nr > 0 else float(np.linalg.norm(res, p))
    return SteklovSolution(p, r, X, rhs, val)


def solve_X(w, p: float, r: float, grid: LambdaGrid, direct: np.ndarray, carrier: np.ndarray,
            tol: float = 1e-12) -> SteklovSolution:
    """X = -(I - Q)^{-1} w^{-1/p'} P w^{1/p'} (w^{1/p} - w^{-1/p'}) carrier, compared with the direct X."""
    d1, _ = weight_powers(w, p, grid)
    rhs = equation_rhs(w, p, r, grid, carrier)
    n = grid.n_points
    if n <= 512:
        Q = assemble_Q(w, p, r, grid).entries
        try:
            X = np.linalg.solve(np.eye(n) - Q, rhs)
        except np.linalg.LinAlgError as exc:
            raise Singular(str(exc)) from exc
    else:
        Qa = q_apply(w, p, r, grid)
        op = LinearOperator((n, n), matvec=lambda v: v - Qa(v), dtype=complex)
        X, info = gmres(op, rhs, rtol=tol, atol=0.0, restart=200, maxiter=50)
        if info != 0:
            raise Singular(f"GMRES did not converge (info={info})")
    Xd = d1 * direct
    nd = np.linalg.norm(Xd)
    disc = float(np.linalg.norm(X - Xd) / nd) if nd > 0 else float(np.linalg.norm(X))
    Q = q_apply(w, p, r, grid)
    nr = np.linalg.norm(rhs, p)
    res = float(np.linalg.norm(X - Q(X) - rhs, p) / nr) if nr > 0 else 0.0
    return SteklovSolution(p, r, X, rhs, res, disc)


@dataclass(frozen=True, eq=False)
class NeumannResult:
    inverse: OperatorMatrix
    terms: int
    contraction: float
    direct_gap: float


def neumann_inverse(w, r: float, grid: LambdaGrid, tol: float = 1e-12, max_terms: int = 10_000) -> NeumannResult:
    """(I - P_{[0,r]}(1 - w))^{-1} as the partial sums of sum_k (P(1 - w))^k."""
    grid = grid.shifted_off(w.singular_points)
    vals = w.nodal(grid.nodes)
    delta = float(np.max(np.abs(1.0 - vals)))
    if not delta < 1.0:
        raise NotContractive(f"sup |1 - w| = {delta:.3g} >= 1")
    M = assemble_band_matrix(r, grid).entries
    T = M * (1.0 - vals)[None, :]
    n = grid.n_points
    S = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    k = 1
    while k <= max_terms:
        term = T @ term
        S += term
        if np.linalg.norm(term, 2) < tol:
            break
        k += 1
    else:
        raise NoConvergence("Neumann series did not reach tolerance")
    direct = np.linalg.inv(np.eye(n) - T)
    gap = float(np.linalg.norm(S - direct, 2))
    return NeumannResult(OperatorMatrix(grid, S, f"neumann[{w.spec},r={r}]"), k, delta, gap)
