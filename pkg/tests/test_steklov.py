import numpy as np
import pytest

from krein.errors import BandOutOfRange, BadParameter, NotContractive, WeightVanishes
from krein.harmonic import LambdaGrid
from krein.steklov import (assemble_band_matrix, assemble_Q, band_apply, functional_residual, inverse_norm_certificate,
                           neumann_inverse, operator_pnorm, q_apply, solve_X, weight_powers)
from krein.weights import bump_weight, gauss_weight, make_weight, power_weight

SMALL = LambdaGrid(16.0, 256)
ZOO = ["bump:delta=0.1,a=-1,b=1", "bump:delta=-0.3,a=0,b=2", "gauss:delta=0.5,width=2",
       "power:beta=0.3,center=0.05", "prod:[power:beta=-0.2,center=0.05;bump:delta=0.2,a=1,b=3]"]


def test_band_matrix():
    ds = 2 * np.pi / (2 * SMALL.half_width)
    exact = assemble_band_matrix(5.0, SMALL, pad=1, fractional=False)
    E = exact.entries
    assert np.max(np.abs(E @ E - E)) < 1e-12 and np.max(np.abs(E - E.conj().T)) < 1e-15
    assert operator_pnorm(exact, 2).value == pytest.approx(1.0, abs=1e-10)
    assert abs(np.trace(E).real - round(np.trace(E).real)) < 1e-9
    assert abs(np.trace(E).real - 5.0 / ds) <= 1
    M = assemble_band_matrix(5.0, SMALL)
    assert abs(np.trace(M.entries).real - 5.0 / ds) <= 1
    assert 1 - 1e-5 <= operator_pnorm(M, 2).value <= 1 + 1e-12
    with pytest.raises(BandOutOfRange):
        assemble_band_matrix(100.0, SMALL)


def test_band_matrix_matches_matrix_free(rng):
    f = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    M = assemble_band_matrix(5.0, SMALL)
    assert np.max(np.abs(M @ f - band_apply(SMALL, 5.0)(f))) < 1e-12


def test_unit_weight_Q_vanishes():
    w = make_weight("const:c=1")
    assert not np.any(np.abs(assemble_Q(w, 2.0, 5.0, SMALL).entries) > 1e-15)
    c = inverse_norm_certificate(w, 2.2, 5.0, SMALL)
    assert c.lower_bound == pytest.approx(1.0, abs=1e-12) and c.exact_2norm == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec", ZOO)
def test_Q_antisymmetric_at_p2(spec):
    w = make_weight(spec)
    grid = SMALL.shifted_off(w.singular_points)
    Q = assemble_Q(w, 2.0, 5.0, grid).entries
    assert np.max(np.abs(Q + Q.conj().T)) <= 1e-10
    assert inverse_norm_certificate(w, 2.0, 5.0, grid).exact_2norm <= 1 + 1e-8


def test_Q_matches_matrix_free(rng):
    w = bump_weight(0.2)
    f = rng.standard_normal(256) + 0j
    for p in (1.8, 2.0, 2.5):
        Q = assemble_Q(w, p, 5.0, SMALL)
        assert np.max(np.abs(Q @ f - q_apply(w, p, 5.0, SMALL)(f))) < 1e-12


def test_Q_norm_linear_in_delta():
    ds = np.logspace(-3, -1, 5)
    norms = [operator_pnorm(assemble_Q(bump_weight(d), 2.0, 5.0, SMALL), 2).value for d in ds]
    slope = np.polyfit(np.log(ds), np.log(norms), 1)[0]
    assert abs(slope - 1) <= 0.1


def test_pnorm_basic(rng):
    n = 32
    for p in (1.5, 2.0, 3.0):
        assert operator_pnorm(np.eye(n), p).value == pytest.approx(1.0)
        d = rng.uniform(-2, 2, n)
        assert operator_pnorm(np.diag(d), p, probes=8).value == pytest.approx(np.max(np.abs(d)), rel=1e-9)


def test_pnorm_lower_bound_is_attained(rng):
    A = rng.standard_normal((20, 20))
    est = operator_pnorm(A, 3.0, probes=8)
    x = est.iterate
    assert np.linalg.norm(A @ x, 3) / np.linalg.norm(x, 3) == pytest.approx(est.value, rel=1e-9)


def test_certificate_sweep():
    w = bump_weight(0.2)
    grid = LambdaGrid(16.0, 256)
    worst = max(inverse_norm_certificate(w, 2.2, r, grid, probes=4).lower_bound for r in (0.5, 5.0, 10.0, 20.0))
    assert worst <= 3


def test_weight_vanishing_on_node():
    w = power_weight(0.3)
    with pytest.raises(WeightVanishes):
        weight_powers(w, 2.0, SMALL)
    shifted = SMALL.shifted_off(w.singular_points)
    assert shifted.shift == SMALL.step / 2
    assert assemble_Q(w, 2.0, 5.0, SMALL).grid == shifted


def test_functional_residual_and_solve_X(solved_unit, solved_bump):
    u = solved_unit
    lam = u.lgrid.nodes
    e = np.exp(1j * lam * 5.0)
    zero = np.zeros_like(e)
    sol = functional_residual(u.w, 2.0, 5.0, u.lgrid, zero, e)
    assert sol.residual == 0 and not np.any(sol.rhs)
    assert not np.any(solve_X(u.w, 2.0, 5.0, u.lgrid, zero, e).X)

    from krein.kreinsol import evaluate_P
    b = solved_bump
    sl = b.sweep.slices[b.rgrid.index(5.0)]
    lam = b.lgrid.nodes
    e = np.exp(1j * lam * 5.0)
    D = evaluate_P(sl, lam)
    assert functional_residual(b.w, 2.0, 5.0, b.lgrid, D, e).residual <= 5e-3
    discs = [solve_X(b.w, p, 5.0, b.lgrid, D, e).discrepancy for p in (1.8, 2.2)]
    assert max(discs) <= 1e-2
    assert discs[0] / discs[1] == pytest.approx(1.0, abs=0.5)


def test_neumann():
    w = make_weight("const:c=1")
    res = neumann_inverse(w, 5.0, SMALL)
    assert res.terms == 1 and np.allclose(res.inverse.entries, np.eye(256))
    res = neumann_inverse(bump_weight(0.3), 5.0, SMALL, tol=1e-12)
    assert res.direct_gap <= 1e-8
    assert res.terms <= np.log(1e-12) / np.log(0.3 * 1.01) + 1
    with pytest.raises(NotContractive):
        neumann_inverse(bump_weight(1.5), 5.0, SMALL)


def test_dense_cap():
    with pytest.raises(BadParameter):
        assemble_band_matrix(5.0, LambdaGrid(512.0, 8192))
