import numpy as np
import pytest
from scipy.special import roots_legendre, sici

from krein.errors import StepTooLarge, SupportViolation
from krein.experiments import ExperimentConfig, ode_discrepancy, solve_weight
from krein.kreinsol import (SplineBump, band_orthogonality_check, evaluate_all, evaluate_P, evaluate_Pstar, extract_A,
                            filon_matrix_check, fourier_integral, ode_oracle, orthonormality_check, plancherel_ratio)
from krein.weights import bump_weight

F5 = SplineBump(5.0, 1.0)
LAM = np.linspace(-10, 10, 101)


def test_filon_two_routes(rng):
    vals = rng.standard_normal(41) + 1j * rng.standard_normal(41)
    lam = np.linspace(-30, 30, 77)
    for sign in (1, -1):
        assert np.max(np.abs(fourier_integral(vals, 0.05, lam, sign) - filon_matrix_check(vals, 0.05, lam, sign))) < 1e-12


def test_filon_exact_on_cubics():
    s = np.linspace(0, 2, 41)
    vals = 1 + s - 0.5 * s**2
    lam = np.array([0.0, 1.3])
    exact = [2 + 2 - 4 / 3]
    assert fourier_integral(vals, 0.05, lam[:1])[0] == pytest.approx(exact[0], abs=1e-12)


def test_unit_weight(solved_unit):
    s = solved_unit
    ev = evaluate_all(s.sweep, s.rgrid, LAM)
    assert np.max(np.abs(ev.P - np.exp(1j * np.outer(s.rgrid.nodes, LAM)))) == 0
    assert np.max(np.abs(ev.Pstar - 1)) < 1e-15
    assert not np.any(ev.A)


def test_initial_values(solved_bump):
    ev = evaluate_all(solved_bump.sweep, solved_bump.rgrid, LAM)
    assert np.all(ev.P[0] == 1) and np.all(ev.Pstar[0] == 1)
    assert np.max(np.abs(np.abs(ev.Pstar) - np.abs(ev.P))) < 1e-15


def _p_at_zero(s, r=10.0):
    return evaluate_P(s.sweep.slices[s.rgrid.index(r)], np.array([0.0]))[0]


def _second_order_coefficient(r=10.0, n=400):
    # int_0^r int_0^r K(s - u) K(u) du ds with K(x) = sin(x) / (pi x), by panel Gauss-Legendre
    x, wx = roots_legendre(n)
    pts = np.concatenate([a + 0.5 * (x + 1) for a in range(int(r))])
    wts = np.tile(0.5 * wx, int(r))
    K = lambda t: np.sinc(t / np.pi) / np.pi
    return float(np.sum(wts[:, None] * wts[None, :] * K(pts[:, None] - pts[None, :]) * K(pts[None, :])))


def test_sine_integral_through_second_order(solved_small_bump):
    d = 1e-3
    oracle = -(d / np.pi) * sici(10.0)[0] + d**2 * _second_order_coefficient()
    assert abs(_p_at_zero(solved_small_bump) - oracle) < 1e-9


@pytest.mark.xfail(strict=True, reason="the delta^2 term is 0.42 delta^2 = 4.2e-7 at delta = 1e-3")
def test_sine_integral_first_order_only(solved_small_bump):
    assert abs(_p_at_zero(solved_small_bump) - (-(1e-3 / np.pi) * sici(10.0)[0])) < 1e-7


def test_cauchy_schwarz_bound(solved_bump):
    s = solved_bump
    for r in (2.0, 10.0, 20.0):
        sl = s.sweep.slices[s.rgrid.index(r)]
        d = np.abs(evaluate_P(sl, s.lgrid.nodes[::8]))
        assert d.max() <= np.sqrt(r) * np.sqrt(sl.step * np.sum(np.abs(sl.g) ** 2)) * (1 + 1e-6)


def test_plancherel(solved_bump):
    s = solved_bump
    assert plancherel_ratio(s.sweep.slices[s.rgrid.index(10.0)], s.lgrid) == pytest.approx(1.0, abs=1e-3)


def test_A_first_order(solved_small_bump):
    s = solved_small_bump
    r = s.rgrid.nodes[1:]
    A = extract_A(s.sweep)
    assert np.max(np.abs(A[1:] - 1e-3 * np.sin(r) / (np.pi * r))) < 5e-6


def test_A_refinement_stable(solved_bump):
    fine = solve_weight(bump_weight(0.1), ExperimentConfig(dr=0.025))
    a1 = np.sqrt(0.05 * np.sum(np.abs(extract_A(solved_bump.sweep)) ** 2))
    a2 = np.sqrt(0.025 * np.sum(np.abs(extract_A(fine.sweep)) ** 2))
    assert abs(a1 / a2 - 1) <= 0.01


def test_ode_decoupled():
    A = np.zeros(401)
    out = ode_oracle(A, 0.05, LAM)
    assert np.max(np.abs(out.P - np.exp(1j * LAM * 20.0))) < 1e-12
    assert np.all(out.Pstar == 1)


def test_ode_step_guard():
    with pytest.raises(StepTooLarge):
        ode_oracle(np.full(5, 20.0), 0.05, LAM)


def test_ode_against_integral_equation(solved_bump):
    s = solved_bump
    ev = evaluate_all(s.sweep, s.rgrid, LAM)
    out = ode_oracle(ev.A, s.rgrid.step, LAM)
    assert np.max(np.abs(out.P - ev.P[-1])) <= 1e-5
    assert np.max(np.abs(out.Pstar - ev.Pstar[-1])) <= 1e-5
    assert out.modulus_defect < 1e-9


def test_ode_improves_under_refinement():
    w = bump_weight(0.1)
    e1 = ode_discrepancy(w, 0.05, LAM, r_max=5.0)
    e2 = ode_discrepancy(w, 0.025, LAM, r_max=5.0)
    assert e1 / e2 >= 8


def test_spline_bump_transform():
    f = SplineBump(3.0, 1.2, 0.7)
    s = np.linspace(*f.support, 20001)
    for lam in (0.0, 2.5, -7.0):
        direct = np.trapezoid(f(s) * np.exp(1j * lam * s), s)
        assert abs(direct - f.transform(np.array([lam]))[0]) < 1e-7


def test_orthonormality(solved_unit, solved_bump):
    u, b = solved_unit, solved_bump
    g = SplineBump(6.0, 1.5)
    assert abs(orthonormality_check(u.w, F5, g, u.sweep, u.rgrid, u.lgrid)) <= 1e-6
    res = abs(orthonormality_check(b.w, F5, F5, b.sweep, b.rgrid, b.lgrid))
    assert res <= 5e-3
    fg = orthonormality_check(b.w, F5, g, b.sweep, b.rgrid, b.lgrid)
    gf = orthonormality_check(b.w, g, F5, b.sweep, b.rgrid, b.lgrid)
    assert abs(fg - np.conj(gf)) <= 1e-12


def test_orthonormality_support_guard(solved_bump):
    b = solved_bump
    with pytest.raises(SupportViolation):
        orthonormality_check(b.w, SplineBump(19.5, 1.0), F5, b.sweep, b.rgrid, b.lgrid)


def test_band_orthogonality(solved_unit, solved_bump):
    u, b = solved_unit, solved_bump
    i = u.rgrid.index(10.0)
    assert abs(band_orthogonality_check(u.w, u.sweep.slices[i], 0, F5, u.lgrid)) <= 1e-8
    sl = b.sweep.slices[i]
    assert abs(band_orthogonality_check(b.w, sl, 0, F5, b.lgrid)) <= 1e-4
    assert abs(band_orthogonality_check(b.w, sl, 1, F5, b.lgrid)) <= 1e-3
    with pytest.raises(SupportViolation):
        band_orthogonality_check(b.w, sl, 0, SplineBump(9.5, 1.0), b.lgrid)


def test_pstar_formula():
    lam = np.linspace(-3, 3, 7)
    P = np.exp(0.3j * lam) * (1 + 0.1j)
    Ps = evaluate_Pstar(P, lam, 2.0)
    assert np.allclose(np.abs(Ps), np.abs(P))
