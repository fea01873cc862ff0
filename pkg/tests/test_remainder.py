import numpy as np
import pytest

from krein.errors import RegularityNotCertified
from krein.experiments import ExperimentConfig, solve_weight
from krein.remainder import (alpha_decomposition, compute_a_coeffs, compute_remainder, cumulative_integral,
                             derivative, gamma_boundary_derivatives, moment_certified)
from krein.kreinsol import evaluate_P, extract_A
from krein.weights import bump_weight, deviation_moment, make_weight

LAM = np.linspace(-20, 20, 401)


def test_derivative_stencils():
    h = 0.01
    x = np.arange(200) * h
    f = np.sin(x)
    assert np.max(np.abs(derivative(f, h, 1) - np.cos(x))) < 1e-8
    assert np.max(np.abs(derivative(f, h, 2) + np.sin(x))) < 1e-6
    assert np.max(np.abs(derivative(f, h, 3) + np.cos(x))) < 1e-4


def test_cumulative_integral():
    h = 0.05
    x = np.arange(81) * h
    assert np.max(np.abs(cumulative_integral(np.cos(x), h)[4:] - np.sin(x)[4:])) < 1e-6


def test_unit_weight(solved_unit):
    s = solved_unit
    sl = s.sweep.slices[s.rgrid.index(7.0)]
    bd = gamma_boundary_derivatives(sl, 3)
    assert not np.any(bd.c) and not np.any(bd.d)
    for k in range(4):
        assert not np.any(compute_remainder(sl, k, LAM).R)
    al = alpha_decomposition(extract_A(s.sweep), 0j, s.rgrid.step)
    assert not np.any(al.alpha_inf) and not np.any(al.alpha_2)


def test_k0_is_P_minus_exponential(solved_bump):
    sl = solved_bump.sweep.slices[100]
    assert np.array_equal(compute_remainder(sl, 0, LAM).R, evaluate_P(sl, LAM))


def test_index_identities(solved_bump):
    s = solved_bump
    A = extract_A(s.sweep)
    for i in (10, 200, 400):
        sl = s.sweep.slices[i]
        bd = gamma_boundary_derivatives(sl, 1)
        assert bd.c[0] == sl.g[0]
        assert bd.d[0] == sl.g[-1] == np.conj(A[i])


def test_d2_first_order():
    small = solve_weight(make_weight("gauss:delta=0.001"), ExperimentConfig())
    for r in (2.0, 5.0):
        bd = gamma_boundary_derivatives(small.sweep.slices[small.rgrid.index(r)], 2)
        # t-derivative of Gamma_r(r, t) ~ H(r - t) at t = 0 is -H'(r)
        dH = -1e-3 * r * np.exp(-r * r / 2) / np.sqrt(2 * np.pi)
        assert abs(bd.d[1] - (-dH)) < 1e-7


def test_a_coeff_triangle_bound(solved_bump):
    sl = solved_bump.sweep.slices[200]
    bd = gamma_boundary_derivatives(sl, 3)
    for l in (1, 2, 3):
        a = compute_a_coeffs(bd.c, bd.d, l, sl.r, LAM)
        assert np.max(np.abs(a)) <= abs(bd.c[l - 1]) + abs(bd.d[l - 1]) + 1e-15


def test_a_coeff_against_moment():
    # recorded constant: sup_r sup_lam |a_1| / (L / (1 - delta)) stays below 1/4
    for delta in (0.1, 0.3, 0.5):
        w = bump_weight(delta)
        s = solve_weight(w, ExperimentConfig(r_max=10.0))
        L = deviation_moment(w, 1)
        top = 0.0
        for i in range(0, s.rgrid.size + 1, 20):
            sl = s.sweep.slices[i]
            bd = gamma_boundary_derivatives(sl, 1)
            top = max(top, float(np.max(np.abs(compute_a_coeffs(bd.c, bd.d, 1, sl.r, LAM)))))
        assert top / (L / (1 - delta)) <= 0.25


def test_two_remainder_formulas(solved_gauss):
    s = solved_gauss
    for i in (40, 200, 400):
        for k in (1, 2):
            rem = compute_remainder(s.sweep.slices[i], k, LAM, s.w, check_window=20.0)
            assert rem.discrepancy <= 1e-6


def test_alpha_reconstruction(solved_bump):
    s = solved_bump
    A = extract_A(s.sweep)
    acc_H0 = 0.1 / np.pi
    al = alpha_decomposition(A, acc_H0, s.rgrid.step)
    assert al.alpha_inf[0] == pytest.approx(1j * 0.1 / np.pi)
    for i in (40, 200, 400):
        sl = s.sweep.slices[i]
        bd = gamma_boundary_derivatives(sl, 1)
        a1 = compute_a_coeffs(bd.c, bd.d, 1, sl.r, LAM)
        rec = np.exp(1j * LAM * sl.r) * al.alpha_inf[i] + al.alpha_2[i]
        assert np.max(np.abs(a1 - rec)) < 1e-8


def test_regularity_guard(solved_bump):
    w = make_weight("logtail:a=1.5,b=0,delta=0.2")
    assert moment_certified(w, 0) and not moment_certified(w, 1)
    assert moment_certified(make_weight("logtail:a=3.5,b=0,delta=0.2"), 2)
    with pytest.raises(RegularityNotCertified):
        compute_remainder(solved_bump.sweep.slices[40], 1, LAM, w)
