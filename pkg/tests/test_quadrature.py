import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krein.errors import NonIntegrable
from krein.quadrature import composite_rule, gauss_legendre01, local_exponent, panel_rule


def test_gauss_legendre_exact_on_polynomials():
    x, w = gauss_legendre01(8)
    for k in range(16):
        assert np.sum(w * x**k) == pytest.approx(1 / (k + 1), rel=1e-13)


def test_panel_rule_splits():
    r = panel_rule(-1.0, 2.0, n_panels=3)
    assert r.integrate(lambda b, o: np.cos(b + o)) == pytest.approx(np.sin(2) + np.sin(1), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 1.5))
def test_endpoint_power_singularity(beta):
    g = lambda b, o: np.abs(b + o) ** beta
    rule = composite_rule(0.0, 1.0, singular_points=(0.0,), g=g, panels_per_unit=2)
    assert rule.integrate(g) == pytest.approx(1 / (beta + 1), rel=1e-9)


def test_interior_singularity_with_oscillation():
    g = lambda b, o: np.abs(b + o) ** -0.5 * np.cos(b + o)
    rule = composite_rule(-1.0, 1.0, singular_points=(0.0,), g=g, panels_per_unit=4)
    # 2 int_0^1 t^(-1/2) cos t dt = 2 sqrt(2 pi) C(sqrt(2/pi))
    from scipy.special import fresnel
    exact = 2 * np.sqrt(2 * np.pi) * fresnel(np.sqrt(2 / np.pi))[1]
    assert rule.integrate(g) == pytest.approx(exact, rel=1e-9)


def test_breakpoint_jump_is_exact():
    g = lambda b, o: np.where(b + o < 0.3, 1.0, 2.0)
    rule = composite_rule(0.0, 1.0, breakpoints=(0.3,), g=g)
    assert rule.integrate(g) == pytest.approx(0.3 + 1.4, rel=1e-14)


def test_local_exponent_and_guard():
    g = lambda b, o: np.abs(o) ** -0.7
    assert local_exponent(g, 0.0, 1e-6, 1.0) == pytest.approx(-0.7)
    bad = lambda b, o: np.abs(o) ** -1.2
    with pytest.raises(NonIntegrable):
        composite_rule(0.0, 1.0, singular_points=(0.0,), g=bad).integrate(bad)
