import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krein.errors import BadSpec, NonIntegrable
from krein.harmonic import LambdaGrid
from krein.weights import (a2_characteristic, bmo_estimate, bump_weight, decompose_deviation, gauss_weight,
                           make_weight, power_weight, tail_bound, weight_gap_norm)


def test_constant_weight():
    w = make_weight("const:c=1")
    assert w.is_constant and w.singular_points == ()
    assert np.all(w(np.linspace(-5, 5, 11)) == 1)


def test_power_weight_values():
    w = power_weight(0.5)
    assert w(np.array([0.25]))[0] == pytest.approx(0.5)
    assert w(np.array([2.0]))[0] == 1.0
    assert w.singular_points == (0.0,)


def test_bump_values_and_nodal_average():
    w = bump_weight(0.1)
    assert w(np.array([0.0, 3.0])) == pytest.approx([1.1, 1.0])
    assert w.nodal(np.array([1.0, -1.0])) == pytest.approx([1.05, 1.05])


def test_product_spec():
    w = make_weight("prod:[power:beta=0.3;bump:delta=0.2,a=2,b=3]")
    assert w(np.array([2.5]))[0] == pytest.approx(1.2)
    assert w.breakpoints[-2:] == (2.0, 3.0)


@pytest.mark.parametrize("spec", ["bump:delta=0.1,a=1,b=0", "power:beta=1.2", "nope:x=1", "bump:delta=x,a=0,b=1",
                                  "bump:delta=-1.5,a=0,b=1", "const:c=-1", "prod:[]"])
def test_bad_specs(spec):
    with pytest.raises(BadSpec):
        make_weight(spec)


def test_a2_constant():
    assert a2_characteristic(make_weight("const:c=3")).value == pytest.approx(1.0)


def test_a2_bump_closed_form():
    delta = 0.2
    exact = (2 + delta) ** 2 / (4 * (1 + delta))
    assert exact == pytest.approx(1.00833, abs=1e-5)
    assert abs(a2_characteristic(bump_weight(delta)).value - exact) < 1e-3


def test_a2_power_blows_up():
    assert a2_characteristic(power_weight(0.9), depth=6).value > 5


def test_a2_rejects_nonintegrable_dual():
    with pytest.raises(NonIntegrable):
        a2_characteristic(power_weight(0.9), p=1.5)


def test_decompose_deviation():
    g = LambdaGrid(16.0, 1024)
    d = decompose_deviation(make_weight("const:c=1"), g)
    assert d.norms == (0.0, 0.0)
    d = decompose_deviation(bump_weight(0.5), g)
    assert np.all(d.u1.values == 0)
    assert d.norms[1] == pytest.approx(0.5 * math.sqrt(2), rel=1e-10)
    with pytest.raises(NonIntegrable):
        decompose_deviation(power_weight(-0.5), g)
    d = decompose_deviation(make_weight("power:beta=-0.5", (1.0, 2.0)), g)
    lam = d.u1.grid.nodes
    support = lam[d.u1.values != 0]
    assert support.size and np.max(np.abs(support)) < 0.25


def test_gap_norm_closed_form():
    assert weight_gap_norm(make_weight("const:c=1"), 2, 2) == 0
    d = 0.2
    exact = abs((1 + d) ** 0.5 - (1 + d) ** -0.5) * math.sqrt(2)
    assert exact == pytest.approx(0.2582, abs=1e-4)
    assert weight_gap_norm(bump_weight(d), 2, 2) == pytest.approx(exact, rel=1e-10)


def test_gap_norm_linear_in_delta():
    ds = np.logspace(-3, -1, 5)
    ys = [weight_gap_norm(bump_weight(d), 2, 2) for d in ds]
    slope = np.polyfit(np.log(ds), np.log(ys), 1)[0]
    assert abs(slope - 1) <= 0.05


def test_bmo():
    assert bmo_estimate(make_weight("const:c=2")) < 1e-10
    for beta in (0.5, -0.5):
        est = bmo_estimate(power_weight(beta), depth=8)
        assert abs(beta) / 4 <= est <= abs(beta)
    for d in (0.05, 0.1, 0.2):
        w = bump_weight(d)
        tau = a2_characteristic(w).value - 1
        assert bmo_estimate(w) <= 2 * math.sqrt(tau)


def test_tail_bound():
    assert tail_bound(bump_weight(0.3), 10.0) == 0
    w = gauss_weight(0.5)
    assert tail_bound(w, 1.0) == pytest.approx(0.5 * math.sqrt(2 * math.pi) * math.erfc(1 / math.sqrt(2)), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 2.0), st.floats(-3, 3), st.floats(0.1, 4))
def test_bump_spec_round_trip(delta, a, width):
    w = bump_weight(delta, a, a + width)
    again = make_weight(w.spec)
    lam = np.linspace(a - 1, a + width + 1, 37)
    assert np.array_equal(w(lam), again(lam))
