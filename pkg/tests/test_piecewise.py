import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from maxmart.piecewise import PiecewiseFn

FNS = {
    "const": PiecewiseFn.constant(1.5),
    "linear": PiecewiseFn.linear(2.0, -1.0),
    "power3": PiecewiseFn.power(3, 0.5),
    "exp": PiecewiseFn.exponential(1.0),
    "halfnormal": PiecewiseFn.half_normal_density(),
    "indicator": PiecewiseFn.indicator(1.0),
    "window": PiecewiseFn.indicator(0.5, 2.0, closed="right"),
    "step": PiecewiseFn.step([0.0, 1.0, 2.5], [1.0, -2.0, 0.5]),
}


@pytest.mark.parametrize("name", sorted(FNS))
@given(y=st.floats(0.0, 6.0))
def test_primitive_matches_quadrature(name, y):
    fn = FNS[name]
    ref, _ = integrate.quad(lambda u: float(fn(u)), 0.0, y, limit=200,
                            points=[p for p in (0.5, 1.0, 2.0, 2.5) if p < y] or None)
    assert fn.primitive(y) == pytest.approx(ref, abs=1e-9)


def test_indicator_closure():
    left = PiecewiseFn.indicator(1.0)
    right = PiecewiseFn.indicator(1.0, closed="right")
    assert left(1.0) == 1.0 and right(1.0) == 0.0
    assert left(0.999) == 0.0 and right(1.001) == 1.0


def test_densities_integrate_to_one():
    assert PiecewiseFn.exponential(2.0).total_integral() == pytest.approx(1.0)
    assert PiecewiseFn.half_normal_density().total_integral() == pytest.approx(1.0)


def test_exponential_values():
    f = PiecewiseFn.exponential(1.0)
    assert f(0.0) == 1.0
    assert f.primitive(1.0) == pytest.approx(1 - math.exp(-1))


def test_abs_integral_of_signed_step():
    f = PiecewiseFn.step([0.0, 1.0], [1.0, -2.0])
    assert f.abs_integral(2.0) == pytest.approx(3.0)


def test_monotone_check():
    assert PiecewiseFn.indicator(1.0).is_nondecreasing_nonneg(5.0)
    assert not PiecewiseFn.exponential(1.0).is_nondecreasing_nonneg(5.0)


def test_step_table_exact_for_steps():
    f = PiecewiseFn.step([0.0, 1.0, 2.5], [1.0, -2.0, 0.5])
    bx, bv = f.step_table(upto=4.0)
    y = np.linspace(0, 3.9, 97)
    j = np.searchsorted(bx, y, side="right") - 1
    np.testing.assert_array_equal(bv[j], f(y))
