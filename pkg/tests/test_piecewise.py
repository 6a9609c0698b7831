import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laxbalance.piecewise import PiecewisePolynomial


def test_constant_and_steps():
    c = PiecewisePolynomial.constant(2.0)
    assert c(5.0) == 2.0 and c.antiderivative(3.0) - c.antiderivative(0.0) == pytest.approx(6.0)
    step = PiecewisePolynomial.piecewise_constant([0.0, 1.0], [1.0, 0.0])
    assert step(0.5) == 1.0 and step(1.5) == 0.0
    assert step.antiderivative(4.0) - step.antiderivative(0.0) == pytest.approx(1.0, abs=0)
    assert step.is_piecewise_constant


def test_validation():
    with pytest.raises(ValueError):
        PiecewisePolynomial(np.array([0.0, 0.0]), ([1.0], [2.0]))
    with pytest.raises(ValueError):
        PiecewisePolynomial(np.array([0.0]), ([1.0], [2.0]))
    with pytest.raises(ValueError):
        PiecewisePolynomial(np.array([0.0]), ([np.nan],))


def test_config_round_trip():
    pp = PiecewisePolynomial(np.array([0.0, 1.0]), ([1.0, 2.0], [0.0, 0.0, 3.0]))
    again = PiecewisePolynomial.from_config(pp.to_config())
    xs = np.linspace(0, 3, 13)
    assert np.allclose(again(xs), pp(xs))
    assert PiecewisePolynomial.from_config(4.0)(1.0) == 4.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=5), st.floats(0, 6), st.floats(0, 6))
def test_antiderivative_matches_fine_quadrature(values, a, b):
    breaks = np.arange(len(values), dtype=float)
    pp = PiecewisePolynomial.piecewise_constant(breaks, values)
    lo, hi = min(a, b), max(a, b)
    xs = np.linspace(lo, hi, 20001)
    exact = pp.antiderivative(hi) - pp.antiderivative(lo)
    mids = 0.5 * (xs[1:] + xs[:-1])
    approx = float(np.sum(pp(mids) * np.diff(xs)))
    assert exact == pytest.approx(approx, abs=1e-3 * (1 + max(map(abs, values))))
