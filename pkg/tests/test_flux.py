import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laxbalance.flux import FluxError, FluxModel

SHIFTED = FluxModel.shifted_quadratic(1.0, 60.0)
BURGERS = FluxModel.burgers()
QUARTIC = FluxModel.polynomial([0, 0, 0, 0, 0.25])
QUARTIC_PLUS = FluxModel.polynomial([0, 0, 0.5, 0, 0.25])

finite = st.floats(-50, 50, allow_nan=False)


@pytest.mark.parametrize("flux,u,expected", [(SHIFTED, 60.0, 0.0), (SHIFTED, 0.0, 1800.0), (BURGERS, 3.0, 4.5)])
def test_flux_values(flux, u, expected):
    assert flux.f(u) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("flux,s,expected", [(SHIFTED, 0.0, 60.0), (BURGERS, 3.0, 3.0), (QUARTIC, 8.0, 2.0)])
def test_derivative_inverse(flux, s, expected):
    assert flux.fprime_inverse(s) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("flux,p,expected", [(SHIFTED, 1.0, 60.5), (BURGERS, 0.0, 0.0), (QUARTIC, 1.0, 0.75)])
def test_convex_dual(flux, p, expected):
    assert flux.legendre_dual(p) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("flux,expected", [(SHIFTED, 60.0), (BURGERS, 0.0), (QUARTIC_PLUS, 0.0)])
def test_sonic_point(flux, expected):
    assert flux.lambda_f == pytest.approx(expected, abs=1e-9)
    assert abs(flux.fprime(flux.lambda_f)) <= 1e-9


@pytest.mark.parametrize("coeffs", [[0, 0, 0, 1], [0, 0, -1], [0, 1], [0, 0, -1, 0, 1]])
def test_rejects_non_convex_or_sublinear(coeffs):
    with pytest.raises(FluxError):
        FluxModel.polynomial(coeffs)


def test_config_round_trip():
    for flux in (SHIFTED, QUARTIC):
        again = FluxModel.from_config(flux.to_config())
        u = np.linspace(-5, 5, 11)
        assert np.allclose(again.f(u), flux.f(u))
    with pytest.raises(FluxError):
        FluxModel.from_config({"family": "cubic"})


@settings(max_examples=60, deadline=None)
@given(finite, finite)
def test_derivative_strictly_increasing_and_midpoint_convex(a, b):
    for flux in (SHIFTED, QUARTIC_PLUS):
        if b - a > 1e-6:
            assert flux.fprime(a) < flux.fprime(b)
        if abs(a - b) > 1e-6:
            assert flux.f(0.5 * (a + b)) < 0.5 * (flux.f(a) + flux.f(b))


@settings(max_examples=60, deadline=None)
@given(st.floats(-200, 200, allow_nan=False))
def test_inverse_round_trip_closed_and_numeric(s):
    for flux in (SHIFTED, QUARTIC_PLUS):
        u = flux.fprime_inverse(s)
        assert flux.fprime(u) == pytest.approx(s, abs=1e-7 * (1 + abs(s)))
    assert SHIFTED.fprime_inverse(s, numeric=True) == pytest.approx(SHIFTED.fprime_inverse(s), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20, allow_nan=False), st.floats(-20, 20, allow_nan=False))
def test_dual_identity_and_young_inequality(p, v):
    for flux in (SHIFTED, QUARTIC_PLUS):
        # f*(f'(p)) = p f'(p) - f(p) and f*(q) >= q v - f(v)
        q = flux.fprime(p)
        assert flux.legendre_dual(q) == pytest.approx(flux.dual_of_derivative(p), rel=1e-9, abs=1e-7)
        assert flux.legendre_dual(q) >= q * v - flux.f(v) - 1e-7 * (1 + abs(q * v))


def test_vector_and_scalar_shapes():
    assert isinstance(BURGERS.f(2.0), float)
    assert BURGERS.f(np.array([1.0, 2.0])).shape == (2,)
    assert BURGERS.max_speed(3.0) == pytest.approx(3.0)
