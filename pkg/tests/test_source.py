import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laxbalance.source import HorizonError, SourceModel, integrate

CUBIC = SourceModel.preset("example-1-1", 5.0)
OSC = SourceModel.preset("example-1-2", 1.0 / np.pi)


def test_beta_examples():
    assert SourceModel.zero(3.0).beta(2.5) == 0.0
    assert SourceModel.constant(1.0, 3.0).beta(2.0) == pytest.approx(2.0)
    # the cubic argument at t=5 is 110, so beta(5) = ln(110/10)
    assert CUBIC.beta(5.0) == pytest.approx(np.log(11.0), abs=1e-12)


def test_cubic_source_closed_form_matches_quadrature():
    quad = SourceModel(CUBIC.alpha_fn, 5.0, use_closed_form=False)
    ts = np.linspace(0, 5, 41)
    assert np.allclose(quad.beta(ts), CUBIC.beta(ts), atol=1e-9)


def test_integrate_examples():
    assert integrate(lambda t: np.ones_like(t), 0.0, 3.0) == pytest.approx(3.0, abs=1e-12)
    assert integrate(lambda t: t, 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)
    s = SourceModel.constant(1.0, 2.0)
    assert integrate(lambda t: np.exp(-s.beta(t)), 0.0, 1.0) == pytest.approx(1 - np.exp(-1), abs=1e-10)


def test_moments_against_closed_form():
    s = SourceModel.constant(1.0, 2.0)
    assert s.moment(1, 1.0) == pytest.approx(np.e - 1, abs=1e-12)
    assert s.moment_between(2, 0.0, 1.0) == pytest.approx((np.e**2 - 1) / 2, abs=1e-12)
    ts = np.linspace(0, 1.0 / np.pi, 9)
    for k in (-1, 1, 2):
        ref = [integrate(lambda th: np.exp(k * OSC.beta(th)), 0.0, t, tol=1e-12) for t in ts]
        assert np.allclose(OSC.moment(k, ts), ref, atol=1e-10)


def test_horizon_and_validation():
    s = SourceModel.constant(1.0, 2.0)
    with pytest.raises(HorizonError):
        s.beta(-1.0)
    with pytest.raises(HorizonError):
        s.beta(3.0)
    with pytest.raises(ValueError):
        SourceModel.table([0.0, 0.0], [1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        SourceModel.from_config({"kind": "mystery"}, 1.0)


def test_table_source_is_piecewise_linear():
    s = SourceModel.table([0.0, 1.0, 2.0], [0.0, 2.0, 2.0], 2.0)
    assert s.alpha(0.5) == pytest.approx(1.0)
    assert s.beta(2.0) == pytest.approx(1.0 + 2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5))
def test_beta_lipschitz_and_range(a, b):
    lo, hi = min(a, b), max(a, b)
    for s in (CUBIC, SourceModel.constant(-0.7, 5.0)):
        assert abs(s.beta(hi) - s.beta(lo)) <= s.alpha_inf_norm * (hi - lo) + 1e-12
        bl, bh = s.beta_range(np.array([lo]), np.array([hi]))
        samples = s.beta(np.linspace(lo, hi, 101))
        assert bl[0] <= samples.min() + 1e-12 and bh[0] >= samples.max() - 1e-12


def test_beta_starts_at_zero_and_is_continuous():
    for s in (CUBIC, OSC):
        assert s.beta(0.0) == 0.0
        assert np.all(np.abs(np.diff(s.beta_nodes)) <= s.alpha_inf_norm * np.diff(s.grid) + 1e-12)
