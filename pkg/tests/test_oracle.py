import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _cache
from laxbalance import FVConfig, godunov_flux, l1_distance, run_oracle
from laxbalance.flux import FluxModel
from laxbalance.solver import SolutionField

BURGERS = FluxModel.burgers()
SHIFTED = FluxModel.shifted_quadratic(1.0, 60.0)


def test_godunov_flux_examples():
    assert godunov_flux(1.0, 0.0, BURGERS) == pytest.approx(0.5)
    assert godunov_flux(-1.0, 1.0, BURGERS) == pytest.approx(0.0)
    assert godunov_flux(10.0, 20.0, SHIFTED) == pytest.approx(800.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_godunov_flux_is_the_exact_riemann_flux(a, b):
    # min of f over [a, b] if a <= b, max over [b, a] otherwise
    grid = np.linspace(min(a, b), max(a, b), 2001)
    expected = BURGERS.f(grid).min() if a <= b else BURGERS.f(grid).max()
    assert godunov_flux(a, b, BURGERS) == pytest.approx(expected, abs=1e-5)
    assert godunov_flux(a, a, BURGERS) == pytest.approx(BURGERS.f(a))


def test_zero_problem_stays_zero():
    fld = run_oracle(_cache.problem("zero"), FVConfig(cells=50, output_times=(0.5, 1.0)))
    assert np.all(fld.u == 0.0)


def test_boundary_riemann_shock_position():
    fld = run_oracle(_cache.problem("burgers-boundary"), FVConfig(cells=400, output_times=(1.0,)))
    dx = fld.xs[1] - fld.xs[0]
    crossing = fld.xs[np.argmin(np.abs(fld.u[0] - 0.5))]
    assert abs(crossing - 0.5) <= dx


def test_amplified_constant_region():
    fld = run_oracle(_cache.problem("amplified-constant"), FVConfig(cells=200, output_times=(1.0,)))
    region = fld.xs > np.e - 1 + 0.2
    assert np.allclose(fld.u[0][region], np.e, atol=1e-2)


def _fake(xs, u):
    u = np.atleast_2d(u)
    nan = np.full(u.shape, np.nan)
    return SolutionField(xs, np.array([1.0]), u, nan, np.full(u.shape, -1), nan, nan, nan, nan, nan)


def test_l1_distance_definitions():
    xs = (np.arange(100) + 0.5) / 100
    a = _fake(xs, np.where(xs < 0.5, 1.0, 0.0))
    b = _fake(xs, np.where(xs < 0.51, 1.0, 0.0))
    assert l1_distance(a, a) == 0.0
    assert l1_distance(a, b) == pytest.approx(0.01)
    assert l1_distance(a, b, relative=True) == pytest.approx(0.01 / 0.51)
    with pytest.raises(ValueError):
        l1_distance(a, b, region=(0.0, 2.0))


def test_refinement_decreases_distance():
    p = _cache.problem("amplified-constant")
    ref = run_oracle(p, FVConfig(cells=800, output_times=(0.5,)))
    d = [l1_distance(ref, run_oracle(p, FVConfig(cells=n, output_times=(0.5,)))) for n in (50, 100, 200)]
    assert d[2] < d[1] < d[0]


def test_config_validation_and_cfl_warning():
    with pytest.raises(ValueError):
        FVConfig(cells=1)
    with pytest.raises(ValueError):
        FVConfig(cfl=1.5)
    p = _cache.problem("burgers-boundary")
    with pytest.raises(ValueError):
        run_oracle(p, FVConfig(cells=20, output_times=(5.0,)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run_oracle(p, FVConfig(cells=20, output_times=(0.5,), dt=1.0))
    assert any("CFL" in str(w.message) for w in caught)
