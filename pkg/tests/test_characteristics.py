import numpy as np
import pytest

import _cache
from laxbalance import (
    PiecewisePolynomial,
    Problem,
    SourceModel,
    build_table,
    build_triangle,
    char_speed,
    check_triangle_lemma,
    entropy_check,
    monotonicity_check,
    non_intersection_check,
    trace,
)
from laxbalance.characteristics import entropy_margins, speed_info, triangles_at_level
from laxbalance.flux import FluxModel


def fan_problem():
    """Interior state 1 against boundary state 0: a centred fan from the corner."""
    return Problem(FluxModel.burgers(), SourceModel.zero(2.0), PiecewisePolynomial.constant(1.0),
                   PiecewisePolynomial.constant(0.0), 4.0)


def test_speeds_around_the_riemann_shock():
    p, tb = _cache.problem("burgers-riemann"), _cache.table("burgers-riemann")
    assert char_speed(1.5, 1.0, p, tb) == pytest.approx(0.5, abs=1e-6)
    assert char_speed(1.0, 1.0, p, tb) == pytest.approx(1.0, abs=1e-6)
    assert char_speed(2.5, 1.0, p, tb) == pytest.approx(0.0, abs=1e-6)


def test_corner_fan_speed():
    p = fan_problem()
    tb = build_table(p, 256)
    info = speed_info(p, tb, [0.3], 1.0)
    assert info.case[0] == "iv"
    assert info.speed[0] == pytest.approx(0.3, abs=1e-6)


def test_trace_in_amplified_region():
    p, tb = _cache.problem("amplified-constant"), _cache.table("amplified-constant")
    curve = trace(2.0, 0.2, 0.8, 0.01, p, tb, method="midpoint")
    exact = 2.0 + np.exp(curve.ts) - np.exp(0.2)
    assert curve.complete and np.max(np.abs(curve.xs - exact)) < 1e-4


def test_trace_constant_field_is_vertical_line():
    p, tb = _cache.problem("zero"), _cache.table("zero")
    curve = trace(1.0, 0.5, 1.5, 0.1, p, tb)
    assert np.allclose(curve.xs, 1.0)


def test_trace_follows_shock():
    p, tb = _cache.problem("burgers-boundary"), _cache.table("burgers-boundary")
    curve = trace(0.5, 1.0, 1.6, 0.05, p, tb)
    assert np.max(np.abs(curve.xs - curve.ts / 2)) < 0.05


def test_trace_validation():
    p, tb = _cache.problem("zero"), _cache.table("zero")
    with pytest.raises(ValueError):
        trace(1.0, 1.0, 0.5, 0.1, p, tb)
    with pytest.raises(ValueError):
        trace(1.0, 0.5, 1.0, 0.1, p, tb, method="rk4")


def test_triangle_shapes():
    p, tb = _cache.problem("burgers-riemann"), _cache.table("burgers-riemann")
    smooth = build_triangle(2.5, 1.0, p, tb)
    assert smooth.sigma_right - smooth.sigma_left < 1e-6
    shock = build_triangle(1.5, 1.0, p, tb)
    assert shock.case == "initial"
    assert shock.sigma_left == pytest.approx(0.5, abs=1e-4) and shock.sigma_right == pytest.approx(1.5, abs=1e-4)
    th, lo, hi = shock.polylines(p)
    assert np.all(lo <= hi + 1e-12)
    pb, tbb = _cache.problem("burgers-boundary"), _cache.table("burgers-boundary")
    tri = build_triangle(0.2, 1.0, pb, tbb)
    assert tri.case == "boundary" and tri.sigma_left < 0


def test_triangle_lemma_and_negative_control():
    p, tb = _cache.problem("zero"), _cache.table("zero")
    assert check_triangle_lemma(p, tb, 1.0, np.linspace(0.0, 4.0, 41)).passed
    pr, tbr = _cache.problem("burgers-riemann"), _cache.table("burgers-riemann")
    xs = np.linspace(0.0, 4.0, 81)
    tris = triangles_at_level(pr, tbr, xs, 1.0)
    rng = np.random.default_rng(2)
    shuffled = [tris[i] for i in rng.permutation(len(tris))]
    assert not check_triangle_lemma(pr, tbr, 1.0, xs, triangles=shuffled).passed


def test_entropy_margins_and_control():
    flux = FluxModel.burgers()
    left, right, s = entropy_margins(flux, 1.0, 0.0)
    assert s == pytest.approx(0.5) and left > 0 and right > 0
    left, right, _ = entropy_margins(flux, 0.0, 1.0)
    assert min(left, right) < 0
    fld = _cache.field("burgers-riemann", 200, 4)
    assert entropy_check(fld, _cache.problem("burgers-riemann")) == []


def test_structure_checks_pass_on_small_grids():
    for name in ("zero", "burgers-boundary"):
        p, tb = _cache.problem(name), _cache.table(name)
        xs = np.linspace(0.0, p.x_max, 16)
        ts = np.linspace(0.0, p.t_max, 5)[1:]
        assert monotonicity_check(p, tb, xs, ts).passed
        assert non_intersection_check(p, tb, xs, ts).passed
