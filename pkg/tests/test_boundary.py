import warnings

import numpy as np
import pytest

import _cache
from laxbalance import PiecewisePolynomial, Problem, SourceModel, build_table, three_piece_value, value
from laxbalance.boundary import (
    FOLLOW,
    LOOP,
    bln_check,
    classify,
    hypothesis_holds,
    path_segments,
)
from laxbalance.flux import FluxModel


def loop_problem():
    """Sonic point 1 with u_b = 0: riding the boundary is free and loops gain from the oscillating source."""
    ts = np.linspace(0, 2, 41)
    src = SourceModel.table(ts, 3 * np.cos(2 * np.pi * ts), 2.0)
    return Problem(FluxModel.shifted_quadratic(1.0, 1.0), src, PiecewisePolynomial.constant(1.0),
                   PiecewisePolynomial.constant(0.0), 4.0)


def test_zero_datum_table():
    tb = _cache.table("zero")
    assert tb.values[0] == 0.0
    assert np.all(tb.values == 0.0)


def test_follow_table_is_minus_half_t():
    tb = _cache.table("burgers-boundary")
    assert np.max(np.abs(tb.values + tb.grid / 2)) <= 1e-9
    assert np.all(tb.provenance[1:] == FOLLOW)
    assert classify(tb, 1.0) == "Type1"
    assert path_segments(tb, 2.0) == [("follow", 0.0, 2.0)]


@pytest.mark.parametrize("name,n", [("amplified-constant", 256), ("example-1-2", 128), ("example-1-1", 128)])
def test_one_sided_bound_and_lipschitz(name, n):
    p = _cache.problem(name)
    tb = build_table(p, n)
    follow = np.diff(np.asarray(p.follow_integral(tb.grid)))
    steps = np.diff(tb.values)
    assert np.all(steps <= -follow + 1e-9 * (1 + np.abs(tb.values[1:])))
    rates = np.abs(steps) / tb.h_b
    assert np.all(np.isfinite(rates))


def test_loops_can_win():
    p = loop_problem()
    tb = build_table(p, 128)
    assert np.any(tb.provenance == LOOP)
    assert classify(tb, 0.5) == "Type2"
    legs = path_segments(tb, 2.0)
    assert legs[0][1] == 0.0 and legs[-1][2] == 2.0
    assert all(a < b for _, a, b in legs)


def test_loop_gains_below_the_running_total_are_kept():
    # the gains are orders of magnitude below one ulp of W(0, t); the compensated totals still see them
    tb = _cache.table("example-1-2", 512)
    assert any(m == "loop" for m, _, _ in path_segments(tb, tb.grid[-1]))


def test_boundary_condition_verdicts():
    p = _cache.problem("zero")
    assert bln_check(0.0, 1.0, p).passed
    assert bln_check(-1.0, 1.0, p).passed
    q = Problem(FluxModel.burgers(), SourceModel.zero(2.0), PiecewisePolynomial.constant(0.0),
                PiecewisePolynomial.constant(2.0), 4.0)
    verdict = bln_check(1.0, 1.0, q)
    assert not verdict.passed and "differs" in verdict.detail
    assert verdict.as_dict()["verdict"] == "fail"


def test_three_piece_matches_value():
    tb0 = _cache.table("zero")
    assert three_piece_value(0.7, 1.0, _cache.problem("zero")) == pytest.approx(0.0, abs=1e-12)
    assert value(0.7, 1.0, _cache.problem("zero"), tb0)[0] == pytest.approx(0.0, abs=1e-12)
    p, tb = _cache.problem("burgers-boundary"), _cache.table("burgers-boundary")
    assert three_piece_value(0.25, 1.0, p) == pytest.approx(value(0.25, 1.0, p, tb)[0], abs=3 * p.tol.val_tol)


def test_three_piece_hypothesis():
    for name in ("zero", "burgers-riemann", "burgers-boundary", "amplified-constant"):
        assert hypothesis_holds(_cache.problem(name))
    assert not hypothesis_holds(_cache.problem("example-1-2"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        three_piece_value(0.1, 0.2, _cache.problem("example-1-2"), n_t=64)
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_table_queries():
    tb = build_table(_cache.problem("burgers-boundary"), 8)
    assert tb.size == 8 and tb.h_b == pytest.approx(0.25)
    assert tb.interp(0.125) == pytest.approx(-0.0625)
    with pytest.raises(ValueError):
        tb.interp(3.0)
    with pytest.raises(ValueError):
        tb.node_index(0.1)
    rows = list(tb.rows())
    assert rows[0][2] == "origin" and rows[1][2] == "follow"
    with pytest.raises(ValueError):
        build_table(_cache.problem("zero"), 0)
