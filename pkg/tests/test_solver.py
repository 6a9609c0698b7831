import numpy as np
import pytest

import _cache
from laxbalance import PiecewisePolynomial, Problem, SourceModel, build_table, solve_grid, solve_point, weak_residual
from laxbalance.flux import FluxModel
from laxbalance.solver import Bump, boundary_trace, confirm_jump, detect_jumps, jump_threshold, random_bumps, solve_level


def rarefaction_problem():
    u0 = PiecewisePolynomial.piecewise_constant([0.0, 1.0], [0.0, 1.0])
    return Problem(FluxModel.burgers(), SourceModel.zero(2.0), u0, PiecewisePolynomial.constant(0.0), 4.0)


def test_zero_field():
    fld = _cache.field("zero", 40, 4)
    assert np.max(np.abs(fld.u)) <= 1e-12 and not fld.jumps and not fld.failures


def test_boundary_riemann_profile():
    p, tb = _cache.problem("burgers-boundary"), _cache.table("burgers-boundary")
    xs = np.linspace(0.0, 1.0, 201)
    lv = solve_level(p, tb, xs, 1.0)
    assert np.allclose(lv.u[xs < 0.49], 1.0, atol=1e-6)
    assert np.allclose(lv.u[xs > 0.51], 0.0, atol=1e-6)
    jumps = detect_jumps(xs, lv.u, lv.W, 1.0)
    assert len(jumps) == 1 and abs(jumps[0].x_jump - 0.5) <= xs[1] - xs[0]
    assert boundary_trace(p, tb, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_riemann_single_jump():
    fld = _cache.field("burgers-riemann", 200, 4)
    for j, t in enumerate(fld.ts):
        jumps = fld.level_jumps(j)
        assert len(jumps) == 1
        assert jumps[0].x_jump == pytest.approx(1 + t / 2, abs=fld.xs[1] - fld.xs[0])
        assert jumps[0].u_left == pytest.approx(1.0, abs=1e-6) and jumps[0].u_right == pytest.approx(0.0, abs=1e-6)


def test_rarefaction_fan_has_no_jump():
    p = rarefaction_problem()
    tb = build_table(p, 256)
    xs = np.linspace(0.0, 4.0, 161)
    fld = solve_grid(p, xs, np.array([1.0, 2.0]), tb)
    assert not fld.jumps
    for j, t in enumerate(fld.ts):
        fan = (xs > 1) & (xs < 1 + t)
        assert np.allclose(fld.u[j][fan], (xs[fan] - 1) / t, atol=1e-6)
        assert np.all(np.diff(fld.u[j]) >= -1e-6)


def test_coarse_fan_is_not_confirmed_as_a_jump():
    p = rarefaction_problem()
    tb = build_table(p, 256)
    # one coarse gap spanning most of the fan versus a gap across the Riemann shock
    assert not confirm_jump(p, tb, 1.0, 1.1, 1.9)
    pr, tr = _cache.problem("burgers-riemann"), _cache.table("burgers-riemann")
    assert confirm_jump(pr, tr, 1.0, 1.4, 1.6)


def test_level_values_do_not_depend_on_the_batch():
    # the boundary minimizer sits within 1e-7 t of t at a datum switch time
    p, tb = _cache.problem("example-1-2"), _cache.table("example-1-2", 256)
    t = 1.0 / (2.0 * np.pi)
    alone = solve_level(p, tb, [1e-3], t)
    batched = solve_level(p, tb, [0.0, 1e-3, 0.025], t)
    assert alone.W[0] == batched.W[1] and alone.u[0] == batched.u[1]
    assert boundary_trace(p, tb, t) == pytest.approx(batched.u[0], rel=1e-9)
    assert abs(batched.u[0] - batched.u[2]) <= 1e-3 * abs(batched.u[2])


def test_amplified_state_and_scaled_derivative():
    p, tb = _cache.problem("amplified-constant"), _cache.table("amplified-constant")
    s = solve_point(3.0, 1.0, p, tb)
    assert s.u == pytest.approx(np.e, abs=1e-7) and s.branch == "initial"
    assert s.h_value == pytest.approx(1.0, abs=1e-7)
    xs = np.linspace(2.0, 3.0, 21)
    lv = solve_level(p, tb, xs, 1.0)
    w = np.gradient(lv.W, xs)
    assert np.allclose(w, lv.u * np.exp(-1.0), atol=1e-5)


def test_point_validation():
    p, tb = _cache.problem("zero"), _cache.table("zero")
    with pytest.raises(ValueError):
        solve_point(-1.0, 1.0, p, tb)
    with pytest.raises(ValueError):
        solve_point(1.0, 0.0, p, tb)


def test_boundary_branch_point():
    p, tb = _cache.problem("burgers-boundary"), _cache.table("burgers-boundary")
    s = solve_point(0.2, 1.0, p, tb)
    assert s.branch == "boundary" and s.tau_star_hi is not None and s.y_star_lo is None
    assert s.u == pytest.approx(1.0, abs=1e-6)


def test_jump_threshold_ignores_smooth_ramps():
    xs = np.linspace(0, 1, 101)
    u = xs**2 + np.where(xs > 0.505, -1.0, 0.0)
    thr = jump_threshold(u)
    assert np.sum(np.abs(np.diff(u)) > thr) == 1


def test_bump_support_and_derivatives():
    b = Bump(1.0, 1.0, 0.5, 0.25)
    phi, phi_t, phi_x = b.evaluate(np.array([1.0, 1.6]), np.array([1.0, 1.0]))
    assert phi[0] == pytest.approx(1.0) and phi[1] == 0.0 and phi_x[0] == 0.0 and phi_t[0] == 0.0
    h = 1e-6
    num = (b.evaluate(1.2 + h, 1.1)[0] - b.evaluate(1.2 - h, 1.1)[0]) / (2 * h)
    assert b.evaluate(1.2, 1.1)[2] == pytest.approx(num, rel=1e-5)
    rng = np.random.default_rng(0)
    for bump in random_bumps(rng, 20, (0.0, 4.0), (0.0, 2.0)):
        assert bump.xc - bump.rx >= 0 and bump.xc + bump.rx <= 4.0
        assert bump.tc - bump.rt >= 0 and bump.tc + bump.rt <= 2.0


def test_weak_residual_zero_and_refinement():
    p = _cache.problem("zero")
    bumps = random_bumps(np.random.default_rng(1), 5, (0.0, 4.0), (0.0, 2.0))
    assert weak_residual(_cache.field("zero", 20, 20), p, bumps) == 0.0
    rp = rarefaction_problem()
    tb = build_table(rp, 256)
    res = []
    for n in (25, 50, 100):
        fld = solve_grid(rp, np.linspace(0, 4, n + 1), np.linspace(0, 2, n + 1)[1:], tb)
        res.append(weak_residual(fld, rp, bumps))
    assert res[2] < res[1] < res[0]
