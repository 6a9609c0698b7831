"""Initial and boundary functionals, their constrained minimization, and W."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flux import FluxModel
from .hcurve import CurveKernel, golden_minimize
from .piecewise import PiecewisePolynomial
from .source import SourceModel, integrate_panels, open_cells

INITIAL, BOUNDARY, TIE = 0, 1, 2
BRANCH_NAMES = {INITIAL: "initial", BOUNDARY: "boundary", TIE: "tie"}


class InfeasibleError(RuntimeError):
    """Neither functional has an admissible candidate."""


@dataclass(frozen=True)
class Tolerances:
    val_tol: float = 1e-7
    eps_adm: float = 1e-8
    arg_tol: float = 1e-5
    tol_bln: float = 1e-4
    entropy_tol: float = 1e-4
    scan_cells: int = 2048
    adm_samples: int = 256
    max_basins: int = 6
    admissibility: str = "containment"

    def __post_init__(self):
        for name in ("val_tol", "eps_adm", "arg_tol", "tol_bln", "entropy_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")
        if self.scan_cells < 16:
            raise ValueError("scan_cells must be at least 16")
        if self.admissibility not in ("containment", "strict"):
            raise ValueError("admissibility mode is 'containment' or 'strict'")

    def band(self, w):
        return self.val_tol * (1.0 + np.abs(w))


@dataclass(frozen=True, eq=False)
class Problem:
    """Flux, source and data of the quarter-plane problem."""

    flux: FluxModel
    source: SourceModel
    u0: PiecewisePolynomial
    ub: PiecewisePolynomial
    x_max: float
    name: str = "custom"
    tol: Tolerances = field(default_factory=Tolerances)
    kernel: CurveKernel = field(init=False, repr=False)

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        object.__setattr__(self, "kernel", CurveKernel(self.flux, self.source))
        lam = self.flux.lambda_f
        u0_norm = self.u0.sup_norm(0.0, self.x_max + 1.0)
        ub_bar_norm = max(abs(lam), self.ub.sup_norm(0.0, self.t_max))
        beta_abs = float(np.abs(self.source.beta_nodes).max()) + 0.5 * self.source.alpha_inf_norm * self.t_max / self.source.cells
        object.__setattr__(self, "u0_norm", u0_norm)
        object.__setattr__(self, "ub_bar_norm", ub_bar_norm)
        object.__setattr__(self, "beta_abs", beta_abs)
        scale = np.exp(beta_abs)
        u_init = max(u0_norm, abs(lam)) * scale
        u_all = max(u0_norm, ub_bar_norm, abs(lam)) * scale
        object.__setattr__(self, "initial_speed_bound", self.flux.max_speed(u_init))
        object.__setattr__(self, "speed_bound", self.flux.max_speed(u_all))
        self._build_follow_table()

    @property
    def t_max(self) -> float:
        return self.source.t_max

    def ub_bar(self, t):
        out = np.maximum(self.ub(np.asarray(t, dtype=float)), self.flux.lambda_f)
        return float(out) if np.ndim(t) == 0 else out

    def U0(self, y):
        return self.u0.antiderivative(y) - self.u0.antiderivative(0.0)

    def _follow_integrand(self, theta):
        return self.flux.f(self.ub_bar(theta)) * np.exp(-self.source.beta(theta))

    def _build_follow_table(self):
        cuts = self.ub.interior_breaks
        cuts = cuts[(cuts > 0) & (cuts < self.t_max)]
        grid = np.union1d(self.source.grid, cuts)
        grid = grid[np.concatenate([[True], np.diff(grid) > 1e-13 * self.t_max])]
        grid[-1] = self.t_max
        lo, hi = open_cells(grid[:-1], grid[1:])
        cells = integrate_panels(self._follow_integrand, lo, hi, self.source.tol_quad / grid.size)
        object.__setattr__(self, "_follow_grid", grid)
        object.__setattr__(self, "_follow_nodes", np.concatenate([[0.0], np.cumsum(cells)]))

    def follow_integral(self, t):
        """``integral_0^t f(ub_bar) e^-beta``."""
        arr = np.asarray(t, dtype=float)
        flat = np.clip(arr.ravel(), 0.0, self.t_max)
        g = self._follow_grid
        idx = np.clip(np.searchsorted(g, flat, side="right") - 1, 0, g.size - 1)
        lo, hi = open_cells(g[idx], flat)
        hi = np.maximum(hi, lo)
        tail = integrate_panels(self._follow_integrand, lo, hi, self.source.tol_quad)
        out = (self._follow_nodes[idx] + tail).reshape(arr.shape)
        return float(out) if np.ndim(t) == 0 else out

    def follow_cost(self, a, b):
        """Action of riding the boundary from ``a`` to ``b``: ``-integral f(ub_bar) e^-beta``."""
        return -(np.asarray(self.follow_integral(b)) - np.asarray(self.follow_integral(a)))

    def with_tolerances(self, **changes) -> "Problem":
        from dataclasses import replace

        return Problem(self.flux, self.source, self.u0, self.ub, self.x_max, self.name, replace(self.tol, **changes))


@dataclass
class MinimizationResult:
    value: float
    minimizer_lo: float
    minimizer_hi: float
    branch: str
    candidates: list
    feasible: bool = True


@dataclass
class RowMinimum:
    """Row-wise minimization output (one row per query point)."""

    value: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    feasible: np.ndarray
    cand_row: np.ndarray
    cand_arg: np.ndarray
    cand_val: np.ndarray

    def result(self, i: int, branch: str) -> MinimizationResult:
        sel = self.cand_row == i
        cands = sorted(zip(self.cand_arg[sel].tolist(), self.cand_val[sel].tolist()))
        return MinimizationResult(
            float(self.value[i]), float(self.lo[i]), float(self.hi[i]), branch, cands, bool(self.feasible[i])
        )

    def take(self, rows: np.ndarray) -> "RowMinimum":
        rows = np.asarray(rows)
        remap = -np.ones(self.value.size, dtype=int)
        remap[rows] = np.arange(rows.size)
        keep = np.isin(self.cand_row, rows)
        return RowMinimum(
            self.value[rows], self.lo[rows], self.hi[rows], self.feasible[rows],
            remap[self.cand_row[keep]], self.cand_arg[keep], self.cand_val[keep],
        )


def _admissible(kernel, y0, x_lo, t_lo, t_hi, floor, cost, samples, brange=None, margin_band=None):
    """Admissibility mask, sampling only curves that could matter.

    Curves whose speed sign is fixed are decided exactly; curves that may
    turn around are sampled only when their cost is not already beaten by a
    certified-admissible entry of the same row.
    """
    x_min, _, amb = kernel.monotone_minimum(y0, x_lo, t_lo, t_hi, brange=brange)
    ok = (x_min >= floor) & ~amb
    if not amb.any():
        return ok
    # 1-D inputs are independent points, 2-D inputs are rows of one query each
    as_rows = (lambda v: v.reshape(-1, 1)) if amb.ndim == 1 else (lambda v: v)
    cost2 = as_rows(np.broadcast_to(cost, amb.shape))
    ok2 = as_rows(ok)
    amb2 = as_rows(amb)
    known = np.where(ok2, cost2, np.inf).min(axis=1, keepdims=True)
    band = margin_band if margin_band is not None else 1e-6
    slack = 10.0 * band * (1.0 + np.abs(np.where(np.isfinite(known), known, 0.0)))
    need = amb2 & np.isfinite(cost2) & (cost2 <= known + slack)
    if need.any():
        B = lambda v: np.broadcast_to(np.asarray(v, dtype=float), amb.shape).reshape(amb2.shape)[need]
        xm, _ = kernel.sampled_minimum(B(y0), B(x_lo), B(t_lo), B(t_hi), samples, floor=B(floor))
        ok2 = ok2.copy()
        ok2[need] = xm >= B(floor)
    return ok2.reshape(ok.shape)


def _minimize_rows(G, V, evaluate, tol: Tolerances) -> RowMinimum:
    """Scan + per-basin golden polish; extreme minimizers from the tolerance band."""
    n, m = V.shape
    finite = np.isfinite(V)
    rowmin = np.where(finite.any(axis=1), np.where(finite, V, np.inf).min(axis=1), np.inf)
    feasible = np.isfinite(rowmin)
    inf_col = np.full((n, 1), np.inf)
    Vl = np.concatenate([inf_col, V[:, :-1]], axis=1)
    Vr = np.concatenate([V[:, 1:], inf_col], axis=1)
    is_min = finite & (V <= Vl) & (V <= Vr)
    with np.errstate(invalid="ignore"):
        dl = np.where(np.isfinite(Vl), np.abs(V - Vl), 0.0)
        dr = np.where(np.isfinite(Vr), np.abs(V - Vr), 0.0)
        score = V - np.maximum(dl, dr)
    band = tol.band(np.where(feasible, rowmin, 0.0))
    accept = is_min & (score <= (rowmin + band)[:, None])
    r, c = np.nonzero(accept)
    order = np.lexsort((score[r, c], r))
    r, c = r[order], c[order]
    if r.size:
        starts = np.r_[0, np.flatnonzero(np.diff(r)) + 1]
        rank = np.arange(r.size) - np.repeat(starts, np.diff(np.r_[starts, r.size]))
        keep = rank < tol.max_basins
        r, c = r[keep], c[keep]
    a = G[r, np.maximum(c - 1, 0)]
    b = G[r, np.minimum(c + 1, m - 1)]
    if r.size:
        x_opt, v_opt = golden_minimize(lambda pts: evaluate(r, pts), a, b, iterations=56)
    else:
        x_opt = v_opt = np.empty(0)
    x_s, v_s = G[r, c], V[r, c]
    better = v_opt < v_s
    cand_x = np.where(better, x_opt, x_s)
    cand_v = np.where(better, v_opt, v_s)
    best = np.full(n, np.inf)
    np.minimum.at(best, r, cand_v)
    bandb = tol.band(np.where(np.isfinite(best), best, 0.0))
    within = cand_v <= best[r] + bandb[r]
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    np.minimum.at(lo, r[within], cand_x[within])
    np.maximum.at(hi, r[within], cand_x[within])
    # numerically flat stretches of the scan (plateaus) widen the extremes
    flat_tol = 16 * np.finfo(float).eps * (1.0 + np.abs(np.where(np.isfinite(best), best, 0.0)))
    flat = finite & (V <= (best + flat_tol)[:, None])
    if flat.any():
        fr, fc = np.nonzero(flat)
        np.minimum.at(lo, fr, G[fr, fc])
        np.maximum.at(hi, fr, G[fr, fc])
    lo = np.where(feasible, lo, np.nan)
    hi = np.where(feasible, hi, np.nan)
    best = np.where(feasible, best, np.inf)
    return RowMinimum(best, lo, hi, feasible, r[within], cand_x[within], cand_v[within])


# initial functional
def _initial_eval(problem: Problem, x, t, D, Y, strict=False):
    """Values of A over an argument array Y (rows aligned with x, t, D)."""
    k = problem.kernel
    d = x - Y
    y0 = k.solve(d, D, np.zeros_like(t), t)
    cost = k.running_cost(y0, d, D) + problem.U0(np.maximum(Y, 0.0))
    tol = problem.tol
    floor = Y - tol.eps_adm * (1.0 + x) if strict else -tol.eps_adm * (1.0 + x)
    ok = _admissible(k, y0, Y, np.zeros_like(t), t, floor, cost, tol.adm_samples, margin_band=tol.val_tol)
    ok &= Y >= 0
    return np.where(ok, cost, np.inf), y0


def initial_rows(problem: Problem, x, t, strict: bool | None = None) -> RowMinimum:
    """Minimize A(., x_i, t_i) for each row independently."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x, t = np.broadcast_arrays(x, t)
    x, t = x.ravel().copy(), t.ravel().copy()
    if np.any(t <= 0):
        raise ValueError("minimize_A needs t > 0")
    if np.any(x < 0):
        raise ValueError("minimize_A needs x >= 0")
    strict = problem.tol.admissibility == "strict" if strict is None else strict
    k = problem.kernel
    D = {kk: v[:, None] for kk, v in k.between(np.zeros_like(t), t).items()}
    m = problem.tol.scan_cells
    frac = np.linspace(0.0, 1.0, m + 1)
    reach = t * problem.initial_speed_bound * 1.05 + 0.01 * (t + x) + 1e-9
    rows = np.arange(x.size)
    out = None
    for attempt in range(5):
        lo = np.maximum(0.0, x[rows] - reach[rows])
        hi = x[rows] + reach[rows]
        G = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        Dr = {kk: v[rows] for kk, v in D.items()}
        V, _ = _initial_eval(problem, x[rows, None], t[rows, None], Dr, G, strict)

        def evaluate(rr, pts, rows=rows, Dr=Dr):
            vals, _ = _initial_eval(problem, x[rows][rr], t[rows][rr], {kk: v[rr, 0] for kk, v in Dr.items()}, pts, strict)
            return vals

        res = _minimize_rows(G, V, evaluate, problem.tol)
        if out is None:
            out = res
        else:
            _merge_rows(out, res, rows)
        edge = res.feasible & (res.hi >= hi - 2.0 * (hi - lo) / m)
        redo = ~res.feasible | edge
        if not redo.any():
            break
        rows = rows[redo]
        reach[rows] *= 4.0
    return out


def _merge_rows(out: RowMinimum, res: RowMinimum, rows: np.ndarray):
    out.value[rows] = res.value
    out.lo[rows] = res.lo
    out.hi[rows] = res.hi
    out.feasible[rows] = res.feasible
    drop = np.isin(out.cand_row, rows)
    out.cand_row = np.concatenate([out.cand_row[~drop], rows[res.cand_row]])
    out.cand_arg = np.concatenate([out.cand_arg[~drop], res.cand_arg])
    out.cand_val = np.concatenate([out.cand_val[~drop], res.cand_val])


def _curve_floor_ok(problem: Problem, y0, x_lo, t_lo, t_hi, floor) -> bool:
    k = problem.kernel
    args = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (y0, x_lo, t_lo, t_hi)]
    x_min, _ = k.curve_minimum(*args, problem.tol.adm_samples)
    return bool(x_min[0] >= floor)


def is_admissible_boundary(tau: float, x: float, t: float, problem: Problem) -> bool:
    """Whether the h-curve from ``(0, tau)`` to ``(x, t)`` stays in the quarter plane."""
    if not 0 <= tau < t or x < 0:
        raise ValueError("is_admissible_boundary needs 0 <= tau < t and x >= 0")
    k = problem.kernel
    y0 = k.solve(x, k.between(tau, t), tau, t)
    return _curve_floor_ok(problem, y0, 0.0, tau, t, -problem.tol.eps_adm * (1.0 + x))


def is_admissible_initial(y: float, x: float, t: float, problem: Problem, strict: bool | None = None) -> bool:
    """Containment (default) or strict partial-integral admissibility of the curve from ``(y, 0)`` to ``(x, t)``."""
    if y < 0 or x < 0 or t <= 0:
        raise ValueError("is_admissible_initial needs y >= 0, x >= 0 and t > 0")
    strict = problem.tol.admissibility == "strict" if strict is None else strict
    k = problem.kernel
    y0 = k.solve(x - y, k.between(0.0, t), 0.0, t)
    slack = problem.tol.eps_adm * (1.0 + x)
    return _curve_floor_ok(problem, y0, y, 0.0, t, (y if strict else 0.0) - slack)


def A_functional(y: float, x: float, t: float, problem: Problem) -> float:
    """A(y, x, t): h-curve action from (y, 0) to (x, t) plus U0(y); ignores admissibility."""
    if y < 0 or t <= 0:
        raise ValueError("A_functional needs y >= 0 and t > 0")
    k = problem.kernel
    D = k.between(0.0, t)
    y0 = k.solve(x - y, D, 0.0, t)
    return float(k.running_cost(y0, x - y, D) + problem.U0(y))


def minimize_A(x: float, t: float, problem: Problem, strict: bool | None = None) -> MinimizationResult:
    res = initial_rows(problem, [x], [t], strict)
    return res.result(0, "initial")


# boundary functional
def _tau_grid(t: float, m: int) -> np.ndarray:
    uniform = t * np.linspace(0.0, 1.0, m + 1)[:-1]
    near = t - t * np.geomspace(1e-7, 1.0 / m, max(m // 8, 8))
    return np.unique(np.concatenate([uniform, near]))


def _boundary_eval(problem: Problem, table, x, t: float, tau, Dtau=None, brange=None):
    """Values of B over ``tau`` (broadcast against ``x``)."""
    k = problem.kernel
    D = Dtau if Dtau is not None else k.between(tau, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        y0 = k.solve(x, D, tau, t)
        cost = k.running_cost(y0, x, D) + table.interp(tau)
    tol = problem.tol
    degenerate = D[0] <= 0
    cost = np.where(degenerate, np.where(x == 0, table.interp(tau), np.inf), cost)
    y0 = np.where(degenerate, problem.flux.lambda_f, y0)
    floor = -tol.eps_adm * (1.0 + x)
    with np.errstate(invalid="ignore"):  # degenerate entries are masked below
        ok = _admissible(k, y0, np.zeros_like(cost), tau, t, floor, cost, tol.adm_samples, brange=brange,
                         margin_band=tol.val_tol)
    ok |= degenerate & (x == 0)
    return np.where(ok & np.isfinite(cost), cost, np.inf), y0


def boundary_level(problem: Problem, table, xs, t: float) -> RowMinimum:
    """Minimize B(., x_i, t) over tau for all ``xs`` at one time level."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float)).ravel()
    if t <= 0:
        raise ValueError("minimize_B needs t > 0")
    if np.any(xs < 0):
        raise ValueError("minimize_B needs x >= 0")
    k = problem.kernel
    # tau = t closes the scan: infeasible for x > 0 but it brackets minimizers in the last sliver
    tau = np.append(_tau_grid(t, problem.tol.scan_cells), t)
    D = k.between(tau, np.full(tau.shape, t))
    brange = problem.source.beta_range(tau, np.full(tau.shape, t))
    G = np.broadcast_to(tau, (xs.size, tau.size))
    V, _ = _boundary_eval(problem, table, xs[:, None], t, tau[None, :], {kk: v[None, :] for kk, v in D.items()},
                          (brange[0][None, :], brange[1][None, :]))

    def evaluate(rr, pts):
        return _boundary_eval(problem, table, xs[rr], t, np.minimum(pts, t))[0]

    return _minimize_rows(G, V, evaluate, problem.tol)


def B_functional(tau: float, x: float, t: float, problem: Problem, table) -> float:
    """B(tau, x, t): h-curve action from (0, tau) to (x, t) plus W(0, tau)."""
    if not 0 <= tau < t:
        raise ValueError("B_functional needs 0 <= tau < t")
    if tau > table.t_max:
        raise ValueError("tau beyond boundary table horizon")
    k = problem.kernel
    D = k.between(tau, t)
    y0 = k.solve(x, D, tau, t)
    return float(k.running_cost(y0, x, D) + table.interp(tau))


def minimize_B(x: float, t: float, problem: Problem, table) -> MinimizationResult:
    return boundary_level(problem, table, [x], t).result(0, "boundary")


# value function
@dataclass
class ValueLevel:
    xs: np.ndarray
    t: float
    W: np.ndarray
    branch: np.ndarray
    initial: RowMinimum
    boundary: RowMinimum


def value_level(problem: Problem, table, xs, t: float) -> ValueLevel:
    xs = np.atleast_1d(np.asarray(xs, dtype=float)).ravel()
    A = initial_rows(problem, xs, np.full(xs.shape, t))
    B = boundary_level(problem, table, xs, t)
    if np.any(~A.feasible & ~B.feasible):
        bad = xs[~A.feasible & ~B.feasible]
        raise InfeasibleError(f"no admissible curve reaches x={bad[0]:.6g} at t={t:.6g}")
    W = np.minimum(A.value, B.value)
    band = problem.tol.band(W)
    branch = np.where(np.abs(A.value - B.value) <= band, TIE, np.where(A.value < B.value, INITIAL, BOUNDARY))
    return ValueLevel(xs, t, W, branch, A, B)


def value(x: float, t: float, problem: Problem, table):
    """``(W, branch, result)`` with the winning minimization (both on a tie)."""
    lv = value_level(problem, table, [x], t)
    br = int(lv.branch[0])
    A = lv.initial.result(0, "initial")
    B = lv.boundary.result(0, "boundary")
    if br == INITIAL:
        return float(lv.W[0]), "initial", A
    if br == BOUNDARY:
        return float(lv.W[0]), "boundary", B
    return float(lv.W[0]), "tie", (A, B)


def leg_cost(problem: Problem, x_lo, t_lo, x_hi, t_hi):
    """Action of the h-curve from ``(x_lo, t_lo)`` to ``(x_hi, t_hi)`` and its minimum position."""
    k = problem.kernel
    D = k.between(t_lo, t_hi)
    y0 = k.solve(np.subtract(x_hi, x_lo), D, t_lo, t_hi)
    cost = k.running_cost(y0, np.subtract(x_hi, x_lo), D)
    return cost, y0


def dpp_residual(x: float, t: float, s: float, problem: Problem, table, scan: int = 512) -> float:
    """|W(x,t) - min over one-leg continuations from time s|.

    Legs start either at an interior state (z, s) or on the boundary at a
    time in [s, t); both use the same h-curve machinery as W.
    """
    if not 0 < s < t:
        raise ValueError("dpp_residual needs 0 < s < t")
    W_direct, _, _ = value(x, t, problem, table)
    tol = problem.tol
    k = problem.kernel
    reach = (t - s) * problem.speed_bound * 1.05 + 1e-9
    zs = np.linspace(max(0.0, x - reach), x + reach, scan + 1)

    def via_interior(z):
        z = np.atleast_1d(z)
        lv = value_level(problem, table, z, s)
        cost, y0 = leg_cost(problem, z, np.full(z.shape, s), np.full(z.shape, x), np.full(z.shape, t))
        xm, _ = k.curve_minimum(y0, z, np.full(z.shape, s), np.full(z.shape, t), tol.adm_samples)
        ok = xm >= -tol.eps_adm * (1.0 + x)
        return np.where(ok, lv.W + cost, np.inf)

    vals = via_interior(zs)
    i = int(np.argmin(vals))
    interior_best = float(vals[i])
    # nested vectorized scans: each shrinks the bracket about 64-fold at the cost of one level solve
    for _ in range(3):
        if not np.isfinite(interior_best):
            break
        zs = np.linspace(zs[max(i - 1, 0)], zs[min(i + 1, zs.size - 1)], 129)
        vals = via_interior(zs)
        i = int(np.argmin(vals))
        interior_best = min(interior_best, float(vals[i]))

    taus = np.concatenate([s + (t - s) * np.linspace(0.0, 1.0, scan + 1)[:-1], t - (t - s) * np.geomspace(1e-7, 1.0 / scan, 32)])
    taus = np.unique(taus)
    bvals, _ = _boundary_eval(problem, table, x, t, taus)
    j = int(np.argmin(bvals))
    if np.isfinite(bvals[j]):
        a, b = taus[max(j - 1, 0)], taus[min(j + 1, taus.size - 1)]
        _, bv = golden_minimize(lambda p: _boundary_eval(problem, table, x, t, p)[0], np.array([a]), np.array([b]), iterations=48)
        boundary_best = min(float(bv[0]), float(bvals[j]))
    else:
        boundary_best = np.inf
    return abs(W_direct - min(interior_best, boundary_best))
