"""W(0, t) by dynamic programming over boundary mechanisms, plus BLN checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .functional import Problem, initial_rows

ORIGIN, FOLLOW, LOOP, DIRECT = 0, 1, 2, 3
MECHANISMS = {ORIGIN: "origin", FOLLOW: "follow", LOOP: "loop", DIRECT: "initial"}


@dataclass(frozen=True, eq=False)
class BoundaryTable:
    """W(0, t_k) on a uniform grid with the mechanism that produced each node."""

    grid: np.ndarray
    values: np.ndarray
    provenance: np.ndarray
    source_index: np.ndarray
    ub_bar: np.ndarray

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    @property
    def h_b(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def size(self) -> int:
        return self.grid.size - 1

    def interp(self, tau):
        """Linear interpolation of W(0, .) between nodes."""
        arr = np.asarray(tau, dtype=float)
        if np.any(arr > self.t_max * (1 + 1e-12)) or np.any(arr < 0):
            raise ValueError("tau outside the boundary table horizon")
        out = np.interp(arr, self.grid, self.values)
        return float(out) if np.ndim(tau) == 0 else out

    def mechanism(self, k: int) -> str:
        return MECHANISMS[int(self.provenance[k])]

    def node_index(self, t: float) -> int:
        k = int(np.rint(t / self.h_b))
        if abs(self.grid[min(max(k, 0), self.size)] - t) > 1e-9 * (1.0 + t):
            raise ValueError(f"t={t} is not a grid node")
        return k

    def rows(self):
        for k in range(self.grid.size):
            yield float(self.grid[k]), float(self.values[k]), MECHANISMS[int(self.provenance[k])], int(self.source_index[k])


def _two_sum(a, b):
    """Error-free sum: a + b == s + e exactly in floating point."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def effective_boundary(ub, t, lambda_f: float):
    """``max(u_b(t), lambda_f)``; ``ub`` may be a number or a callable."""
    val = ub(t) if callable(ub) else ub
    out = np.maximum(val, lambda_f)
    return float(out) if np.ndim(out) == 0 else out


def build_table(problem: Problem, n: int = 1024, t_max: float | None = None) -> BoundaryTable:
    """Dynamic programming for W(0, t_k), k = 0..n.

    Each node takes the best of riding the boundary from the previous node,
    an admissible h-curve loop from an earlier node, and a direct h-curve
    from the initial line.
    """
    if n < 1:
        raise ValueError("table needs at least one step")
    t_end = problem.t_max if t_max is None else float(t_max)
    grid = np.linspace(0.0, t_end, n + 1)
    k = problem.kernel
    tol = problem.tol
    phi = np.asarray(problem.follow_integral(grid))
    M = k.moments_at(grid)
    direct = initial_rows(problem, np.zeros(n), grid[1:])
    direct_val = np.concatenate([[np.inf], direct.value])
    # totals are kept as unevaluated sums hi + lo so that small loop gains survive a large |W|
    hi = np.zeros(n + 1)
    lo = np.zeros(n + 1)
    prov = np.zeros(n + 1, dtype=int)
    src = np.full(n + 1, -1)
    prov[0] = ORIGIN
    src[0] = 0
    floor = -tol.eps_adm
    eps = np.finfo(float).eps
    for K in range(1, n + 1):
        step = phi[K] - phi[K - 1]
        f_hi, f_lo = _two_sum(hi[K - 1], lo[K - 1] - step)
        j = np.arange(K)
        D = {kk: M[kk][K] - M[kk][:K] for kk in M}
        y0 = k.solve(np.zeros(K), D, grid[:K], np.full(K, grid[K]))
        run = k.running_cost(y0, 0.0, D)
        c_hi, c_lo = _two_sum(hi[:K], lo[:K] + run)
        # reference for candidate screening: the better of follow and direct
        if (direct_val[K] - f_hi) - f_lo < 0:
            r_hi, r_lo = direct_val[K], 0.0
        else:
            r_hi, r_lo = f_hi, f_lo
        gap = (c_hi - r_hi) + (c_lo - r_lo)
        loop_val, loop_lo, loop_src, loop_run = np.inf, 0.0, -1, 0.0
        cand = np.flatnonzero(gap < 0)
        if cand.size:
            cand = cand[np.argsort(gap[cand], kind="stable")]
            for start in range(0, cand.size, 64):
                c = cand[start:start + 64]
                t_lo = grid[c]
                t_hi = np.full(c.size, grid[K])
                blo, bhi = problem.source.beta_range(t_lo, t_hi)
                xm, _, amb = k.monotone_minimum(y0[c], np.zeros(c.size), t_lo, t_hi, x_hi=np.zeros(c.size), brange=(blo, bhi))
                ok = (xm >= floor) & ~amb
                if amb.any():
                    ia = np.flatnonzero(amb)
                    xs, _ = k.sampled_minimum(y0[c[ia]], 0.0, t_lo[ia], t_hi[ia], tol.adm_samples, floor=floor)
                    ok[ia] = xs >= floor
                if ok.any():
                    first = c[int(np.flatnonzero(ok)[0])]
                    loop_val, loop_lo, loop_src, loop_run = float(c_hi[first]), float(c_lo[first]), int(j[first]), float(run[first])
                    break
        # (hi, lo, increment scale, mechanism, origin) in tie-break order
        options = [
            (f_hi, f_lo, abs(step), FOLLOW, K - 1),
            (loop_val, loop_lo, abs(loop_run), LOOP, loop_src),
            (direct_val[K], 0.0, abs(direct_val[K]), DIRECT, -1),
        ]
        finite = [o for o in options if np.isfinite(o[0])]
        if not finite:
            raise RuntimeError(f"boundary table: no mechanism reaches node {K}")
        best = finite[0]
        for o in finite[1:]:
            if (o[0] - best[0]) + (o[1] - best[1]) < 0:
                best = o
        for o in finite:
            # rounding in each total is common to its base node; only the increments carry fresh error
            tie = 64.0 * eps * (1.0 + max(o[2], best[2]))
            if (o[0] - best[0]) + (o[1] - best[1]) <= tie:
                hi[K], lo[K], prov[K], src[K] = o[0], o[1], o[3], o[4]
                break
    values = hi + lo
    return BoundaryTable(grid, values, prov, src, np.asarray(problem.ub_bar(grid)))


def _path_mechanisms(table: BoundaryTable, k: int) -> list:
    """Mechanisms along the back-pointer path ending at node k (latest first)."""
    path = []
    while k > 0:
        mech = int(table.provenance[k])
        path.append(mech)
        if mech == FOLLOW:
            k -= 1
        elif mech == LOOP:
            k = int(table.source_index[k])
        else:
            break
    return path


def path_segments(table: BoundaryTable, t: float) -> list:
    """Optimal path to ``(0, t)`` as ``(mechanism, t_start, t_end)`` legs in time order.

    Consecutive follow steps are merged into one leg; each loop is its own leg.
    """
    k = table.node_index(t)
    legs = []
    while k > 0:
        mech = int(table.provenance[k])
        prev = k - 1 if mech == FOLLOW else int(table.source_index[k]) if mech == LOOP else 0
        start, end = float(table.grid[prev]), float(table.grid[k])
        if mech == FOLLOW and legs and legs[-1][0] == "follow":
            legs[-1] = ("follow", start, legs[-1][2])
        else:
            legs.append((MECHANISMS[mech], start, end))
        if mech not in (FOLLOW, LOOP):
            break
        k = prev
    return legs[::-1]


def alternations(table: BoundaryTable, t: float) -> int:
    """Number of follow/loop switches along the optimal path to (0, t)."""
    runs = []
    for mech in _path_mechanisms(table, table.node_index(t)):
        if mech in (FOLLOW, LOOP) and (not runs or runs[-1] != mech):
            runs.append(mech)
        elif mech not in (FOLLOW, LOOP):
            break
    return max(len(runs) - 1, 0)


def classify(table: BoundaryTable, t: float, refinements=(), min_alternations: int = 4) -> str:
    """Boundary-point type at (0, t): Type1, Type2, Type3-suspected or initial.

    Type3-suspected means the optimal path keeps switching between riding the
    boundary and looping at least ``min_alternations`` times on this table
    and on every refined table given.
    """
    k = table.node_index(t)
    counts = [alternations(table, t)] + [alternations(r, t) for r in refinements]
    if min(counts) >= min_alternations:
        return "Type3-suspected"
    mech = int(table.provenance[k])
    return {FOLLOW: "Type1", LOOP: "Type2", DIRECT: "initial", ORIGIN: "initial"}[mech]


@dataclass(frozen=True)
class BLNVerdict:
    t: float
    u_trace: float
    ub_bar: float
    passed: bool
    detail: str

    def as_dict(self) -> dict:
        return {"t": self.t, "u_trace": self.u_trace, "ub_bar": self.ub_bar,
                "verdict": "pass" if self.passed else "fail", "detail": self.detail}


def bln_check(u_trace: float, t: float, problem: Problem, tol: float | None = None) -> BLNVerdict:
    """Convex-flux boundary condition at (0+, t)."""
    tol = problem.tol.tol_bln if tol is None else tol
    ubb = float(problem.ub_bar(t))
    f = problem.flux
    if abs(u_trace - ubb) <= tol:
        return BLNVerdict(t, u_trace, ubb, True, "trace equals effective boundary datum")
    speed = float(f.fprime(u_trace))
    flux_gap = float(f.f(u_trace) - f.f(ubb))
    if speed <= tol and flux_gap >= -tol:
        return BLNVerdict(t, u_trace, ubb, True, "outgoing trace with dominating flux")
    return BLNVerdict(
        t, u_trace, ubb, False,
        f"trace {u_trace:.6g} differs from {ubb:.6g}; f'={speed:.3g}, f(trace)-f(ub_bar)={flux_gap:.3g}",
    )


def hypothesis_holds(problem: Problem, samples: int = 2001) -> bool:
    """Sampled check of f(lambda_f e^beta) <= f(ub_bar) (loops never pay)."""
    ts = np.linspace(0.0, problem.t_max, samples)
    f = problem.flux
    lhs = f.f(f.lambda_f * np.exp(problem.source.beta(ts)))
    rhs = f.f(problem.ub_bar(ts))
    return bool(np.all(lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))))


def _scan_polish(fn, a: float, b: float, best: float, points: int = 65, rounds: int = 3) -> float:
    """Smallest sampled value of ``fn`` on ``[a, b]`` after zooming in ``rounds`` times."""
    for _ in range(rounds):
        if not b > a:
            break
        grid = np.linspace(a, b, points)
        vals = fn(grid)
        i = int(np.argmin(vals))
        best = min(best, float(vals[i]))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    return best


def three_piece_value(x: float, t: float, problem: Problem, n_t: int = 2048) -> float:
    """W(x, t) restricted to paths of at most three pieces.

    Pieces: an h-curve from the initial line to the boundary at t1, a ride
    along the boundary to t2, and an h-curve to (x, t); or one h-curve from
    the initial line. Computed by nested scans, independent of the table.
    """
    if not hypothesis_holds(problem):
        warnings.warn("three_piece_value: loops may beat boundary riding for this problem", RuntimeWarning)
    k = problem.kernel
    tol = problem.tol
    direct = float(initial_rows(problem, [x], [t]).value[0])
    ts = np.linspace(0.0, t, n_t + 1)

    def reach_boundary(t1):
        t1 = np.atleast_1d(t1)
        out = np.zeros(t1.shape)
        pos = t1 > 0
        if pos.any():
            out[pos] = initial_rows(problem, np.zeros(int(pos.sum())), t1[pos]).value
        return out + np.asarray(problem.follow_integral(t1))

    def last_leg(t2):
        t2 = np.atleast_1d(t2)
        D = k.between(t2, np.full(t2.shape, t))
        with np.errstate(divide="ignore", invalid="ignore"):
            y0 = k.solve(np.full(t2.shape, x), D, t2, np.full(t2.shape, t))
            cost = k.running_cost(y0, x, D)
            xm, _ = k.curve_minimum(y0, np.zeros(t2.shape), t2, np.full(t2.shape, t), tol.adm_samples)
        ok = (xm >= -tol.eps_adm * (1.0 + x)) & (t2 < t)
        if x == 0:
            cost = np.where(t2 >= t, 0.0, cost)
            ok |= t2 >= t
        return np.where(ok & np.isfinite(cost), cost, np.inf) - np.asarray(problem.follow_integral(t2))

    H = reach_boundary(ts)
    Kv = last_leg(ts)
    run_min = np.minimum.accumulate(H)
    arg_run = np.zeros(ts.size, dtype=int)
    for i in range(1, ts.size):
        arg_run[i] = i if H[i] < run_min[i - 1] else arg_run[i - 1]
    total = run_min + Kv
    j = int(np.argmin(total))
    best = float(total[j])
    if np.isfinite(best):
        i = int(arg_run[j])
        # polish each time within its neighbouring cells by nested vectorized scans
        h_opt = _scan_polish(reach_boundary, ts[max(i - 1, 0)], ts[min(i + 1, j)], H[i])
        k_opt = _scan_polish(last_leg, ts[max(j - 1, i)], ts[min(j + 1, n_t)], Kv[j])
        best = min(best, h_opt + k_opt)
    return min(direct, best)
