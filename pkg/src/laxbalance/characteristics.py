"""Characteristic triangles, generalized characteristics and structural checks.

Minimizer bases are handled in one coordinate ``sigma``: an initial point
``y >= 0`` maps to ``sigma = y`` and a boundary time ``tau`` maps to
``sigma = -tau``. Along a time level the bases are nondecreasing in x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functional import BOUNDARY, INITIAL, TIE, Problem
from .solver import SolutionField, detect_jumps, solve_level

CASES = {INITIAL: "initial", BOUNDARY: "boundary", TIE: "mixed"}


def _rh_speed(flux, ul, ur):
    ul = np.asarray(ul, dtype=float)
    ur = np.asarray(ur, dtype=float)
    same = np.abs(ul - ur) <= 1e-14 * (1.0 + np.abs(ul))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (flux.f(ul) - flux.f(ur)) / (ul - ur)
    return np.where(same, flux.fprime(0.5 * (ul + ur)), ratio)


def base_curves(problem: Problem, sigma, x, t: float):
    """``(y0, x_start, t_start)`` of the h-curves from bases ``sigma`` to ``(x, t)``."""
    k = problem.kernel
    sigma = np.asarray(sigma, dtype=float)
    x = np.broadcast_to(np.asarray(x, dtype=float), sigma.shape)
    t_start = np.where(sigma < 0, np.minimum(-sigma, t), 0.0)
    x_start = np.where(sigma < 0, 0.0, sigma)
    D = k.between(t_start, np.full(sigma.shape, t))
    with np.errstate(divide="ignore", invalid="ignore"):
        y0 = k.solve(x - x_start, D, t_start, np.full(sigma.shape, t))
    y0 = np.where(D[0] > 0, y0, np.nan)
    return y0, x_start, t_start


def curve_positions(problem: Problem, y0, x_start, t_start, theta):
    """Positions at ``theta`` (broadcast); zero before a boundary start, apex for degenerate curves."""
    k = problem.kernel
    theta = np.asarray(theta, dtype=float)
    y0, x_start, t_start, theta = np.broadcast_arrays(y0, x_start, t_start, theta)
    th = np.maximum(theta, t_start)
    D = k.between(t_start, th)
    yy = np.where(np.isfinite(y0), y0, 0.0)
    pos = x_start + k.displacement(yy, D)
    return np.where((theta >= t_start) & np.isfinite(y0), pos, x_start)


def level_bases(lv):
    """Left/right bases in sigma coordinates for a solved level."""
    left = np.where(lv.branch == INITIAL, lv.y_lo, -lv.tau_hi)
    right = np.where(lv.branch == BOUNDARY, -lv.tau_lo, lv.y_hi)
    return left, right


# speeds
@dataclass
class SpeedInfo:
    speed: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray
    distinct: np.ndarray
    case: np.ndarray


def speed_info(problem: Problem, table, xs, t: float, lv=None) -> SpeedInfo:
    """Generalized characteristic speed with one-sided states at points of one level."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lv = lv if lv is not None else solve_level(problem, table, xs, t)
    flux = problem.flux
    scale = np.exp(problem.source.beta(t))
    left, right = level_bases(lv)
    yl, _, _ = base_curves(problem, left, xs, t)
    yr, _, _ = base_curves(problem, right, xs, t)
    ul = np.where(np.isfinite(yl), yl * scale, lv.u)
    ur = np.where(np.isfinite(yr), yr * scale, lv.u)
    arg_tol = problem.tol.arg_tol * (1.0 + np.abs(xs))
    distinct = (right - left) > arg_tol
    mixed = lv.branch == TIE
    distinct = np.where(mixed, np.abs(ul - ur) > arg_tol * (1.0 + np.abs(ul)), distinct)
    case = np.array(["i" if b == INITIAL else "ii" if b == BOUNDARY else "iii" for b in lv.branch], dtype=object)
    corner = mixed & (np.abs(left) <= arg_tol) & (np.abs(right) <= arg_tol)
    speed = np.where(distinct, _rh_speed(flux, ul, ur), flux.fprime(lv.u))
    if corner.any():
        y0, _, _ = base_curves(problem, np.zeros(int(corner.sum())), xs[corner], t)
        speed[corner] = flux.fprime(y0 * scale)
        case[corner] = "iv"
        distinct[corner] = False
    return SpeedInfo(speed, ul, ur, distinct, case)


def char_speed(x: float, t: float, problem: Problem, table) -> float:
    if x < 0 or t <= 0:
        raise ValueError("char_speed needs x >= 0 and t > 0")
    return float(speed_info(problem, table, [x], t).speed[0])


@dataclass
class CharacteristicCurve:
    ts: np.ndarray
    xs: np.ndarray
    speeds: np.ndarray
    origin: tuple
    notes: list = field(default_factory=list)
    complete: bool = True


def trace(x0: float, t0: float, t1: float, dt: float, problem: Problem, table,
          method: str = "euler") -> CharacteristicCurve:
    """Integrate dX/dt = char_speed, locking onto a shock once it persists."""
    if not t0 < t1:
        raise ValueError("trace needs t0 < t1")
    if method not in ("euler", "midpoint"):
        raise ValueError("method must be 'euler' or 'midpoint'")
    lv0 = solve_level(problem, table, [x0], t0)
    left0, _ = level_bases(lv0)
    origin = ("initial", float(left0[0])) if left0[0] >= 0 else ("boundary", float(-left0[0]))
    ts, xs, speeds, notes = [t0], [x0], [], []
    x, t = float(x0), float(t0)
    locked, distinct_prev, complete = False, False, True
    n_steps = int(np.ceil((t1 - t0) / dt - 1e-9))
    for step in range(n_steps):
        h = min(dt, t1 - t)
        try:
            info = speed_info(problem, table, [x], t)
            s = float(info.speed[0])
            distinct = bool(info.distinct[0])
            if method == "midpoint" and not (distinct or locked):
                xm = max(x + 0.5 * h * s, 0.0)
                s = float(speed_info(problem, table, [xm], t + 0.5 * h).speed[0])
            x_new, t_new = x + h * s, t + h
            if distinct and distinct_prev and not locked:
                locked = True
                notes.append(f"shock-locked at t={t:.6g}")
            if locked:
                w = 2.0 * h * (1.0 + abs(s)) + 1e-6
                grid = np.linspace(max(x_new - w, 0.0), x_new + w, 33)
                lv = solve_level(problem, table, grid, t_new)
                jumps = detect_jumps(grid, lv.u, lv.W, t_new)
                if jumps:
                    x_new = min((jp.x_jump for jp in jumps), key=lambda v: abs(v - x_new))
                else:
                    locked = False
                    notes.append(f"shock released at t={t_new:.6g}")
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            notes.append(f"speed evaluation failed at t={t:.6g}: {exc}")
            complete = False
            break
        if x_new < 0:
            notes.append(f"clipped at x=0, t={t_new:.6g}")
            x_new = 0.0
        speeds.append(s)
        distinct_prev = distinct
        x, t = x_new, t_new
        ts.append(t)
        xs.append(x)
    speeds.append(speeds[-1] if speeds else 0.0)
    return CharacteristicCurve(np.array(ts), np.array(xs), np.array(speeds), origin, notes, complete)


# triangles
@dataclass
class CharTriangle:
    apex_x: float
    apex_t: float
    case: str
    sigma_left: float
    sigma_right: float
    left: tuple
    right: tuple

    def slice(self, problem: Problem, theta):
        """``(L, R)`` extent of the triangle at time(s) ``theta``."""
        lo = curve_positions(problem, *self.left, theta)
        hi = curve_positions(problem, *self.right, theta)
        return lo, hi

    def polylines(self, problem: Problem, n: int = 33):
        th = np.linspace(0.0, self.apex_t, n)
        lo, hi = self.slice(problem, th)
        return th, lo, hi


def _triangles_from_level(problem: Problem, xs, t: float, lv) -> list:
    left, right = level_bases(lv)
    yl, xl, tl = base_curves(problem, left, xs, t)
    yr, xr, tr = base_curves(problem, right, xs, t)
    return [
        CharTriangle(float(xs[i]), float(t), CASES[int(lv.branch[i])], float(left[i]), float(right[i]),
                     (yl[i], xl[i], tl[i]), (yr[i], xr[i], tr[i]))
        for i in range(len(xs))
    ]


def build_triangle(x: float, t: float, problem: Problem, table) -> CharTriangle:
    lv = solve_level(problem, table, [x], t)
    return _triangles_from_level(problem, np.array([float(x)]), t, lv)[0]


def triangles_at_level(problem: Problem, table, xs, t0: float) -> list:
    xs = np.sort(np.asarray(xs, dtype=float))
    return _triangles_from_level(problem, xs, t0, solve_level(problem, table, xs, t0))


@dataclass
class TriangleReport:
    t0: float
    tolerance: float
    disjoint: bool
    covering: bool
    inserted: int
    max_overlap: float
    max_gap: float
    failures: list

    @property
    def passed(self) -> bool:
        return self.disjoint and self.covering

    def as_dict(self) -> dict:
        return {"t0": self.t0, "tolerance": self.tolerance, "disjoint": self.disjoint,
                "covering": self.covering, "inserted": self.inserted, "max_overlap": self.max_overlap,
                "max_gap": self.max_gap, "failures": self.failures[:20],
                "verdict": "pass" if self.passed else "fail"}


def _fill_gaps(problem, table, tris, t0, tol, max_depth=60):
    """Insert triangles at apexes between neighbours whose bases leave a gap."""
    out = [tris[0]]
    inserted = 0
    for nxt in tris[1:]:
        stack = [(out[-1], nxt, 0)]
        pending = []
        while stack:
            a, b, depth = stack.pop()
            if b.sigma_left - a.sigma_right <= tol or depth >= max_depth or b.apex_x - a.apex_x <= 1e-15:
                pending.append(b)
                continue
            mid = build_triangle(0.5 * (a.apex_x + b.apex_x), t0, problem, table)
            inserted += 1
            stack.append((mid, b, depth + 1))
            stack.append((a, mid, depth + 1))
        # pending holds right endpoints in left-to-right order when popped depth-first
        out.extend(pending)
    return out, inserted


def check_triangle_lemma(problem: Problem, table, t0: float, xs, triangles=None,
                         n_levels: int = 17, fill_gaps: bool = True) -> TriangleReport:
    """Interior-disjointness and covering of same-level triangles.

    Tolerance is twice the apex spacing. Triangles are taken in apex order;
    gaps in the base coordinate are filled by bisecting the apex (a shock apex
    owns a wide base) before judging.
    """
    xs = np.sort(np.asarray(xs, dtype=float))
    tol = 2.0 * float(np.max(np.diff(xs))) if xs.size > 1 else 1e-6
    tris = triangles if triangles is not None else triangles_at_level(problem, table, xs, t0)
    inserted = 0
    if fill_gaps and triangles is None:
        tris, inserted = _fill_gaps(problem, table, tris, t0, tol)
    thetas = np.linspace(0.0, t0, n_levels)
    L = np.empty((len(tris), thetas.size))
    R = np.empty_like(L)
    for i, tri in enumerate(tris):
        L[i], R[i] = tri.slice(problem, thetas)
    sig_l = np.array([tri.sigma_left for tri in tris])
    sig_r = np.array([tri.sigma_right for tri in tris])
    failures = []
    overlap = np.maximum(R[:-1] - L[1:], 0.0)
    gap = np.maximum(L[1:] - R[:-1], 0.0)
    base_overlap = np.maximum(sig_r[:-1] - sig_l[1:], 0.0)
    base_gap = np.maximum(sig_l[1:] - sig_r[:-1], 0.0)
    for i, j in zip(*np.nonzero(overlap > tol)):
        failures.append(f"overlap {overlap[i, j]:.3g} between apexes x={tris[i].apex_x:.6g},{tris[i + 1].apex_x:.6g} at t={thetas[j]:.4g}")
    for i in np.flatnonzero(base_overlap > tol):
        failures.append(f"base overlap {base_overlap[i]:.3g} after apex x={tris[i].apex_x:.6g}")
    disjoint = not failures
    n_disjoint = len(failures)
    for i, j in zip(*np.nonzero(gap > tol)):
        failures.append(f"uncovered gap {gap[i, j]:.3g} after apex x={tris[i].apex_x:.6g} at t={thetas[j]:.4g}")
    for i in np.flatnonzero(base_gap > tol):
        failures.append(f"base gap {base_gap[i]:.3g} after apex x={tris[i].apex_x:.6g}")
    if xs.size and xs[0] <= tol and np.any(L[0] > tol):
        failures.append("strip near x=0 is not covered by the first triangle")
    covering = len(failures) == n_disjoint
    return TriangleReport(float(t0), tol, disjoint, covering, inserted,
                          float(overlap.max(initial=0.0)), float(gap.max(initial=0.0)), failures)


# entropy
def entropy_margins(flux, u_left, u_right):
    s = _rh_speed(flux, u_left, u_right)
    return flux.fprime(np.asarray(u_left)) - s, s - flux.fprime(np.asarray(u_right)), s


def entropy_check(field: SolutionField, problem: Problem, tol: float | None = None) -> list:
    """Jumps violating f'(u_left) > RH speed > f'(u_right) beyond ``tol``."""
    tol = problem.tol.entropy_tol if tol is None else tol
    out = []
    for jp in field.jumps:
        m1, m2, s = entropy_margins(problem.flux, jp.u_left, jp.u_right)
        margin = float(min(m1, m2))
        if margin < -tol:
            out.append({"t": jp.t, "x_jump": jp.x_jump, "u_left": jp.u_left, "u_right": jp.u_right,
                        "speed": float(s), "margin": margin})
    return out


# minimizer structure
@dataclass
class StructureReport:
    name: str
    checked: int
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {"check": self.name, "checked": self.checked, "failures": self.failures[:20],
                "verdict": "pass" if self.passed else "fail"}


def _levels(problem, table, xs, ts):
    return [solve_level(problem, table, xs, float(t)) for t in ts]


def monotonicity_check(problem: Problem, table, xs, ts, levels=None) -> StructureReport:
    """Ordering of extreme minimizers in x and of boundary times in t."""
    xs = np.sort(np.asarray(xs, dtype=float))
    levels = levels if levels is not None else _levels(problem, table, xs, ts)
    tol = problem.tol.arg_tol
    failures, checked = [], 0
    for lv in levels:
        left, right = level_bases(lv)
        band = tol * (1.0 + np.abs(xs))
        if np.any(right < left - band):
            failures.append(f"t={lv.t:.4g}: lower extreme exceeds upper")
        bad = np.flatnonzero(np.diff(left) < -band[1:])
        bad = np.union1d(bad, np.flatnonzero(np.diff(right) < -band[1:]))
        bad = np.union1d(bad, np.flatnonzero(left[1:] < right[:-1] - band[1:]))
        for i in bad:
            failures.append(f"t={lv.t:.4g}: bases out of order between x={xs[i]:.6g} and x={xs[i + 1]:.6g}")
        checked += xs.size
    for a, b in zip(levels[:-1], levels[1:]):
        both = (a.branch == BOUNDARY) & (b.branch == BOUNDARY)
        bad = both & ((b.tau_lo < a.tau_lo - tol) | (b.tau_hi < a.tau_hi - tol))
        for i in np.flatnonzero(bad):
            failures.append(f"x={xs[i]:.6g}: boundary time decreases from t={a.t:.4g} to t={b.t:.4g}")
        checked += int(both.sum())
    return StructureReport("monotone", checked, failures)


def non_intersection_check(problem: Problem, table, xs, ts, levels=None, n_theta: int = 33) -> StructureReport:
    """Extreme minimizing curves for distinct apexes at one level do not cross."""
    xs = np.sort(np.asarray(xs, dtype=float))
    levels = levels if levels is not None else _levels(problem, table, xs, ts)
    failures, checked = [], 0
    for lv in levels:
        tris = _triangles_from_level(problem, xs, lv.t, lv)
        th = np.linspace(0.0, lv.t, n_theta)[1:-1]
        L = np.array([tri.slice(problem, th)[0] for tri in tris])
        R = np.array([tri.slice(problem, th)[1] for tri in tris])
        tol = 1e-6 * (1.0 + np.abs(xs))[:, None]
        # every curve of apex i must stay left of every curve of apex j > i
        run_max = np.maximum.accumulate(R, axis=0)
        cross = L[1:] < run_max[:-1] - tol[1:]
        for i, j in zip(*np.nonzero(cross)):
            failures.append(f"t={lv.t:.4g}: curve to x={xs[i + 1]:.6g} crosses an earlier apex's curve at theta={th[j]:.4g}")
        checked += xs.size
    return StructureReport("nip", checked, failures)
