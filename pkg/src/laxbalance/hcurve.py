"""Characteristic h-curves X'(theta) = f'(y0 * exp(beta(theta)))."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flux import FluxModel
from .source import SourceModel

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


class HCurveError(RuntimeError):
    """Root bracketing for the curve parameter failed."""


def _powers(y: np.ndarray, n: int) -> list:
    out = [np.ones_like(y)]
    for _ in range(n - 1):
        out.append(out[-1] * y)
    return out


class CurveKernel:
    """Moment-based evaluation of displacements and running costs.

    With polynomial ``f``, ``integral f'(y0 e^beta)`` and
    ``integral e^-beta f(y0 e^beta)`` are finite sums of
    ``D_k = integral e^(k beta)`` over the same interval, so each curve costs a
    handful of multiplications once the moments are known.
    """

    def __init__(self, flux: FluxModel, source: SourceModel):
        self.flux = flux
        self.source = source
        self.fc = flux.coeffs
        self.dc = flux.dcoeffs
        self.orders = tuple(range(-1, flux.degree))
        source.prepare_moments(self.orders)

    # moment bookkeeping
    def moments_at(self, t) -> dict:
        return {k: np.asarray(self.source.moment(k, t), dtype=float) for k in self.orders}

    def moments_at_nodes(self, idx) -> dict:
        return {k: self.source.moment_nodes(k)[idx] for k in self.orders}

    def between(self, a, b) -> dict:
        return {k: np.asarray(self.source.moment_between(k, a, b), dtype=float) for k in self.orders}

    @staticmethod
    def diff(hi: dict, lo: dict) -> dict:
        return {k: hi[k] - lo[k] for k in hi}

    # curve quantities
    def displacement(self, y0, D: dict):
        y0 = np.asarray(y0, dtype=float)
        pw = _powers(y0, self.dc.size)
        return sum(self.dc[k] * pw[k] * D[k] for k in range(self.dc.size))

    def displacement_slope(self, y0, D: dict):
        y0 = np.asarray(y0, dtype=float)
        pw = _powers(y0, self.dc.size)
        return sum(k * self.dc[k] * pw[k - 1] * D[k] for k in range(1, self.dc.size))

    def running_cost(self, y0, dx, D: dict):
        """``integral e^-beta f*(f'(y0 e^beta))`` for a curve with displacement ``dx``."""
        y0 = np.asarray(y0, dtype=float)
        pw = _powers(y0, self.fc.size)
        tail = sum(self.fc[k] * pw[k] * D[k - 1] for k in range(self.fc.size))
        return y0 * dx - tail

    def solve(self, dx, D: dict, t_lo=None, t_hi=None):
        """Curve parameter reaching displacement ``dx`` with interval moments ``D``."""
        dx = np.asarray(dx, dtype=float)
        if self.dc.size == 2:
            return (dx - self.dc[0] * D[0]) / (self.dc[1] * D[1])
        return self._solve_polynomial(dx, D, t_lo, t_hi)

    def _solve_polynomial(self, dx, D, t_lo, t_hi):
        shape = np.broadcast_shapes(np.shape(dx), *(np.shape(v) for v in D.values()))
        dx = np.broadcast_to(dx, shape).ravel()
        Db = {k: np.broadcast_to(v, shape).ravel() for k, v in D.items()}
        dt = Db[0]
        v = np.asarray(self.flux.fprime_inverse(dx / dt), dtype=float)
        if t_lo is not None and t_hi is not None:
            blo, bhi = self.source.beta_range(np.broadcast_to(t_lo, shape).ravel(), np.broadcast_to(t_hi, shape).ravel())
        else:
            blo = np.full(dx.shape, -np.inf)
            bhi = np.full(dx.shape, np.inf)
            span = max(abs(self.source.beta_nodes.min()), abs(self.source.beta_nodes.max())) + 1.0
            blo[:] = -span
            bhi[:] = span
        e1, e2 = v * np.exp(-bhi), v * np.exp(-blo)
        lo = np.minimum(e1, e2)
        hi = np.maximum(e1, e2)
        width = np.maximum(hi - lo, 1e-12 * (1.0 + np.abs(v)))
        lo = lo - 1e-9 * width
        hi = hi + 1e-9 * width
        r = lambda y: self.displacement(y, Db) - dx
        rlo, rhi = r(lo), r(hi)
        for _ in range(200):
            bad_lo = rlo > 0
            bad_hi = rhi < 0
            if not (bad_lo.any() or bad_hi.any()):
                break
            lo = np.where(bad_lo, lo - 2.0 * width, lo)
            hi = np.where(bad_hi, hi + 2.0 * width, hi)
            width = 2.0 * width
            rlo, rhi = r(lo), r(hi)
        else:
            raise HCurveError(
                f"bracket failure: residuals at ends {float(np.max(rlo)):.3g}, {float(np.min(rhi)):.3g}"
            )
        y = 0.5 * (lo + hi)
        for _ in range(100):
            ry = r(y)
            lo = np.where(ry < 0, y, lo)
            hi = np.where(ry < 0, hi, y)
            slope = self.displacement_slope(y, Db)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = y - ry / slope
            inside = (newton > lo) & (newton < hi) & np.isfinite(newton)
            y_new = np.where(inside, newton, 0.5 * (lo + hi))
            if np.all(np.abs(y_new - y) <= 2 * np.finfo(float).eps * (1.0 + np.abs(y))):
                y = y_new
                break
            y = y_new
        return y.reshape(shape)

    # curve extremes
    def monotone_minimum(self, y0, x_lo, t_lo, t_hi, x_hi=None, brange=None):
        """Curve minimum where the sign of X' settles it.

        X' has the sign of ``y0 e^beta - lambda_f``; if that sign is fixed over
        the beta range of the interval the curve is monotone and its minimum
        sits at an end. Returns ``(x_min, theta_min, ambiguous)``; entries
        flagged ambiguous need sampling.
        """
        y0, x_lo, t_lo, t_hi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y0, x_lo, t_lo, t_hi)))
        if x_hi is None:
            x_hi = x_lo + self.displacement(y0, self.between(t_lo, t_hi))
        x_hi = np.broadcast_to(np.asarray(x_hi, dtype=float), y0.shape)
        blo, bhi = brange if brange is not None else self.source.beta_range(t_lo, t_hi)
        e1, e2 = y0 * np.exp(blo), y0 * np.exp(bhi)
        p_lo, p_hi = np.minimum(e1, e2), np.maximum(e1, e2)
        lam = self.flux.lambda_f
        rising = p_lo >= lam
        falling = p_hi <= lam
        lower_end = x_lo <= x_hi
        x_min = np.where(rising, x_lo, np.where(falling, x_hi, np.where(lower_end, x_lo, x_hi)))
        th_min = np.where(rising, t_lo, np.where(falling, t_hi, np.where(lower_end, t_lo, t_hi)))
        return x_min, th_min, ~(rising | falling)

    def sampled_minimum(self, y0, x_lo, t_lo, t_hi, n_samples: int = 256, floor=None):
        """Dense node sampling plus golden refinement (1-D inputs).

        With ``floor`` given, refinement is skipped for curves whose sampled
        minimum already settles ``x_min >= floor`` either way; the returned
        value is then the sampled minimum.
        """
        y0, x_lo, t_lo, t_hi = (np.asarray(v, dtype=float).ravel() for v in np.broadcast_arrays(y0, x_lo, t_lo, t_hi))
        if floor is not None:
            floor = np.broadcast_to(np.asarray(floor, dtype=float), (y0.size,))
        return self._sampled_minimum(y0, x_lo, t_lo, t_hi, n_samples, floor)

    def curvature_bound(self, y0):
        """Upper bound of ``|X''| = |f''(p) p alpha|`` with ``p = y0 e^beta`` over the horizon."""
        src = self.source
        beta_max = float(np.max(src.beta_nodes)) + 0.5 * src.alpha_inf_norm * src._max_cell
        P = np.abs(np.asarray(y0, dtype=float)) * np.exp(beta_max)
        d2 = np.abs(np.polynomial.polynomial.polyder(self.fc, 2))
        f2 = sum(c * P**j for j, c in enumerate(d2))
        return f2 * P * src.alpha_inf_norm

    def curve_minimum(self, y0, x_lo, t_lo, t_hi, n_samples: int = 256):
        """Minimum of X over ``[t_lo, t_hi]`` for many curves at once.

        Returns ``(x_min, theta_min)``.
        """
        y0, x_lo, t_lo, t_hi = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(y0, x_lo, t_lo, t_hi))
        shape = y0.shape
        y0, x_lo, t_lo, t_hi = (v.ravel() for v in (y0, x_lo, t_lo, t_hi))
        x_min, th_min, amb = self.monotone_minimum(y0, x_lo, t_lo, t_hi)
        x_min, th_min = x_min.copy(), th_min.copy()
        idx = np.flatnonzero(amb)
        if idx.size:
            xm, tm = self._sampled_minimum(y0[idx], x_lo[idx], t_lo[idx], t_hi[idx], n_samples)
            better = xm < x_min[idx]
            x_min[idx] = np.where(better, xm, x_min[idx])
            th_min[idx] = np.where(better, tm, th_min[idx])
        return x_min.reshape(shape), th_min.reshape(shape)

    def _positions(self, y0, x_lo, M_lo, theta):
        M = self.moments_at(theta)
        return x_lo + self.displacement(y0, self.diff(M, M_lo))

    def _sampled_minimum(self, y0, x_lo, t_lo, t_hi, n_samples, floor=None, chunk: int = 2048):
        xm = np.empty(y0.size)
        tm = np.empty(y0.size)
        for start in range(0, y0.size, chunk):
            sl = slice(start, start + chunk)
            fl = None if floor is None else floor[sl]
            xm[sl], tm[sl] = self._sampled_minimum_chunk(y0[sl], x_lo[sl], t_lo[sl], t_hi[sl], n_samples, fl)
        return xm, tm

    def _sampled_minimum_chunk(self, y0, x_lo, t_lo, t_hi, n_samples, floor=None):
        grid = self.source.grid
        M_lo = self.moments_at(t_lo)
        i = np.searchsorted(grid, t_lo, side="right")
        j = np.searchsorted(grid, t_hi, side="left") - 1
        count = j - i + 1
        frac = np.linspace(0.0, 1.0, n_samples + 1)
        sparse = count < 16
        # node samples are free: cumulative moments are tabulated there
        idx = i[:, None] + np.rint(frac[None, :] * np.maximum(count - 1, 0)[:, None]).astype(int)
        idx = np.clip(idx, 0, grid.size - 1)
        theta = grid[idx]
        Mn = self.moments_at_nodes(idx)
        X = x_lo[:, None] + self.displacement(y0[:, None], self.diff(Mn, {k: v[:, None] for k, v in M_lo.items()}))
        if sparse.any():
            rows = np.flatnonzero(sparse)
            th = t_lo[rows, None] + frac[None, ::16] * (t_hi - t_lo)[rows, None]
            th = np.broadcast_to(th, (rows.size, th.shape[1]))
            Xs = self._positions(y0[rows, None], x_lo[rows, None], {k: v[rows, None] for k, v in M_lo.items()}, th)
            pad = X.shape[1] - Xs.shape[1]
            X[rows] = np.concatenate([Xs, np.repeat(Xs[:, -1:], pad, axis=1)], axis=1)
            theta[rows] = np.concatenate([th, np.repeat(th[:, -1:], pad, axis=1)], axis=1)
        # add the interval endpoints
        theta = np.concatenate([t_lo[:, None], theta, t_hi[:, None]], axis=1)
        x_hi = x_lo + self.displacement(y0, self.diff(self.moments_at(t_hi), M_lo))
        X = np.concatenate([x_lo[:, None], X, x_hi[:, None]], axis=1)
        X[:, 1:-1] = np.where((theta[:, 1:-1] > t_lo[:, None]) & (theta[:, 1:-1] < t_hi[:, None]), X[:, 1:-1], np.inf)
        best = np.argmin(X, axis=1)
        rows = np.arange(y0.size)
        a = theta[rows, np.maximum(best - 1, 0)]
        b = theta[rows, np.minimum(best + 1, theta.shape[1] - 1)]
        # neighbours may be masked duplicates; fall back to the full interval edges
        a = np.where(np.isfinite(X[rows, np.maximum(best - 1, 0)]), a, t_lo)
        b = np.where(np.isfinite(X[rows, np.minimum(best + 1, theta.shape[1] - 1)]), b, t_hi)
        a = np.minimum(a, theta[rows, best])
        b = np.maximum(b, theta[rows, best])
        x0 = X[rows, best]
        th0 = theta[rows, best]
        refine = np.ones(y0.size, dtype=bool)
        if floor is not None:
            # between samples the curve can dip at most K h^2 / 8 below them
            fin = np.isfinite(X)
            th_f = np.where(fin, theta, np.nan)
            gaps = np.diff(th_f, axis=1)
            h = np.nanmax(np.where(np.isfinite(gaps), gaps, 0.0), axis=1)
            dip = self.curvature_bound(y0) * h**2 / 8.0
            refine = (x0 >= floor) & (x0 - dip < floor)
        if not refine.any():
            return x0, th0
        r = np.flatnonzero(refine)
        M_r = {k: v[r] for k, v in M_lo.items()}
        f = lambda th: self._positions(y0[r], x_lo[r], M_r, th)
        # stop once K * width^2 / 2 is below rounding-level position error
        K = float(np.max(self.curvature_bound(y0[r]), initial=0.0))
        width = float(np.max(b[r] - a[r], initial=0.0))
        need = np.sqrt(2e-12 / K) if K > 0 else 0.0
        iters = 50 if need <= 0 or width <= 0 else int(np.clip(np.ceil(np.log(need / width) / np.log(0.618)), 8, 50))
        th_opt, x_opt = golden_minimize(f, a[r], b[r], iterations=iters)
        use = x_opt < x0[r]
        x0 = x0.copy()
        th0 = th0.copy()
        x0[r] = np.where(use, x_opt, x0[r])
        th0[r] = np.where(use, th_opt, th0[r])
        return x0, th0


def golden_minimize(fn, a, b, iterations: int = 60, xtol: float = 0.0):
    """Vectorized golden-section search on ``[a, b]`` (one bracket per entry)."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = fn(c)
    fd = fn(d)
    for _ in range(iterations):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _GOLDEN * (b - a)
        new_d = a + _GOLDEN * (b - a)
        # reuse the surviving interior point
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fc_old, fd_old = fc, fd
        probe = np.where(left, c, d)
        fp = fn(probe)
        fc = np.where(left, fp, fd_old)
        fd = np.where(left, fc_old, fp)
        if xtol and np.all(b - a <= xtol * (1.0 + np.abs(a))):
            break
    x = np.where(fc < fd, c, d)
    return x, np.minimum(fc, fd)


@dataclass(frozen=True, eq=False)
class HCurveSpec:
    """An h-curve through ``(x_lo, t_lo)`` and ``(x_hi, t_hi)``."""

    y0: float
    t_lo: float
    t_hi: float
    x_lo: float
    x_hi: float
    kind: str
    kernel: CurveKernel = field(repr=False)

    @property
    def flux(self) -> FluxModel:
        return self.kernel.flux

    @property
    def source(self) -> SourceModel:
        return self.kernel.source


def _kind(x_lo: float, t_lo: float) -> str:
    if t_lo == 0.0:
        return "to-initial"
    if x_lo == 0.0:
        return "to-boundary"
    return "interior"


def solve_h(x_hi: float, t_hi: float, x_lo: float, t_lo: float, flux: FluxModel, source: SourceModel,
            kernel: CurveKernel | None = None) -> HCurveSpec:
    """The unique h-curve joining ``(x_lo, t_lo)`` to ``(x_hi, t_hi)``."""
    if not t_lo < t_hi:
        raise ValueError("solve_h needs t_lo < t_hi")
    if not all(np.isfinite(v) for v in (x_hi, t_hi, x_lo, t_lo)):
        raise ValueError("endpoints must be finite")
    kernel = kernel or CurveKernel(flux, source)
    D = kernel.between(t_lo, t_hi)
    dx = x_hi - x_lo
    y0 = float(kernel.solve(dx, D, t_lo, t_hi))
    return HCurveSpec(y0, float(t_lo), float(t_hi), float(x_lo), float(x_hi), _kind(x_lo, t_lo), kernel)


def eval_curve(spec: HCurveSpec, theta):
    """Position of the curve at time(s) ``theta``."""
    th = np.asarray(theta, dtype=float)
    slack = 1e-12 * (1.0 + spec.t_hi)
    if np.any(th < spec.t_lo - slack) or np.any(th > spec.t_hi + slack):
        raise ValueError("theta outside the curve's time interval")
    th = np.clip(th, spec.t_lo, spec.t_hi)
    k = spec.kernel
    D = k.between(np.full(th.shape, spec.t_lo), th)
    out = spec.x_lo + k.displacement(spec.y0, D)
    return float(out) if np.ndim(theta) == 0 else out


def curve_speed(spec: HCurveSpec, theta):
    p = spec.y0 * np.exp(spec.source.beta(theta))
    return spec.flux.fprime(p)


def sample_curve(spec: HCurveSpec, n: int = 65) -> tuple[np.ndarray, np.ndarray]:
    th = np.linspace(spec.t_lo, spec.t_hi, n)
    return th, np.asarray(eval_curve(spec, th))


def curve_min(spec: HCurveSpec, n_samples: int = 256) -> tuple[float, float]:
    """``(theta_min, x_min)`` by dense sampling plus golden refinement."""
    th = np.linspace(spec.t_lo, spec.t_hi, n_samples + 1)
    xs = np.asarray(eval_curve(spec, th))
    i = int(np.argmin(xs))
    a, b = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
    f = lambda s: np.asarray(eval_curve(spec, np.clip(s, spec.t_lo, spec.t_hi)))
    t_opt, x_opt = golden_minimize(f, np.array([a]), np.array([b]), iterations=60)
    if x_opt[0] < xs[i]:
        return float(t_opt[0]), float(x_opt[0])
    return float(th[i]), float(xs[i])


def admissibility_tolerance(x, eps_adm: float = 1e-8):
    return eps_adm * (1.0 + np.abs(x))
