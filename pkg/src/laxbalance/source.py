"""Source coefficient alpha(t), its antiderivative beta(t) and quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .piecewise import PiecewisePolynomial


class QuadratureError(RuntimeError):
    """Adaptive quadrature exceeded its subdivision budget."""


class HorizonError(ValueError):
    """Time argument outside the cached horizon of a source model."""


def _vectorized(fn: Callable) -> Callable:
    probe = np.array([0.0, 0.0])
    try:
        out = np.asarray(fn(probe), dtype=float)
        if out.shape == probe.shape:
            return fn
    except Exception:
        pass
    vec = np.vectorize(lambda s: float(fn(s)), otypes=[float])
    return vec


def integrate_panels(fn, a, b, tol: float = 1e-9, max_panels: int = 4_000_000) -> np.ndarray:
    """Adaptive Simpson over many panels at once.

    ``fn`` must accept and return 1-D arrays. Each ``[a[i], b[i]]`` is refined
    independently; children inherit half the parent's tolerance.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    a = a.ravel().copy()
    b = b.ravel().copy()
    out = np.zeros(a.size)
    if a.size == 0:
        return out.reshape(shape)
    m = 0.5 * (a + b)
    vals = np.asarray(fn(np.concatenate([a, m, b])), dtype=float)
    fa, fm, fb = np.split(vals, 3)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    ptol = tol * (1.0 + np.abs(whole))
    owner = np.arange(a.size)
    panels = a.size
    while owner.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        fl, fr = np.split(np.asarray(fn(np.concatenate([lm, rm])), dtype=float), 2)
        h = b - a
        left = h / 12.0 * (fa + 4.0 * fl + fm)
        right = h / 12.0 * (fm + 4.0 * fr + fb)
        err = left + right - whole
        tiny = h <= 1e-14 * (1.0 + np.abs(a))
        done = (np.abs(err) <= 15.0 * ptol) | tiny
        np.add.at(out, owner[done], (left + right + err / 15.0)[done])
        keep = ~done
        if not keep.any():
            break
        panels += 2 * int(keep.sum())
        if panels > max_panels:
            worst = int(np.argmax(np.where(keep, np.abs(err), -1.0)))
            raise QuadratureError(
                f"subdivision cap reached; worst panel [{a[worst]:.6g}, {b[worst]:.6g}] "
                f"error estimate {abs(err[worst]):.3g}"
            )
        a, m, b = (
            np.concatenate([a[keep], m[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([m[keep], b[keep]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([fl[keep], fr[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        ptol = np.tile(0.5 * ptol[keep], 2)
        owner = np.tile(owner[keep], 2)
    return out.reshape(shape)


def integrate(fn, a: float, b: float, tol: float = 1e-9, breakpoints=()) -> float:
    """Adaptive Simpson on ``[a, b]`` split at the given breakpoints."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if a > b:
        raise ValueError("integrate requires a <= b")
    if a == b:
        return 0.0
    fn = _vectorized(fn)
    cuts = np.asarray([p for p in breakpoints if a < p < b], dtype=float)
    nodes = np.concatenate([[a], np.sort(cuts), [b]])
    lo, hi = open_cells(nodes[:-1], nodes[1:])
    return float(integrate_panels(fn, lo, hi, tol).sum())


def open_cells(lo, hi):
    """Pull cell ends inward by one ulp so one-sided data is sampled from the cell's own piece."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.nextafter(lo, hi), np.nextafter(hi, lo)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _cell_tail(fn, a, b):
    """Integral over sub-intervals of single cache cells.

    The cells contain no breakpoints of the integrand, so a 10-point
    Gauss-Legendre rule is exact to rounding at cache-cell widths.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ _GL_WEIGHTS)


class _SparseRange:
    """O(1) range min/max over a fixed array."""

    def __init__(self, values: np.ndarray):
        self.mins = [values]
        self.maxs = [values]
        span = 1
        while 2 * span <= values.size:
            lo, hi = self.mins[-1], self.maxs[-1]
            self.mins.append(np.minimum(lo[:-span], lo[span:]))
            self.maxs.append(np.maximum(hi[:-span], hi[span:]))
            span *= 2

    def query(self, i: np.ndarray, j: np.ndarray):
        """Min and max over inclusive index ranges ``[i, j]`` (requires i <= j)."""
        length = j - i + 1
        level = np.floor(np.log2(np.maximum(length, 1))).astype(int)
        lo = np.empty(i.shape)
        hi = np.empty(i.shape)
        for lv in np.unique(level):
            sel = level == lv
            span = 1 << int(lv)
            lo[sel] = np.minimum(self.mins[lv][i[sel]], self.mins[lv][j[sel] - span + 1])
            hi[sel] = np.maximum(self.maxs[lv][i[sel]], self.maxs[lv][j[sel] - span + 1])
        return lo, hi


@dataclass(frozen=True, eq=False)
class SourceModel:
    """alpha(t) on ``[0, t_max]`` with a cached antiderivative and moment tables.

    The moment of order ``k`` is ``M_k(t) = integral_0^t exp(k*beta)``; all
    h-curve displacements and running costs of polynomial fluxes are linear
    combinations of moment differences.
    """

    alpha_fn: Callable
    t_max: float
    breakpoints: tuple = ()
    beta_exact: Callable | None = None
    kind: str = "custom"
    spec: dict | None = None
    tol_quad: float = 1e-9
    cells: int = 4096
    use_closed_form: bool = True
    constant_rate: float | None = None
    grid: np.ndarray = field(init=False, repr=False)
    beta_nodes: np.ndarray = field(init=False, repr=False)
    alpha_inf_norm: float = field(init=False)

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        alpha = _vectorized(self.alpha_fn)
        object.__setattr__(self, "alpha_fn", alpha)
        bps = np.asarray(sorted(p for p in self.breakpoints if 0.0 < p < self.t_max), dtype=float)
        object.__setattr__(self, "breakpoints", tuple(bps.tolist()))
        grid = np.union1d(np.linspace(0.0, self.t_max, self.cells + 1), bps)
        grid = grid[np.concatenate([[True], np.diff(grid) > 1e-13 * self.t_max])]
        grid[-1] = self.t_max
        object.__setattr__(self, "grid", grid)
        if self.beta_exact is not None and self.use_closed_form:
            nodes = np.asarray(self.beta_exact(grid), dtype=float)
            nodes[0] = 0.0
        else:
            cell = integrate_panels(alpha, *open_cells(grid[:-1], grid[1:]), self.tol_quad / self.cells)
            nodes = np.concatenate([[0.0], np.cumsum(cell)])
        object.__setattr__(self, "beta_nodes", nodes)
        mids = 0.5 * (grid[:-1] + grid[1:])
        samples = np.concatenate([grid, mids, np.nextafter(grid[1:], -np.inf)])
        object.__setattr__(self, "alpha_inf_norm", float(np.abs(alpha(samples)).max()))
        object.__setattr__(self, "_range", _SparseRange(nodes))
        object.__setattr__(self, "_moments", {})
        object.__setattr__(self, "_max_cell", float(np.diff(grid).max()))

    # constructors
    @classmethod
    def zero(cls, t_max: float, **kw) -> "SourceModel":
        return cls(
            lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            t_max,
            beta_exact=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            kind="zero",
            spec={"kind": "constant", "value": 0.0},
            constant_rate=0.0,
            **kw,
        )

    @classmethod
    def constant(cls, rate: float, t_max: float, **kw) -> "SourceModel":
        if rate == 0.0:
            return cls.zero(t_max, **kw)
        return cls(
            lambda t: np.full(np.shape(t), float(rate)),
            t_max,
            beta_exact=lambda t: rate * np.asarray(t, dtype=float),
            kind="constant",
            spec={"kind": "constant", "value": float(rate)},
            constant_rate=float(rate),
            **kw,
        )

    @classmethod
    def piecewise_poly(cls, breaks, coeffs, t_max: float, **kw) -> "SourceModel":
        pp = PiecewisePolynomial(np.asarray(breaks, dtype=float), tuple(coeffs))
        return cls(
            pp,
            t_max,
            breakpoints=tuple(pp.interior_breaks),
            beta_exact=lambda t: pp.antiderivative(t) - pp.antiderivative(0.0),
            kind="piecewise_poly",
            spec={"kind": "piecewise_poly", "breaks": pp.breaks.tolist(), "coeffs": [c.tolist() for c in pp.coeffs]},
            **kw,
        )

    @classmethod
    def table(cls, times, values, t_max: float, **kw) -> "SourceModel":
        ts = np.asarray(times, dtype=float)
        vs = np.asarray(values, dtype=float)
        if ts.size < 2 or np.any(np.diff(ts) <= 0) or ts.shape != vs.shape:
            raise ValueError("alpha table needs >= 2 strictly increasing times and matching values")
        # linear pieces between samples, constant extension outside
        breaks = np.concatenate([[ts[0] - 1.0], ts])
        coeffs = [[vs[0]]]
        for i in range(ts.size - 1):
            slope = (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i])
            coeffs.append([vs[i] - slope * ts[i], slope])
        coeffs.append([vs[-1]])
        pp = PiecewisePolynomial(breaks, tuple(coeffs))
        model = cls(
            pp,
            t_max,
            breakpoints=tuple(ts),
            beta_exact=lambda t: pp.antiderivative(t) - pp.antiderivative(0.0),
            kind="table",
            spec={"kind": "table", "times": ts.tolist(), "values": vs.tolist()},
            **kw,
        )
        return model

    @classmethod
    def preset(cls, name: str, t_max: float, **kw) -> "SourceModel":
        if name == "example-1-1":
            return _cubic_log_source(t_max, **kw)
        if name == "example-1-2":
            return _oscillating_source(t_max, **kw)
        raise ValueError(f"unknown alpha preset {name!r}")

    @classmethod
    def from_config(cls, spec: dict, t_max: float, **kw) -> "SourceModel":
        kind = spec.get("kind", "constant")
        if kind == "constant":
            return cls.constant(float(spec.get("value", 0.0)), t_max, **kw)
        if kind == "piecewise_poly":
            return cls.piecewise_poly(spec["breaks"], spec["coeffs"], t_max, **kw)
        if kind == "table":
            return cls.table(spec["times"], spec["values"], t_max, **kw)
        if kind == "preset":
            extra = {k: v for k, v in spec.items() if k not in ("kind", "name")}
            return cls.preset(spec["name"], t_max, **extra, **kw)
        raise ValueError(f"unknown alpha kind {kind!r}")

    # queries
    @property
    def is_zero(self) -> bool:
        return self.constant_rate == 0.0

    def _check_times(self, t) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise HorizonError("time must be nonnegative")
        if np.any(arr > self.t_max * (1 + 1e-12) + 1e-300):
            raise HorizonError(f"time beyond cached horizon t_max={self.t_max}")
        return np.minimum(arr, self.t_max)

    def alpha(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.alpha_fn(arr.ravel()), dtype=float).reshape(arr.shape)
        return float(out) if np.ndim(t) == 0 else out

    def beta(self, t):
        arr = self._check_times(t)
        if self.beta_exact is not None and self.use_closed_form:
            out = np.asarray(self.beta_exact(arr), dtype=float)
        else:
            flat = arr.ravel()
            idx = np.clip(np.searchsorted(self.grid, flat, side="right") - 1, 0, self.grid.size - 1)
            tail = _cell_tail(self.alpha_fn, self.grid[idx], flat)
            out = (self.beta_nodes[idx] + tail).reshape(arr.shape)
        return float(out) if np.ndim(t) == 0 else out

    def beta_range(self, a, b):
        """Lower and upper bounds of beta over ``[a, b]`` (elementwise).

        Node extremes are padded by ``alpha_inf_norm * h / 2`` so that the
        bounds are rigorous between cache nodes.
        """
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        shape = a.shape
        a, b = a.ravel(), b.ravel()
        ba, bb = self.beta(a), self.beta(b)
        lo = np.minimum(ba, bb)
        hi = np.maximum(ba, bb)
        if self.constant_rate is not None:
            return lo.reshape(shape), hi.reshape(shape)
        i = np.searchsorted(self.grid, a, side="left")
        j = np.searchsorted(self.grid, b, side="right") - 1
        inside = i <= j
        if inside.any():
            nlo, nhi = self._range.query(i[inside], j[inside])
            lo[inside] = np.minimum(lo[inside], nlo)
            hi[inside] = np.maximum(hi[inside], nhi)
        pad = 0.5 * self.alpha_inf_norm * self._max_cell
        return (lo - pad).reshape(shape), (hi + pad).reshape(shape)

    def moment_nodes(self, k: int) -> np.ndarray:
        """Cumulative ``M_k`` at the cache grid nodes."""
        cache = self._moments
        if k not in cache:
            cache[k] = self._build_moment_nodes(k)
        return cache[k]

    def prepare_moments(self, orders) -> None:
        for k in orders:
            self.moment_nodes(int(k))

    def _build_moment_nodes(self, k: int) -> np.ndarray:
        if k == 0 or self.constant_rate is not None:
            return self._closed_moment(k, self.grid)
        fn = lambda s: np.exp(k * self.beta(s))
        cell = integrate_panels(fn, *open_cells(self.grid[:-1], self.grid[1:]), self.tol_quad / self.cells)
        return np.concatenate([[0.0], np.cumsum(cell)])

    def _closed_moment(self, k: int, t: np.ndarray) -> np.ndarray:
        rate = 0.0 if k == 0 else self.constant_rate * k
        if rate == 0.0:
            return np.array(t, dtype=float)
        return np.expm1(rate * t) / rate

    def moment(self, k: int, t):
        """``M_k(t) = integral_0^t exp(k*beta)``."""
        arr = self._check_times(t)
        if k == 0 or self.constant_rate is not None:
            out = self._closed_moment(k, arr)
        else:
            nodes = self.moment_nodes(k)
            flat = arr.ravel()
            idx = np.clip(np.searchsorted(self.grid, flat, side="right") - 1, 0, self.grid.size - 1)
            fn = lambda s: np.exp(k * self.beta(s))
            tail = _cell_tail(fn, self.grid[idx], flat)
            out = (nodes[idx] + tail).reshape(arr.shape)
        return float(out) if np.ndim(t) == 0 else out

    def moment_between(self, k: int, a, b):
        """``integral_a^b exp(k*beta)``; closed form when alpha is constant."""
        if self.constant_rate is not None and k != 0 and self.constant_rate != 0.0:
            a = self._check_times(a)
            b = self._check_times(b)
            rate = self.constant_rate * k
            out = np.exp(rate * a) * np.expm1(rate * (b - a)) / rate
            return float(out) if np.ndim(out) == 0 else out
        if k == 0 or self.constant_rate == 0.0:
            out = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
            return float(out) if np.ndim(out) == 0 else out
        return np.subtract(self.moment(k, b), self.moment(k, a))

    def to_config(self) -> dict:
        return dict(self.spec or {"kind": self.kind})


def _cubic_log_source(t_max: float, **kw) -> SourceModel:
    """alpha = p'/p with p = 4t^3 - 30t^2 + 70t + 10, so beta = ln(p/10)."""
    p = np.array([10.0, 70.0, -30.0, 4.0])
    dp = P.polyder(p)

    def alpha(t):
        return P.polyval(t, dp) / P.polyval(t, p)

    def beta(t):
        return np.log(P.polyval(t, p) / 10.0)

    return SourceModel(alpha, t_max, beta_exact=beta, kind="example-1-1", spec={"kind": "preset", "name": "example-1-1"}, **kw)


def _oscillating_source(t_max: float, n_cut: int = 3, **kw) -> SourceModel:
    """alpha = g''/(60 + g') with g = (t sin(1/t))**4 on [1/((2N+1)pi), 1/pi].

    Outside that window alpha vanishes. g' is zero at both window ends, so
    beta = ln(1 + g'/60) inside and 0 elsewhere is continuous.
    """
    lo = 1.0 / ((2 * n_cut + 1) * np.pi)
    hi = 1.0 / np.pi

    def parts(t):
        inv = 1.0 / t
        s = t * np.sin(inv)
        ds = np.sin(inv) - np.cos(inv) * inv
        d2s = -np.sin(inv) * inv**3
        g1 = 4.0 * s**3 * ds
        g2 = 12.0 * s**2 * ds**2 + 4.0 * s**3 * d2s
        return g1, g2

    def alpha(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        inside = (t >= lo) & (t <= hi)
        if inside.any():
            g1, g2 = parts(t[inside])
            out[inside] = g2 / (60.0 + g1)
        return out

    def beta(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        inside = (t > lo) & (t < hi)
        if inside.any():
            g1, _ = parts(t[inside])
            out[inside] = np.log1p(g1 / 60.0)
        return out

    return SourceModel(
        alpha,
        t_max,
        breakpoints=(lo, hi),
        beta_exact=beta,
        kind="example-1-2",
        spec={"kind": "preset", "name": "example-1-2", "n_cut": n_cut},
        **kw,
    )
