"""First-order Godunov finite-volume reference for u_t + f(u)_x = alpha(t) u."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .flux import FluxModel
from .functional import Problem
from .solver import SolutionField


@dataclass(frozen=True)
class FVConfig:
    cells: int = 800
    cfl: float = 0.45
    x_max: float | None = None
    t_max: float | None = None
    output_times: tuple = ()
    dt: float | None = None

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError("oracle needs at least two cells")
        if not 0 < self.cfl <= 1:
            raise ValueError("CFL number must lie in (0, 1]")


def godunov_flux(a, b, flux: FluxModel):
    """Exact Riemann flux for convex f: min of f on [a, b] if a <= b, else max of f on [b, a]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    rising = flux.f(np.clip(flux.lambda_f, lo, hi))
    falling = np.maximum(flux.f(a), flux.f(b))
    out = np.where(a <= b, rising, falling)
    return float(out) if out.ndim == 0 else out


def cell_averages(problem: Problem, edges: np.ndarray) -> np.ndarray:
    U = np.asarray(problem.u0.antiderivative(edges))
    return np.diff(U) / np.diff(edges)


def run(problem: Problem, config: FVConfig) -> SolutionField:
    """March to each output time; u at cell centres, other columns left empty."""
    x_max = problem.x_max if config.x_max is None else config.x_max
    t_max = problem.t_max if config.t_max is None else config.t_max
    times = np.sort(np.asarray(config.output_times or (t_max,), dtype=float))
    if times[-1] > t_max * (1 + 1e-12) or times[0] < 0:
        raise ValueError("output times outside the oracle horizon")
    edges = np.linspace(0.0, x_max, config.cells + 1)
    dx = edges[1] - edges[0]
    centres = 0.5 * (edges[:-1] + edges[1:])
    u = cell_averages(problem, edges)
    flux = problem.flux
    src = problem.source
    out = np.empty((times.size, centres.size))
    t = 0.0
    warned = False
    for j, t_out in enumerate(times):
        while t < t_out - 1e-14 * (1.0 + t_out):
            ghost = float(problem.ub_bar(t))
            speed = max(float(np.max(np.abs(flux.fprime(u)))), abs(float(flux.fprime(ghost))), 1e-12)
            dt_cfl = config.cfl * dx / speed
            dt = dt_cfl
            if config.dt is not None:
                dt = config.dt
                if dt > dt_cfl:
                    if not warned:
                        warnings.warn(f"oracle step {dt:g} violates CFL; reduced to {dt_cfl:g}", RuntimeWarning)
                        warned = True
                    dt = dt_cfl
            dt = min(dt, t_out - t)
            ghost = float(problem.ub_bar(t + 0.5 * dt))
            ext = np.concatenate([[ghost], u, [u[-1]]])
            F = godunov_flux(ext[:-1], ext[1:], flux)
            u = u - dt / dx * (F[1:] - F[:-1])
            if not src.is_zero:
                u = u * np.exp(src.beta(t + dt) - src.beta(t))
            t += dt
        out[j] = u
    nan = np.full(out.shape, np.nan)
    return SolutionField(centres, times, out, nan.copy(), np.full(out.shape, -1), nan.copy(), nan.copy(),
                         nan.copy(), nan.copy(), nan.copy(), [], [])


def l1_distance(field_a: SolutionField, field_b: SolutionField, region=None, relative: bool = False) -> float:
    """Largest cell-weighted L1 difference over matched output times.

    ``field_a`` is sampled at ``field_b``'s x-grid by linear interpolation
    (exact when both share cell centres). With ``relative`` the distance is
    divided by the L1 norm of ``field_b``.
    """
    xb = np.asarray(field_b.xs, dtype=float)
    xa = np.asarray(field_a.xs, dtype=float)
    w = np.gradient(xb) if xb.size > 1 else np.ones(1)
    lo, hi = (xb[0], xb[-1]) if region is None else region
    reach_lo = max(xa[0], xb[0]) - 0.5 * w[0] - 1e-12
    reach_hi = min(xa[-1], xb[-1]) + 0.5 * w[-1] + 1e-12
    if lo >= hi or lo < reach_lo or hi > reach_hi:
        raise ValueError("region is not covered by both fields")
    mask = (xb >= lo - 1e-12) & (xb <= hi + 1e-12)
    worst, matched = 0.0, 0
    for jb, t in enumerate(field_b.ts):
        ja = np.flatnonzero(np.abs(np.asarray(field_a.ts) - t) <= 1e-12 * (1.0 + abs(t)))
        if not ja.size:
            continue
        matched += 1
        ua = np.interp(xb, xa, field_a.u[ja[0]])
        d = float(np.sum(np.abs(ua - field_b.u[jb])[mask] * w[mask]))
        if relative:
            d /= max(float(np.sum(np.abs(field_b.u[jb])[mask] * w[mask])), 1e-300)
        worst = max(worst, d)
    if not matched:
        raise ValueError("fields share no output time")
    return worst
