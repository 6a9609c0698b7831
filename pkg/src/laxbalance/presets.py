"""Named problems used by the CLI and the test-suite."""

from __future__ import annotations

import numpy as np

from .flux import FluxModel
from .functional import Problem, Tolerances
from .piecewise import PiecewisePolynomial
from .source import SourceModel

PRESETS = ("zero", "burgers-riemann", "burgers-boundary", "amplified-constant", "example-1-1", "example-1-2")

_DEFAULTS = {
    "zero": (2.0, 4.0),
    "burgers-riemann": (2.0, 4.0),
    "burgers-boundary": (2.0, 2.0),
    "amplified-constant": (1.0, 4.0),
    "example-1-1": (5.0, 30.0),
    "example-1-2": (1.0 / np.pi, 1.0),
}


def oscillating_boundary_data(n_cut: int = 3) -> PiecewisePolynomial:
    """u_b = 60 on (1/(2n pi), 1/((2n-1) pi)), 7204 n(n+1) pi^2 on (1/((2n+1) pi), 1/(2n pi)).

    Below 1/((2N+1) pi) and above 1/pi the datum is 60.
    """
    edges = [1.0 / (k * np.pi) for k in range(2 * n_cut + 1, 0, -1)]
    breaks = [0.0] + edges
    values = [60.0]
    for k in range(2 * n_cut + 1, 1, -1):
        # interval (1/(k pi), 1/((k-1) pi))
        if k % 2:
            n = (k - 1) // 2
            values.append(7204.0 * n * (n + 1) * np.pi**2)
        else:
            values.append(60.0)
    values.append(60.0)
    return PiecewisePolynomial.piecewise_constant(breaks, values)


def preset(name: str, t_max: float | None = None, x_max: float | None = None,
           tol: Tolerances | None = None, n_cut: int = 3) -> Problem:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    d_t, d_x = _DEFAULTS[name]
    t_max = d_t if t_max is None else float(t_max)
    x_max = d_x if x_max is None else float(x_max)
    tol = tol or Tolerances()
    const = PiecewisePolynomial.constant
    burgers = FluxModel.burgers()
    if name == "zero":
        return Problem(burgers, SourceModel.zero(t_max), const(0.0), const(0.0), x_max, name, tol)
    if name == "burgers-riemann":
        u0 = PiecewisePolynomial.piecewise_constant([0.0, 1.0], [1.0, 0.0])
        return Problem(burgers, SourceModel.zero(t_max), u0, const(1.0), x_max, name, tol)
    if name == "burgers-boundary":
        return Problem(burgers, SourceModel.zero(t_max), const(0.0), const(1.0), x_max, name, tol)
    if name == "amplified-constant":
        return Problem(burgers, SourceModel.constant(1.0, t_max), const(1.0), const(1.0), x_max, name, tol)
    shifted = FluxModel.shifted_quadratic(1.0, 60.0)
    if name == "example-1-1":
        src = SourceModel.preset("example-1-1", t_max)
        return Problem(shifted, src, const(10.0), const(10.0), x_max, name, tol)
    src = SourceModel.preset("example-1-2", t_max, n_cut=n_cut)
    return Problem(shifted, src, const(0.0), oscillating_boundary_data(n_cut), x_max, name, tol)
