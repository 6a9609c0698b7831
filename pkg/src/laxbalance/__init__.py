"""Variational solver for u_t + f(u)_x = alpha(t) u on the quarter plane."""

from .boundary import BoundaryTable, bln_check, build_table, classify, effective_boundary, three_piece_value
from .characteristics import (
    CharTriangle,
    build_triangle,
    char_speed,
    check_triangle_lemma,
    entropy_check,
    monotonicity_check,
    non_intersection_check,
    trace,
)
from .flux import FluxError, FluxModel
from .functional import (
    InfeasibleError,
    Problem,
    Tolerances,
    A_functional,
    B_functional,
    dpp_residual,
    is_admissible_boundary,
    is_admissible_initial,
    minimize_A,
    minimize_B,
    value,
)
from .hcurve import curve_min, eval_curve, solve_h
from .oracle import FVConfig, godunov_flux, l1_distance
from .oracle import run as run_oracle
from .piecewise import PiecewisePolynomial
from .presets import PRESETS, preset
from .solver import SolutionField, SolutionSample, boundary_trace, solve_grid, solve_point, weak_residual
from .source import SourceModel

__version__ = "0.1.0"
