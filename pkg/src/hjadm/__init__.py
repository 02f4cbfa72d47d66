"""Adomian series machinery for scalar Hamilton-Jacobi equations.

The package solves u_t + H(u_x) = 0 three complementary ways: a separable
power series in t built from Adomian polynomials, straight-line
characteristics of the induced conservation law (giving the blow-up time
that bounds where the series is useful), and a monotone finite-difference
scheme that serves as the numerical reference.
"""

__version__ = "0.1.0"

from .symexpr import (
    DEFAULT_NODE_CAP,
    DomainError,
    EvalError,
    Expr,
    NodeCapExceeded,
    ParseError,
    SymExprError,
    UnboundVariableError,
    differentiate,
    evaluate,
    lambdify,
    parse,
    simplify,
    substitute,
    to_text,
)
from .adomian import (
    ADMSeries,
    AbstractPoly,
    ProblemSpec,
    RadiusEstimate,
    build_series,
    compositions,
    estimate_radius,
    multinomial_weight,
    oracle_polynomial,
    partial_sum_eval,
    partial_sum_expr,
    partial_sum_grid,
    recursion_polynomial,
    residual,
    theorem1_polynomial,
)
from .characteristics import (
    CharFan,
    CharLine,
    CriticalTimeResult,
    build_fan,
    char_speed,
    critical_time,
    first_crossing,
    pairwise_crossing,
)
from .fdsolve import (
    CflError,
    CompareRow,
    ComparisonReport,
    FdError,
    Grid,
    GridSolution,
    NumericsError,
    compare,
    lf_step,
    sample_initial,
    solve,
)
from .cli import ConfigError, RunConfig, RunManifest, load_config, run

__all__ = [name for name in dir() if not name.startswith("_")]
