"""Characteristic lines of the induced conservation law and blow-up time.

Differentiating u_t + H(u_x) = 0 in space turns it into a conservation law
for v = u_x whose characteristics are straight lines x(t) = x0 + a(x0) t
with speed a(x0) = H'(u0'(x0)).  The classical solution survives until the
first crossing,

    t_crit = -1 / min_x d/dx [ H'(u0'(x)) ],

which is computed symbolically-then-numerically by :func:`critical_time`
and cross-checked geometrically by :func:`first_crossing`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import symexpr as sx
from .adomian import ProblemSpec

DEFAULT_SCAN_POINTS = 10_000
DEFAULT_FAN_SIZE = 10_001
_FLAT_TOL = 1e-12
_REFINE_TOL = 1e-10


class ScanError(Exception):
    pass


@dataclass(frozen=True)
class CharLine:
    """The line x(t) = foot + speed * t."""

    foot: float
    speed: float

    def position(self, t: float) -> float:
        return self.foot + self.speed * t


@dataclass(frozen=True)
class CharFan:
    """Characteristic lines ordered by strictly increasing foot."""

    lines: tuple[CharLine, ...]

    def __post_init__(self):
        feet = [ln.foot for ln in self.lines]
        if any(b <= a for a, b in zip(feet, feet[1:])):
            raise ValueError("fan feet must be strictly increasing")

    def __len__(self):
        return len(self.lines)


@dataclass(frozen=True)
class CriticalTimeResult:
    """Outcome of the blow-up time computation.

    ``kind`` is "finite" (then ``t_star`` = -1/slope_min > 0) or "infinite".
    ``x_star`` is the minimizer of d/dx[H'(u0'(x))] over the scanned domain
    and ``slope_min`` the minimum itself.  ``boundary_warning`` flags a
    minimizer within one scan step of the domain edge, where the true
    minimum may lie outside.
    """

    kind: str
    t_star: float
    x_star: float
    slope_min: float
    boundary_warning: bool = False

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


def char_speed(problem: ProblemSpec, x0: float) -> float:
    """Speed H'(u0'(x0)) of the characteristic rooted at x0."""
    h_prime = sx.differentiate(problem.hamiltonian, "v", problem.node_cap)
    u0_prime = sx.differentiate(problem.u0, "x", problem.node_cap)
    v0 = sx.evaluate(u0_prime, {"x": x0})
    return sx.evaluate(h_prime, {"v": v0})


def build_fan(problem: ProblemSpec, n_lines: int = DEFAULT_FAN_SIZE,
              x_min: Optional[float] = None,
              x_max: Optional[float] = None) -> CharFan:
    """Fan of ``n_lines`` equispaced characteristics over the domain."""
    import numpy as np

    if n_lines < 2:
        raise ValueError("a fan needs at least two lines")
    lo = problem.x_min if x_min is None else x_min
    hi = problem.x_max if x_max is None else x_max
    feet = np.linspace(lo, hi, n_lines)
    h_prime = sx.differentiate(problem.hamiltonian, "v", problem.node_cap)
    u0_prime = sx.differentiate(problem.u0, "x", problem.node_cap)
    a_of = sx.lambdify(h_prime, ("v",))
    v_of = sx.lambdify(u0_prime, ("x",))
    speeds = np.asarray(a_of(v_of(feet)), dtype=float)
    if not np.all(np.isfinite(speeds)):
        raise ScanError("characteristic speed not finite somewhere in the fan")
    return CharFan(tuple(CharLine(float(f), float(s))
                         for f, s in zip(feet, speeds)))


def pairwise_crossing(left: CharLine, right: CharLine) -> Optional[float]:
    """Forward-time crossing of two lines, None when they never meet.

    Requires left.foot < right.foot; a crossing exists iff the left line
    is faster.
    """
    if not left.foot < right.foot:
        raise ValueError("lines must be ordered by foot")
    if left.speed > right.speed:
        return (right.foot - left.foot) / (left.speed - right.speed)
    return None


def first_crossing(fan: CharFan) -> Optional[float]:
    """Earliest crossing among adjacent pairs; None if the fan spreads.

    For speeds sampled from a continuous profile the infimum over all pairs
    is attained in the adjacent-pair limit, so only neighbors are tested.
    """
    if len(fan) < 2:
        raise ValueError("a fan needs at least two lines")
    best: Optional[float] = None
    for left, right in zip(fan.lines, fan.lines[1:]):
        t = pairwise_crossing(left, right)
        if t is not None and (best is None or t < best):
            best = t
    return best


def critical_time(problem: ProblemSpec,
                  scan_points: int = DEFAULT_SCAN_POINTS) -> CriticalTimeResult:
    """Blow-up time from the minimum of g(x) = d/dx[H'(u0'(x))].

    The minimum is located by a dense scan over the problem domain followed
    by golden-section refinement; scan points where evaluation leaves the
    real domain are skipped (more than half skipped is an error).  Plateaus
    resolve to the leftmost minimizer.
    """
    import numpy as np

    cap = problem.node_cap
    h_prime = sx.differentiate(problem.hamiltonian, "v", cap)
    speed_of_x = sx.substitute(h_prime, "v",
                               sx.differentiate(problem.u0, "x", cap), cap)
    g = sx.simplify(sx.differentiate(speed_of_x, "x", cap))

    if scan_points < 3:
        raise ValueError("scan needs at least three points")
    xs = np.linspace(problem.x_min, problem.x_max, scan_points)
    with np.errstate(all="ignore"):
        values = np.asarray(sx.lambdify(g, ("x",))(xs), dtype=float)
    ok = np.isfinite(values)
    n_skipped = int((~ok).sum())
    if n_skipped > scan_points // 2:
        raise ScanError(
            f"{n_skipped}/{scan_points} scan points failed to evaluate")

    masked = np.where(ok, values, np.inf)
    best = int(np.argmin(masked))  # argmin takes the leftmost on ties
    step = (problem.x_max - problem.x_min) / (scan_points - 1)

    lo = max(problem.x_min, float(xs[best]) - step)
    hi = min(problem.x_max, float(xs[best]) + step)
    x_star, m_refined = _golden_min(g, lo, hi)
    if masked[best] <= m_refined:
        x_star, slope_min = float(xs[best]), float(masked[best])
    else:
        x_star, slope_min = float(x_star), float(m_refined)

    near_edge = (x_star - problem.x_min <= step
                 or problem.x_max - x_star <= step)
    if slope_min >= -_FLAT_TOL:
        return CriticalTimeResult("infinite", math.inf, x_star, slope_min,
                                  near_edge)
    return CriticalTimeResult("finite", -1.0 / slope_min, x_star, slope_min,
                              near_edge)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(g, lo: float, hi: float) -> tuple[float, float]:
    """Golden-section minimum of g on [lo, hi] to a bracket of _REFINE_TOL."""

    def f(x: float) -> float:
        try:
            return sx.evaluate(g, {"x": x})
        except sx.EvalError:
            return math.inf

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > _REFINE_TOL:
        if fc <= fd:  # keep the left interval on ties: leftmost minimizer
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)
