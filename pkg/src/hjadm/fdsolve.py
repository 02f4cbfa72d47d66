"""Monotone Lax-Friedrichs-type reference solver for u_t + H(u_x) = 0.

The update is the classic central-slope scheme with linear artificial
viscosity,

    u_j <- u_j - dt H((u_{j+1}-u_{j-1})/(2 dx))
               + (dt a / 2) (u_{j+1} - 2 u_j + u_{j-1}) / dx,

monotone when a bounds |H'| over the realized slopes and dt a / dx <= 1/2.
It certifies series partial sums before the blow-up time and exhibits
their divergence after.

Boundary closures: ``periodic`` identifies the two endpoints; ``linear``
ghosts continue the boundary slope (stable indefinitely, exact on affine
data); ``quadratic`` ghosts continue the slope's trend (exact on quadratic
data, which a truncated domain otherwise feeds back as O(1) inflow error;
the price is a weak roundoff amplification over very long runs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import symexpr as sx
from .adomian import ADMSeries, ProblemSpec, partial_sum_grid
from .characteristics import critical_time

BOUNDARY_MODES = ("periodic", "linear", "quadratic")
_PERIODIC_MATCH_TOL = 1e-9
_ALPHA_FLOOR = 1e-12


class FdError(Exception):
    pass


class CflError(FdError):
    pass


class NumericsError(FdError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} at step {step}")
        self.step = step


class GridError(FdError):
    pass


class MissingSnapshotError(FdError):
    pass


class WindowError(FdError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform nodes x_min + j dx, j = 0..n_nodes-1, inclusive of x_max."""

    x_min: float
    x_max: float
    n_nodes: int
    boundary: str = "linear"

    def __post_init__(self):
        if self.n_nodes < 3:
            raise GridError("grid needs at least three nodes")
        if not self.x_min < self.x_max:
            raise GridError(f"degenerate grid [{self.x_min}, {self.x_max}]")
        if self.boundary not in BOUNDARY_MODES:
            raise GridError(f"unknown boundary mode '{self.boundary}'")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_nodes - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_nodes)


@dataclass
class GridSolution:
    """Snapshots of one solve: strictly increasing times from 0."""

    grid: Grid
    problem: ProblemSpec
    times: list[float]
    values: list[np.ndarray]
    cfl: float
    alpha: float  # final (largest) viscosity coefficient used
    steps: int = 0

    def at(self, t: float) -> np.ndarray:
        tol = 1e-12 * max(1.0, abs(t))
        for ts, vs in zip(self.times, self.values):
            if abs(ts - t) <= tol:
                return vs
        raise MissingSnapshotError(f"no snapshot at t={t}; have {self.times}")


@dataclass(frozen=True)
class CompareRow:
    time: float
    order: int
    sup_diff: float
    rms_diff: float
    past_critical: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[CompareRow, ...]
    t_star: float


def _extend(u: np.ndarray, mode: str) -> np.ndarray:
    if mode == "periodic":
        # node n-1 duplicates node 0; neighbors wrap over the open core
        return np.concatenate((u[-2:-1], u, u[1:2]))
    if mode == "quadratic":
        ghost_l = 3.0 * u[0] - 3.0 * u[1] + u[2]
        ghost_r = 3.0 * u[-1] - 3.0 * u[-2] + u[-3]
    else:
        ghost_l = 2.0 * u[0] - u[1]
        ghost_r = 2.0 * u[-1] - u[-2]
    return np.concatenate(([ghost_l], u, [ghost_r]))


def _slopes(u: np.ndarray, dx: float, mode: str) -> np.ndarray:
    ue = _extend(u, mode)
    return (ue[2:] - ue[:-2]) / (2.0 * dx)


def lf_step(values: np.ndarray, problem: ProblemSpec, grid: Grid, dt: float,
            alpha: float, h_fn=None) -> np.ndarray:
    """One explicit step of the scheme; ``h_fn`` may carry a compiled H."""
    dx = grid.dx
    if dt * alpha / dx > 0.5 + 1e-12:
        raise CflError(
            f"dt*alpha/dx = {dt * alpha / dx:.3g} violates the 1/2 bound")
    if h_fn is None:
        h_fn = sx.lambdify(problem.hamiltonian, ("v",))
    ue = _extend(np.asarray(values, dtype=float), grid.boundary)
    slopes = (ue[2:] - ue[:-2]) / (2.0 * dx)
    second = ue[2:] - 2.0 * ue[1:-1] + ue[:-2]
    with np.errstate(all="ignore"):
        out = values - dt * h_fn(slopes) + (dt * alpha / 2.0) * second / dx
    if grid.boundary == "periodic":
        out[-1] = out[0]
    if not np.all(np.isfinite(out)):
        raise NumericsError("non-finite nodal value", step=-1)
    return out


def sample_initial(problem: ProblemSpec, grid: Grid) -> np.ndarray:
    xs = grid.nodes()
    u0 = np.asarray(sx.lambdify(problem.u0, ("x",))(xs), dtype=float)
    if not np.all(np.isfinite(u0)):
        raise GridError("u0 is not finite on the grid")
    if grid.boundary == "periodic":
        if abs(u0[0] - u0[-1]) > _PERIODIC_MATCH_TOL:
            raise GridError(
                f"periodic grid needs u0(x_min) = u0(x_max); "
                f"got difference {u0[0] - u0[-1]:.3g}")
        u0[-1] = u0[0]
    return u0


def solve(problem: ProblemSpec, grid: Grid, t_end: float, cfl: float = 0.5,
          snapshot_times: Optional[Sequence[float]] = None) -> GridSolution:
    """March to ``t_end`` with dt = cfl dx / (2 alpha).

    ``alpha`` starts from a slope scan of u0 and is refreshed each step
    from the realized discrete slopes, never decreasing, which keeps the
    monotonicity bound without an a-priori slope estimate.  Snapshots land
    exactly on the requested times by shortening the final step into each.
    """
    if not 0.0 < cfl <= 1.0:
        raise CflError(f"cfl must be in (0, 1], got {cfl}")
    if t_end < 0.0:
        raise FdError("t_end must be non-negative")

    requested = sorted(set(float(t) for t in (snapshot_times or [])) | {float(t_end)})
    for t in requested:
        if t < 0.0 or t > t_end + 1e-12:
            raise FdError(f"snapshot time {t} outside [0, {t_end}]")

    u = sample_initial(problem, grid)
    times = [0.0]
    values = [u.copy()]

    h_fn = sx.lambdify(problem.hamiltonian, ("v",))
    hp_fn = sx.lambdify(
        sx.differentiate(problem.hamiltonian, "v", problem.node_cap), ("v",))
    dx = grid.dx

    def slope_bound(current: np.ndarray) -> float:
        with np.errstate(all="ignore"):
            speeds = np.abs(hp_fn(_slopes(current, dx, grid.boundary)))
        bound = float(np.max(speeds))
        if not math.isfinite(bound):
            raise NumericsError("characteristic speed scan not finite", step)
        return bound

    step = 0
    alpha = max(slope_bound(u), _ALPHA_FLOOR)
    t = 0.0
    for target in requested:
        if target == 0.0:
            continue
        while t < target:
            dt = cfl * dx / (2.0 * alpha)
            landed = False
            if t + dt >= target - 1e-15 * max(1.0, target):
                dt = target - t
                landed = True
            try:
                u = lf_step(u, problem, grid, dt, alpha, h_fn=h_fn)
            except NumericsError as err:
                raise NumericsError("non-finite nodal value", step) from err
            step += 1
            t = target if landed else t + dt
            alpha = max(alpha, slope_bound(u), _ALPHA_FLOOR)
        times.append(target)
        values.append(u.copy())

    return GridSolution(grid, problem, times, values, cfl, alpha, step)


def compare(sol: GridSolution, series: ADMSeries, order: int,
            times: Sequence[float]) -> ComparisonReport:
    """Sup and RMS distance between the grid solution and a partial sum.

    Rows tag each time against the problem's blow-up time.  In non-periodic
    mode the comparison trims a window of width 2 t alpha from each end so
    boundary-layer error never enters the metric.
    """
    tc = critical_time(series.problem)
    t_star = tc.t_star if tc.is_finite else math.inf

    xs = sol.grid.nodes()
    rows = []
    for t in times:
        u_fd = sol.at(t)
        if sol.grid.boundary == "periodic":
            mask = np.ones(len(xs), dtype=bool)
        else:
            trim = 2.0 * t * sol.alpha
            mask = (xs >= sol.grid.x_min + trim) & (xs <= sol.grid.x_max - trim)
            if int(mask.sum()) < 3:
                raise WindowError(
                    f"interior window empty at t={t} (trim {trim:.3g})")
        u_adm = partial_sum_grid(series, order, xs[mask], t)
        diff = np.abs(u_fd[mask] - u_adm)
        rows.append(CompareRow(
            time=float(t),
            order=order,
            sup_diff=float(np.max(diff)),
            rms_diff=float(np.sqrt(np.mean(diff * diff))),
            past_critical=bool(t > t_star),
        ))
    return ComparisonReport(tuple(rows), t_star)
