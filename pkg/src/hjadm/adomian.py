"""Adomian series construction for u_t + H(u_x) = 0.

The solution is expanded as u = sum_n u_n with u_n(x,t) = c_n(x) t^n/n!,
where the spatial coefficients c_n come from instantiating the Adomian
polynomials of H at the derivatives of the lower-order coefficients and
integrating in time (the time integral of A_n picks up the sign of
u_t = -H(u_x), so c_{n+1} collects a global minus).

Three independent generators produce the abstract polynomials:

* :func:`theorem1_polynomial` sums over integer compositions with 1/k!
  weights,
* :func:`recursion_polynomial` runs the derivative recurrence
  A_{n+1} = 1/(n+1) * sum_k (k+1) w_{k+1} dA_n/dw_k,
* :func:`oracle_polynomial` differentiates H(sum_i lambda^i w_i) n times
  in lambda and reads the constant term.

All three must agree exactly; the test suite holds them against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from . import symexpr as sx
from .symexpr import Expr

DEFAULT_TERMS = 4

# A monomial of an abstract polynomial is H^(k) * w_{p_1} * ... * w_{p_k},
# keyed by (k, sorted subscript tuple) with an exact rational coefficient.
MonomialKey = tuple[int, tuple[int, ...]]


class SeriesError(Exception):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """One initial-value problem u_t + H(u_x) = 0, u(x,0) = u0(x).

    ``hamiltonian`` is an expression in ``v`` (standing for u_x), ``u0``
    an expression in ``x``.  The sign printed in ``hamiltonian`` is taken
    verbatim; there is no separate orientation flag.
    """

    hamiltonian: Expr
    u0: Expr
    x_min: float
    x_max: float
    node_cap: int = sx.DEFAULT_NODE_CAP

    def __post_init__(self):
        extra_h = self.hamiltonian.free_vars - {"v"}
        if extra_h:
            raise ValueError(f"hamiltonian may only use 'v', found {sorted(extra_h)}")
        extra_u = self.u0.free_vars - {"x"}
        if extra_u:
            raise ValueError(f"u0 may only use 'x', found {sorted(extra_u)}")
        if not self.x_min < self.x_max:
            raise ValueError(f"degenerate domain [{self.x_min}, {self.x_max}]")


def compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Ordered k-tuples of positive integers summing to n, lexicographic.

    Yields exactly C(n-1, k-1) tuples.
    """
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")

    def rec(remaining: int, parts: int, prefix: tuple[int, ...]):
        if parts == 1:
            yield prefix + (remaining,)
            return
        for first in range(1, remaining - parts + 2):
            yield from rec(remaining - first, parts - 1, prefix + (first,))

    return rec(n, k, ())


@dataclass(frozen=True)
class AbstractPoly:
    """Adomian polynomial A_n over indeterminates w_0..w_n.

    ``terms`` maps (k, subscripts) -> rational coefficient, where k is the
    derivative order of H and the subscripts are sorted with multiplicity.
    """

    order: int
    terms: Mapping[MonomialKey, Fraction]

    @staticmethod
    def from_terms(order: int, terms: dict) -> "AbstractPoly":
        cleaned = {
            (k, tuple(subs)): Fraction(c)
            for (k, subs), c in sorted(terms.items())
            if c != 0
        }
        return AbstractPoly(order, cleaned)

    def is_homogeneous(self) -> bool:
        """Every monomial has k factors whose subscripts sum to the order."""
        for (k, subs), _ in self.terms.items():
            if len(subs) != k or sum(subs) != self.order:
                return False
            if any(p < 1 for p in subs):
                return False
        return True

    def evaluate(self, h_derivs: Sequence[float], w: Sequence[float]) -> float:
        """Numeric value given H^(k)(w_0) values and w_0..w_n values."""
        total = 0.0
        for (k, subs), c in self.terms.items():
            prod = float(c) * h_derivs[k]
            for p in subs:
                prod *= w[p]
            total += prod
        return total

    def __eq__(self, other):
        if not isinstance(other, AbstractPoly):
            return NotImplemented
        return self.order == other.order and dict(self.terms) == dict(other.terms)


def theorem1_polynomial(n: int) -> AbstractPoly:
    """A_n as the composition sum: A_0 = H^(0); for n >= 1

    A_n = sum_{k=1..n} 1/k! sum_{p_1+...+p_k=n} H^(k) w_{p_1}...w_{p_k}.

    Ordered compositions landing on the same multiset merge, so the stored
    coefficient of a monomial is its multiset multiplicity over k!.
    """
    if n < 0:
        raise ValueError("order must be non-negative")
    if n == 0:
        return AbstractPoly.from_terms(0, {(0, ()): Fraction(1)})
    terms: dict[MonomialKey, Fraction] = {}
    for k in range(1, n + 1):
        weight = Fraction(1, math.factorial(k))
        for comp in compositions(n, k):
            key = (k, tuple(sorted(comp)))
            terms[key] = terms.get(key, Fraction(0)) + weight
    return AbstractPoly.from_terms(n, terms)


def _poly_w_derivative(terms: dict, m: int) -> dict:
    """Formal d/dw_m; differentiating through the evaluation point w_0
    bumps H^(k) to H^(k+1)."""
    out: dict[MonomialKey, Fraction] = {}

    def acc(key, c):
        out[key] = out.get(key, Fraction(0)) + c

    for (k, subs), c in terms.items():
        count = subs.count(m)
        if count:
            reduced = list(subs)
            reduced.remove(m)
            acc((k, tuple(reduced)), c * count)
        if m == 0:
            acc((k + 1, subs), c)
    return out


def recursion_polynomial(n: int) -> AbstractPoly:
    """A_n by the derivative recurrence, normalized by 1/(n+1) per step.

    The recurrence A_{m+1} = 1/(m+1) sum_{k=0..m} (k+1) w_{k+1} dA_m/dw_k
    seeded with A_0 = H^(0) reproduces the composition form exactly.
    """
    if n < 1:
        raise ValueError("recurrence starts at order 1")
    terms: dict[MonomialKey, Fraction] = {(0, ()): Fraction(1)}
    for m in range(n):
        nxt: dict[MonomialKey, Fraction] = {}
        for k in range(m + 1):
            d = _poly_w_derivative(terms, k)
            for (eta, subs), c in d.items():
                key = (eta, tuple(sorted(subs + (k + 1,))))
                w = c * (k + 1)
                nxt[key] = nxt.get(key, Fraction(0)) + w
        terms = {key: c / (m + 1) for key, c in nxt.items() if c != 0}
    return AbstractPoly.from_terms(n, terms)


def oracle_polynomial(n: int) -> AbstractPoly:
    """A_n read off from n lambda-derivatives of H(sum_i lambda^i w_i).

    Terms are triples (k, subscripts, lambda power); differentiation either
    pulls one w_i out of the inner series (chain rule, bumping k) or lowers
    the lambda power.  Setting lambda = 0 keeps the power-zero terms and the
    evaluation point of H stays at w_0.  Intended as a test oracle; cost
    grows quickly, so orders above 8 are rejected.
    """
    if n < 0:
        raise ValueError("order must be non-negative")
    if n > 8:
        raise ValueError("oracle limited to order <= 8")
    # (k, subs, lambda_power) -> coefficient
    state = {(0, (), 0): Fraction(1)}
    for _ in range(n):
        nxt: dict = {}

        def acc(key, c):
            nxt[key] = nxt.get(key, Fraction(0)) + c

        for (k, subs, j), c in state.items():
            for i in range(1, n + 1):
                acc((k + 1, tuple(sorted(subs + (i,))), j + i - 1), c * i)
            if j >= 1:
                acc((k, subs, j - 1), c * j)
        state = {key: c for key, c in nxt.items() if c != 0}
    terms = {
        (k, subs): c / math.factorial(n)
        for (k, subs, j), c in state.items()
        if j == 0
    }
    return AbstractPoly.from_terms(n, terms)


def multinomial_weight(subs: Sequence[int]) -> Fraction:
    """n!/(p_1!...p_k!) for the monomial's subscripts, n = sum."""
    n = sum(subs)
    denom = 1
    for p in subs:
        denom *= math.factorial(p)
    return Fraction(math.factorial(n), denom)


@dataclass
class ADMSeries:
    """Spatial coefficients c_0..c_N with cached x-derivatives.

    The n-th series term is c_n(x) * t^n / n!.  ``finite_from`` is set when
    construction proved every coefficient from that index on is identically
    zero (the series is a finite sum); ``truncated_at`` when the node cap
    stopped construction early and the caller opted into a partial result.
    """

    problem: ProblemSpec
    coeffs: list[Expr]
    dcoeffs: list[Expr]
    finite_from: int | None = None
    truncated_at: int | None = None
    _residual_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_terms(self) -> int:
        return len(self.coeffs) - 1

    def term_expr(self, n: int) -> Expr:
        return self.coeffs[n]


def build_series(problem: ProblemSpec, n_terms: int = DEFAULT_TERMS,
                 allow_truncation: bool = False) -> ADMSeries:
    """Construct the first ``n_terms`` coefficients beyond u0.

    c_0 = u0 and c_{n+1} instantiates the order-n polynomial with
    w_p -> c_p', H^(k) -> H^(k)(u0'), each monomial carrying its
    multinomial weight, under the global minus of u_t = -H(u_x).

    Hitting the node cap at some order is an error reporting that order;
    with ``allow_truncation`` the orders built so far are returned instead
    (``truncated_at`` records where construction stopped).
    """
    if n_terms < 0:
        raise ValueError("term count must be non-negative")
    cap = problem.node_cap
    x = "x"
    u0 = problem.u0
    coeffs = [u0]
    dcoeffs = [sx.simplify(sx.differentiate(u0, x, cap))]

    # H^(k)(u0') built lazily; order n consumes k = 0..n
    h_raw = [problem.hamiltonian]
    h_at = [sx.simplify(sx.substitute(problem.hamiltonian, "v", dcoeffs[0], cap))]

    finite_from = None
    truncated_at = None
    for n in range(n_terms):
        try:
            while len(h_at) <= n:
                h_raw.append(sx.simplify(sx.differentiate(h_raw[-1], "v", cap)))
                h_at.append(sx.simplify(sx.substitute(h_raw[-1], "v",
                                                      dcoeffs[0], cap)))
            poly = theorem1_polynomial(n)
            term_sum: Expr | None = None
            for (k, subs), c in poly.terms.items():
                weight = c * multinomial_weight(subs)
                piece = sx.mul(sx.const(weight), h_at[k])
                for p in subs:
                    piece = sx.mul(piece, dcoeffs[p])
                term_sum = piece if term_sum is None else sx.add(term_sum, piece)
            nxt = sx.simplify(sx.neg(term_sum))
            sx.ensure_cap(nxt, cap, f"building series coefficient {n + 1}")
            d_nxt = sx.simplify(sx.differentiate(nxt, x, cap))
        except sx.NodeCapExceeded as err:
            if allow_truncation:
                truncated_at = n + 1
                break
            raise sx.NodeCapExceeded(err.size, err.cap,
                                     f"series order {n + 1}") from err
        coeffs.append(nxt)
        dcoeffs.append(d_nxt)
        if sx.is_zero(nxt) and all(sx.is_zero(d) for d in dcoeffs[1:]):
            # every later coefficient is built purely from these derivatives
            finite_from = n + 1
            zero = sx.const(0)
            while len(coeffs) <= n_terms:
                coeffs.append(zero)
                dcoeffs.append(zero)
            break

    return ADMSeries(problem, coeffs, dcoeffs, finite_from,
                     truncated_at=truncated_at)


def partial_sum_eval(series: ADMSeries, order: int, x: float, t: float) -> float:
    """Value of sum_{n<=order} c_n(x) t^n/n! (fixed left-to-right order)."""
    _check_order(series, order)
    total = 0.0
    t_pow = 1.0
    fact = 1.0
    for n in range(order + 1):
        if n > 0:
            t_pow *= t
            fact *= n
        try:
            c = sx.evaluate(series.coeffs[n], {"x": x})
        except sx.EvalError as err:
            raise sx.DomainError(f"series term {n} at x={x}: {err}",
                                 series.coeffs[n]) from err
        total += c * t_pow / fact
    return total


def partial_sum_grid(series: ADMSeries, order: int, xs, t: float):
    """Vectorized partial sum on an array of x values."""
    import numpy as np

    _check_order(series, order)
    xs = np.asarray(xs, dtype=float)
    total = np.zeros_like(xs)
    fact = 1.0
    for n in range(order + 1):
        if n > 0:
            fact *= n
        fn = sx.lambdify(series.coeffs[n], ("x",))
        total = total + np.asarray(fn(xs), dtype=float) * t ** n / fact
    return total


def partial_sum_expr(series: ADMSeries, order: int) -> Expr:
    """The partial sum as a symbolic expression in x and t."""
    _check_order(series, order)
    total = series.coeffs[0]
    t = sx.var("t")
    for n in range(1, order + 1):
        w = sx.const(Fraction(1, math.factorial(n)))
        term = sx.mul(sx.mul(w, series.coeffs[n]), sx.pow_(t, sx.const(n)))
        total = sx.add(total, term)
    return total


def residual(series: ADMSeries, order: int, x: float, t: float) -> float:
    """d/dt of the partial sum plus H(d/dx of the partial sum) at (x, t)."""
    _check_order(series, order)
    cached = series._residual_cache.get(order)
    if cached is None:
        u = partial_sum_expr(series, order)
        cap = series.problem.node_cap
        u_t = sx.differentiate(u, "t", cap)
        u_x = sx.differentiate(u, "x", cap)
        cached = sx.add(u_t, sx.substitute(series.problem.hamiltonian, "v", u_x, cap))
        series._residual_cache[order] = cached
    try:
        return sx.evaluate(cached, {"x": x, "t": t})
    except sx.EvalError as err:
        raise sx.DomainError(f"residual of order {order} at (x={x}, t={t}): {err}",
                             cached) from err


@dataclass(frozen=True)
class RadiusEstimate:
    """Ratio-test estimate of the time radius of convergence at one x.

    ``samples`` holds (n, rho_n) with rho_n = |c_{n+1}(x)| / ((n+1)|c_n(x)|);
    the radius is the reciprocal of the extrapolated ratio.  ``valid`` is
    false when any coefficient vanished at x or fewer than four nonzero
    terms are available.  ``low_order`` marks estimates from few ratios.
    """

    x: float
    samples: tuple[tuple[int, float], ...]
    radius: float
    valid: bool
    low_order: bool


_MIN_NONZERO_TERMS = 4
_LOW_ORDER_RATIOS = 6


def estimate_radius(series: ADMSeries, x: float) -> RadiusEstimate:
    """d'Alembert ratio estimate from the built coefficients at ``x``."""
    values = []
    for c in series.coeffs:
        try:
            values.append(sx.evaluate(c, {"x": x}))
        except sx.EvalError:
            return RadiusEstimate(x, (), math.nan, False, True)

    nonzero = [v != 0.0 for v in values]
    if not all(nonzero) or len(values) < _MIN_NONZERO_TERMS:
        return RadiusEstimate(x, (), math.nan, False, True)

    samples = tuple(
        (n, abs(values[n + 1]) / ((n + 1) * abs(values[n])))
        for n in range(len(values) - 1)
    )
    ratios = [r for _, r in samples]
    if len(ratios) >= 2:
        limit = 0.5 * (ratios[-1] + ratios[-2])
    else:
        limit = ratios[-1]
    radius = math.inf if limit == 0.0 else 1.0 / limit
    return RadiusEstimate(x, samples, radius, True,
                          len(ratios) < _LOW_ORDER_RATIOS)


def _check_order(series: ADMSeries, order: int):
    if order < 0 or order > series.n_terms:
        raise ValueError(
            f"order {order} outside the built range 0..{series.n_terms}")
