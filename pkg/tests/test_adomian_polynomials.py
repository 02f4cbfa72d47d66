import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hjadm import (
    compositions,
    oracle_polynomial,
    recursion_polynomial,
    theorem1_polynomial,
)


def brute_force_compositions(n, k):
    return sorted(
        tup for tup in itertools.product(range(1, n + 1), repeat=k)
        if sum(tup) == n
    )


def test_compositions_basic():
    assert list(compositions(3, 2)) == [(1, 2), (2, 1)]
    assert list(compositions(4, 4)) == [(1, 1, 1, 1)]
    assert len(list(compositions(6, 3))) == math.comb(5, 2)


def test_compositions_match_brute_force():
    for n in range(1, 9):
        for k in range(1, n + 1):
            assert list(compositions(n, k)) == brute_force_compositions(n, k)


@pytest.mark.parametrize("n,k", [(3, 4), (2, 0), (1, 5)])
def test_compositions_rejects_bad_arity(n, k):
    with pytest.raises(ValueError):
        compositions(n, k)


@given(st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(min_value=1, max_value=n))))
def test_compositions_properties(nk):
    n, k = nk
    tuples = list(compositions(n, k))
    assert len(tuples) == math.comb(n - 1, k - 1)
    assert len(set(tuples)) == len(tuples)
    assert tuples == sorted(tuples)
    for tup in tuples:
        assert len(tup) == k
        assert sum(tup) == n
        assert all(p >= 1 for p in tup)


def test_order_zero_is_bare_h():
    for poly in (theorem1_polynomial(0), oracle_polynomial(0)):
        assert dict(poly.terms) == {(0, ()): Fraction(1)}


def test_order_one_is_h_prime_w1():
    want = {(1, (1,)): Fraction(1)}
    assert dict(theorem1_polynomial(1).terms) == want
    assert dict(recursion_polynomial(1).terms) == want


def test_order_two_closed_form():
    want = {(1, (2,)): Fraction(1), (2, (1, 1)): Fraction(1, 2)}
    assert dict(theorem1_polynomial(2).terms) == want
    assert dict(recursion_polynomial(2).terms) == want
    assert dict(oracle_polynomial(2).terms) == want


def test_order_three_closed_form():
    want = {
        (1, (3,)): Fraction(1),
        (2, (1, 2)): Fraction(1),
        (3, (1, 1, 1)): Fraction(1, 6),
    }
    assert dict(recursion_polynomial(3).terms) == want
    assert dict(oracle_polynomial(3).terms) == want


def test_generators_agree_exactly_up_to_six():
    for n in range(7):
        ref = theorem1_polynomial(n)
        assert oracle_polynomial(n) == ref
        if n >= 1:
            assert recursion_polynomial(n) == ref


def test_homogeneity():
    for n in range(9):
        poly = theorem1_polynomial(n)
        assert poly.is_homogeneous()


def test_oracle_order_four_under_cubic_h():
    # a cubic H kills every H^(k) with k >= 4; the surviving terms of the
    # two generators must coincide monomial by monomial
    keep = lambda poly: {key: c for key, c in poly.terms.items() if key[0] <= 3}
    survivors = keep(oracle_polynomial(4))
    assert survivors == keep(theorem1_polynomial(4))
    assert len(survivors) == 4  # (1,(4)), (2,(1,3)), (2,(2,2)), (3,(1,1,2))


def _ordered_sum_evaluate(n, h_derivs, w):
    """Independent evaluator: raw ordered-composition sum with 1/k! weights."""
    if n == 0:
        return h_derivs[0]
    total = 0.0
    for k in range(1, n + 1):
        block = 0.0
        for comp in compositions(n, k):
            prod = h_derivs[k]
            for p in comp:
                prod *= w[p]
            block += prod
        total += block / math.factorial(k)
    return total


def test_instantiated_agreement_random_cubic():
    rng = random.Random(314159)
    for trial in range(50):
        coeffs = [rng.uniform(-2, 2) for _ in range(4)]  # cubic H
        w = [rng.uniform(-2, 2) for _ in range(7)]
        w0 = w[0]
        h_derivs = [
            coeffs[0] + coeffs[1] * w0 + coeffs[2] * w0 ** 2 + coeffs[3] * w0 ** 3,
            coeffs[1] + 2 * coeffs[2] * w0 + 3 * coeffs[3] * w0 ** 2,
            2 * coeffs[2] + 6 * coeffs[3] * w0,
            6 * coeffs[3],
            0.0, 0.0, 0.0,
        ]
        for n in range(7):
            ref = _ordered_sum_evaluate(n, h_derivs, w)
            for gen in (theorem1_polynomial, recursion_polynomial, oracle_polynomial):
                if gen is recursion_polynomial and n == 0:
                    continue
                if gen is oracle_polynomial and n > 8:
                    continue
                got = gen(n).evaluate(h_derivs, w)
                assert abs(got - ref) <= 1e-9 * (1 + abs(ref)), \
                    (gen.__name__, n, got, ref)


def test_oracle_rejects_high_order():
    with pytest.raises(ValueError):
        oracle_polynomial(9)
