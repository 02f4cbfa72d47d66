import math
import random

import pytest

from hjadm import symexpr as sx


def test_parse_power_structure():
    e = sx.parse("x^2")
    assert e.kind == "pow"
    assert e.args[0] == sx.var("x")
    assert sx.is_const(e.args[1]) and e.args[1].value == 2


def test_parse_sqrt_nested():
    e = sx.parse("sqrt(1+cos(x)^2)")
    assert sx.is_sqrt(e)
    assert "cos" in sx.to_text(e)


def test_parse_unary_minus_binds_below_power():
    # -x^2 must mean -(x^2): the parabolic initial data depends on it
    e = sx.parse("-x^2")
    assert e.kind == "neg" and e.args[0].kind == "pow"
    assert sx.evaluate(e, {"x": 3.0}) == -9.0


def test_parse_error_position():
    with pytest.raises(sx.ParseError) as err:
        sx.parse("1 +")
    assert err.value.position == 3


def test_parse_unknown_function():
    with pytest.raises(sx.ParseError, match="unknown function"):
        sx.parse("foo(x)")


def test_parse_unexpected_character():
    with pytest.raises(sx.ParseError):
        sx.parse("x + $")


@pytest.mark.parametrize("text", [
    "x^2",
    "-x^2",
    "v^2/2",
    "sqrt(1+cos(x)^2)",
    "-sqrt(1+v^2)",
    "cos(x)/sqrt(1+cos(x)^2)",
    "-sin(x)/((1+cos(x)^2)*sqrt(1+cos(x)^2))",
    "-cos(x)^2*sin(x)/(1+cos(x)^2)",
    "3*x+1",
    "x^(3/2)",
    "1/2*v^2",
    "x^-2",
    "2^x^2",
    "(x+1)*(x-1)",
    "exp(x)+ln(x)",
    "x*-3",
    "-(x+t)",
    "sin(x)*t^4/24",
])
def test_print_parse_fixpoint(text):
    first = sx.parse(text)
    printed = sx.to_text(first)
    assert sx.parse(printed) == first


def _random_expr(rng, depth):
    """Domain-safe random tree over x (guards keep sqrt/ln/div real)."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return sx.var("x")
        return sx.const(rng.randint(-3, 3))
    pick = rng.random()
    a = _random_expr(rng, depth - 1)
    if pick < 0.18:
        return sx.add(a, _random_expr(rng, depth - 1))
    if pick < 0.36:
        return sx.sub(a, _random_expr(rng, depth - 1))
    if pick < 0.54:
        return sx.mul(a, _random_expr(rng, depth - 1))
    if pick < 0.62:
        one_plus = sx.add(sx.const(1), sx.pow_(_random_expr(rng, depth - 1), sx.const(2)))
        return sx.div(a, one_plus)
    if pick < 0.72:
        return sx.sin(a)
    if pick < 0.82:
        return sx.cos(a)
    if pick < 0.88:
        return sx.neg(a)
    if pick < 0.94:
        return sx.pow_(a, sx.const(rng.choice([2, 3])))
    return sx.sqrt(sx.add(sx.const(1), sx.pow_(a, sx.const(2))))


def _central_diff(e, x0, h=1e-5):
    up = sx.evaluate(e, {"x": x0 + h})
    dn = sx.evaluate(e, {"x": x0 - h})
    return (up - dn) / (2 * h)


def test_derivative_matches_central_difference_1000_pairs():
    rng = random.Random(20260810)
    checked = 0
    while checked < 1000:
        e = _random_expr(rng, rng.randint(1, 4))
        x0 = rng.uniform(0.3, 2.2)
        try:
            d = sx.differentiate(e, "x")
            exact = sx.evaluate(d, {"x": x0})
            approx = _central_diff(e, x0)
            nearby = max(abs(sx.evaluate(e, {"x": x0 + s})) for s in (-1e-5, 0, 1e-5))
        except sx.EvalError:
            continue
        if not (math.isfinite(exact) and math.isfinite(approx)) or nearby > 1e4:
            continue
        assert abs(exact - approx) <= 1e-6 * (1 + abs(exact)), \
            f"{sx.to_text(e)} at {x0}: exact {exact} vs central {approx}"
        checked += 1


@pytest.mark.parametrize("text,expected", [
    ("sin(x)", "cos(x)"),
    ("v^2/2", "v"),
])
def test_derivative_closed_forms(text, expected):
    name = "v" if "v" in text else "x"
    d = sx.simplify(sx.differentiate(sx.parse(text), name))
    assert d == sx.parse(expected)


def test_derivative_of_speed_profile():
    # d/dx [cos x / sqrt(1+cos^2 x)] = -sin x / ((1+cos^2 x) sqrt(1+cos^2 x))
    e = sx.parse("cos(x)/sqrt(1+cos(x)^2)")
    d = sx.differentiate(e, "x")
    want = sx.parse("-sin(x)/((1+cos(x)^2)*sqrt(1+cos(x)^2))")
    for x in (0.1, 0.7, 1.3, 2.9, 4.4):
        got = sx.evaluate(d, {"x": x})
        ref = sx.evaluate(want, {"x": x})
        assert abs(got - ref) <= 1e-12 * (1 + abs(ref))


def test_derivative_keeps_rationals_exact():
    d = sx.simplify(sx.differentiate(sx.parse("x^(3/2)"), "x"))
    # coefficient must be the exact rational 3/2
    assert "3/2" in sx.to_text(d)
    assert abs(sx.evaluate(d, {"x": 4.0}) - 3.0) < 1e-14


def test_evaluate_basics():
    assert sx.evaluate(sx.parse("x^2"), {"x": 3}) == 9.0
    val = sx.evaluate(sx.parse("-sin(x)/((1+cos(x)^2)*sqrt(1+cos(x)^2))"),
                      {"x": math.pi / 2})
    assert abs(val - (-1.0)) < 1e-12


def test_evaluate_domain_errors():
    with pytest.raises(sx.DomainError, match="sqrt"):
        sx.evaluate(sx.parse("sqrt(x)"), {"x": -1.0})
    with pytest.raises(sx.DomainError, match="division by zero"):
        sx.evaluate(sx.parse("1/x"), {"x": 0.0})
    with pytest.raises(sx.DomainError, match="log"):
        sx.evaluate(sx.parse("ln(x)"), {"x": 0.0})
    with pytest.raises(sx.UnboundVariableError):
        sx.evaluate(sx.parse("x+y"), {"x": 1.0})


@pytest.mark.parametrize("text,expected", [
    ("0*sin(x)+x", "x"),
    ("x*x", "x^2"),
    ("(1+cos(x)^2)/(1+cos(x)^2)", "1"),
    ("x^2*x^3", "x^5"),
    ("2*x+3*x", "5*x"),
    ("x-x", "0"),
    ("(-x)^2", "x^2"),
    ("sqrt(1+x^2)*sqrt(1+x^2)", "1+x^2"),
])
def test_simplify_examples(text, expected):
    got = sx.simplify(sx.parse(text))
    want = sx.parse(expected)
    assert sx.simplify(want) == got or got == want, \
        f"{text} -> {sx.to_text(got)}, wanted {expected}"


def test_simplify_idempotent_and_value_preserving():
    rng = random.Random(99)
    for _ in range(300):
        e = _random_expr(rng, rng.randint(1, 4))
        s1 = sx.simplify(e)
        assert sx.simplify(s1) == s1
        assert s1.size <= e.size
        for _ in range(5):
            x0 = rng.uniform(0.2, 2.5)
            try:
                v0 = sx.evaluate(e, {"x": x0})
            except sx.EvalError:
                continue
            v1 = sx.evaluate(s1, {"x": x0})
            assert abs(v0 - v1) <= 1e-12 * (1 + abs(v0))


def test_substitute():
    assert sx.substitute(sx.parse("v^2"), "v", sx.parse("cos(x)")) == sx.parse("cos(x)^2")
    got = sx.substitute(sx.parse("v/sqrt(1+v^2)"), "v", sx.parse("cos(x)"))
    assert got == sx.parse("cos(x)/sqrt(1+cos(x)^2)")
    c = sx.const(5)
    assert sx.substitute(c, "v", sx.parse("x^9")) == c


def test_substitute_commutes_with_evaluation():
    rng = random.Random(4)
    outer = sx.parse("v^2+sin(v)")
    for _ in range(50):
        inner = _random_expr(rng, 2)
        x0 = rng.uniform(0.3, 2.0)
        try:
            direct = sx.evaluate(sx.substitute(outer, "v", inner), {"x": x0})
            staged = sx.evaluate(outer, {"v": sx.evaluate(inner, {"x": x0})})
        except sx.EvalError:
            continue
        assert abs(direct - staged) <= 1e-12 * (1 + abs(staged))


def test_node_cap_enforced():
    e = sx.parse("sqrt(1+sqrt(1+sqrt(1+x^2)^2)^2)")
    with pytest.raises(sx.NodeCapExceeded):
        sx.differentiate(e, "x", cap=10)
    with pytest.raises(sx.NodeCapExceeded):
        sx.substitute(sx.parse("x^2+x^3"), "x", e, cap=5)


def test_lambdify_matches_evaluate():
    import numpy as np

    rng = random.Random(11)
    for _ in range(100):
        e = _random_expr(rng, 3)
        xs = np.array([rng.uniform(0.3, 2.0) for _ in range(7)])
        try:
            scalar = [sx.evaluate(e, {"x": float(x)}) for x in xs]
        except sx.EvalError:
            continue
        vec = sx.lambdify(e, ("x",))(xs)
        assert np.allclose(vec, scalar, rtol=1e-13, atol=1e-13)


def test_lambdify_unbound_name():
    with pytest.raises(sx.UnboundVariableError):
        sx.lambdify(sx.parse("x+t"), ("x",))
