"""Small immutable expression trees over named real variables.

The expression language is the closure of {+, -, *, /, ^, sin, cos, sqrt,
exp, ln} over numeric literals and identifiers.  Numeric literals parse to
exact rationals; floats only appear when a caller builds them explicitly or
when an expression is evaluated.  ``sqrt(u)`` is represented internally as
``u ^ (1/2)`` so that power-merging rules apply uniformly; the printer
restores the ``sqrt`` spelling.

Trees are immutable after construction and all operations here are pure
functions, so values can be shared freely across threads.
"""

from __future__ import annotations

import math
import re
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

Number = Union[Fraction, float]

#: hard ceiling on tree size; growing past it raises instead of crawling
DEFAULT_NODE_CAP = 200_000

_UNARY = frozenset({"neg", "sin", "cos", "exp", "ln"})
_BINARY = frozenset({"add", "sub", "mul", "div", "pow"})
_FUNCTIONS = {"sin", "cos", "sqrt", "exp", "ln"}

_HALF = Fraction(1, 2)


class SymExprError(Exception):
    """Base class for errors raised by this module."""


class ParseError(SymExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class NodeCapExceeded(SymExprError):
    def __init__(self, size: int, cap: int, context: str = ""):
        note = f" while {context}" if context else ""
        super().__init__(f"expression grew to {size} nodes (cap {cap}){note}")
        self.size = size
        self.cap = cap


class EvalError(SymExprError):
    pass


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvalError):
    """Real-valued evaluation left its domain (sqrt of a negative, x/0, ...)."""

    def __init__(self, message: str, subexpr: "Expr"):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


class Expr:
    """One node of an immutable expression tree."""

    __slots__ = ("kind", "value", "name", "args", "size", "free_vars", "_hash")

    def __init__(self, kind, value=None, name=None, args=()):
        self.kind = kind
        self.value = value
        self.name = name
        self.args = args
        self.size = 1 + sum(a.size for a in args)
        if kind == "var":
            self.free_vars = frozenset((name,))
        elif args:
            self.free_vars = frozenset().union(*(a.free_vars for a in args))
        else:
            self.free_vars = frozenset()
        self._hash = hash((kind, value, name, args))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return (
            self._hash == other._hash
            and self.kind == other.kind
            and self.value == other.value
            and self.name == other.name
            and self.args == other.args
        )

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)})"

    # operator sugar so tests and demos can write formulas naturally
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return pow_(self, _coerce(other))

    def __neg__(self):
        return neg(self)


def _coerce(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


# ---------------------------------------------------------------------------
# constructors (fold constant arithmetic, nothing else)

def const(value) -> Expr:
    if isinstance(value, bool):
        raise TypeError("boolean is not a numeric constant")
    if isinstance(value, int):
        value = Fraction(value)
    elif not isinstance(value, (Fraction, float)):
        raise TypeError(f"unsupported constant type {type(value).__name__}")
    return Expr("const", value=value)


def var(name: str) -> Expr:
    return Expr("var", name=name)


def is_const(e: Expr) -> bool:
    return e.kind == "const"


def is_zero(e: Expr) -> bool:
    return e.kind == "const" and e.value == 0


def is_one(e: Expr) -> bool:
    return e.kind == "const" and e.value == 1


def _is_int(v: Number) -> bool:
    if isinstance(v, Fraction):
        return v.denominator == 1
    return float(v).is_integer()


def add(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(a.value + b.value)
    return Expr("add", args=(a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(a.value - b.value)
    return Expr("sub", args=(a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(a.value * b.value)
    return Expr("mul", args=(a, b))


def div(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b) and b.value != 0:
        if isinstance(a.value, Fraction) and isinstance(b.value, Fraction):
            return const(a.value / b.value)
        return const(float(a.value) / float(b.value))
    return Expr("div", args=(a, b))


def pow_(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        folded = _try_fold_pow(a.value, b.value)
        if folded is not None:
            return const(folded)
    return Expr("pow", args=(a, b))


def _try_fold_pow(base: Number, exp: Number):
    # exact only for modest integer exponents; everything else waits for eval
    if isinstance(base, Fraction) and isinstance(exp, Fraction):
        if exp.denominator == 1 and abs(exp.numerator) <= 64:
            if base == 0 and exp < 0:
                return None
            return base ** exp.numerator
        return None
    try:
        r = math.pow(float(base), float(exp))
    except (ValueError, OverflowError):
        return None
    return r


def neg(a: Expr) -> Expr:
    if is_const(a):
        return const(-a.value)
    return Expr("neg", args=(a,))


def sin(a: Expr) -> Expr:
    return Expr("sin", args=(a,))


def cos(a: Expr) -> Expr:
    return Expr("cos", args=(a,))


def exp(a: Expr) -> Expr:
    return Expr("exp", args=(a,))


def ln(a: Expr) -> Expr:
    return Expr("ln", args=(a,))


def sqrt(a: Expr) -> Expr:
    return pow_(a, const(_HALF))


def is_sqrt(e: Expr) -> bool:
    return e.kind == "pow" and is_const(e.args[1]) and e.args[1].value == _HALF


def ensure_cap(e: Expr, cap: int | None, context: str = "") -> Expr:
    cap = DEFAULT_NODE_CAP if cap is None else cap
    if e.size > cap:
        raise NodeCapExceeded(e.size, cap, context)
    return e


# ---------------------------------------------------------------------------
# parsing
#
# expr   := term (('+'|'-') term)*
# term   := factor (('*'|'/') factor)*
# factor := '-' factor | base ('^' factor)?
# base   := number | ident | ident '(' expr ')' | '(' expr ')'
#
# Unary minus binds looser than '^', so "-x^2" is -(x^2); the accepted
# strings are unchanged from the flat grammar.

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            at = len(text) - len(stripped)
            raise ParseError(f"unexpected character '{text[at]}'", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected '{op}'", pos)
        self.take()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected '{val}'", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.factor())
        e = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return pow_(e, self.factor())
        return e

    def base(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return const(Fraction(Decimal(val)))
        if kind == "ident":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in _FUNCTIONS:
                    raise ParseError(f"unknown function '{val}'", pos)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                if val == "sqrt":
                    return sqrt(arg)
                return Expr(val, args=(arg,))
            return var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError("expected a number, name or '('", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Numeric literals become exact rationals.  Raises :class:`ParseError`
    with the character offset on malformed input.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing (precedence-aware; output re-parses to an equal tree)

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _const_text(v: Number) -> tuple[str, int]:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
            return s, (_PREC_NEG if v < 0 else _PREC_ATOM)
        s = f"{v.numerator}/{v.denominator}"
        return s, (_PREC_ADD if v < 0 else _PREC_MUL)
    s = repr(float(v))
    return s, (_PREC_NEG if s.startswith("-") else _PREC_ATOM)


def _wrap(text: str, prec: int, minimum: int) -> str:
    return f"({text})" if prec < minimum else text


def to_text(e: Expr) -> str:
    return _to_text(e)[0]


def _to_text(e: Expr) -> tuple[str, int]:
    kind = e.kind
    if kind == "const":
        return _const_text(e.value)
    if kind == "var":
        return e.name, _PREC_ATOM
    if kind == "neg":
        t, p = _to_text(e.args[0])
        # wrap products too: "-a*b" would re-parse as (-a)*b
        return "-" + _wrap(t, p, _PREC_POW), _PREC_NEG
    if kind in ("sin", "cos", "exp", "ln"):
        return f"{kind}({to_text(e.args[0])})", _PREC_ATOM
    if is_sqrt(e):
        return f"sqrt({to_text(e.args[0])})", _PREC_ATOM
    a, b = e.args
    ta, pa = _to_text(a)
    tb, pb = _to_text(b)
    if kind == "add":
        return f"{ta}+{_wrap(tb, pb, _PREC_ADD + 1)}", _PREC_ADD
    if kind == "sub":
        return f"{ta}-{_wrap(tb, pb, _PREC_ADD + 1)}", _PREC_ADD
    if kind == "mul":
        return f"{_wrap(ta, pa, _PREC_MUL)}*{_wrap(tb, pb, _PREC_MUL + 1)}", _PREC_MUL
    if kind == "div":
        return f"{_wrap(ta, pa, _PREC_MUL)}/{_wrap(tb, pb, _PREC_MUL + 1)}", _PREC_MUL
    if kind == "pow":
        return f"{_wrap(ta, pa, _PREC_POW + 1)}^{_wrap(tb, pb, _PREC_POW)}", _PREC_POW
    raise AssertionError(f"unhandled kind {kind}")


# ---------------------------------------------------------------------------
# evaluation

Binding = Mapping[str, float]


def evaluate(e: Expr, binding: Binding) -> float:
    """Evaluate to an IEEE double.  Every free variable must be bound.

    Raises :class:`DomainError` naming the offending subexpression for
    square roots of negatives, division by zero and logs of non-positives.
    """
    kind = e.kind
    if kind == "const":
        return float(e.value)
    if kind == "var":
        try:
            return float(binding[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if kind == "neg":
        return -evaluate(e.args[0], binding)
    if kind == "add":
        return evaluate(e.args[0], binding) + evaluate(e.args[1], binding)
    if kind == "sub":
        return evaluate(e.args[0], binding) - evaluate(e.args[1], binding)
    if kind == "mul":
        return evaluate(e.args[0], binding) * evaluate(e.args[1], binding)
    if kind == "div":
        num = evaluate(e.args[0], binding)
        den = evaluate(e.args[1], binding)
        if den == 0.0:
            raise DomainError("division by zero", e)
        return num / den
    if kind == "pow":
        base = evaluate(e.args[0], binding)
        expnt = e.args[1]
        if is_const(expnt) and _is_int(expnt.value):
            n = int(expnt.value)
            if base == 0.0 and n < 0:
                raise DomainError("zero raised to a negative power", e)
            try:
                return float(base ** n)
            except OverflowError:
                raise DomainError("overflow", e) from None
        p = evaluate(expnt, binding)
        if base < 0.0 and not float(p).is_integer():
            what = "square root of a negative number" if is_sqrt(e) else \
                "negative base with non-integer exponent"
            raise DomainError(what, e)
        if base == 0.0 and p < 0.0:
            raise DomainError("zero raised to a negative power", e)
        try:
            return math.pow(base, p)
        except (ValueError, OverflowError):
            raise DomainError("power outside real domain", e) from None
    if kind == "sin":
        return math.sin(evaluate(e.args[0], binding))
    if kind == "cos":
        return math.cos(evaluate(e.args[0], binding))
    if kind == "exp":
        try:
            return math.exp(evaluate(e.args[0], binding))
        except OverflowError:
            raise DomainError("overflow in exp", e) from None
    if kind == "ln":
        v = evaluate(e.args[0], binding)
        if v <= 0.0:
            raise DomainError("log of a non-positive number", e)
        return math.log(v)
    raise AssertionError(f"unhandled kind {kind}")


def lambdify(e: Expr, names: Sequence[str]) -> Callable:
    """Compile to a function of numpy arrays (or scalars), one per name.

    The compiled form trades the per-node domain checks of :func:`evaluate`
    for speed: out-of-domain points become nan/inf in the result.
    """
    import numpy as np

    index = {n: i for i, n in enumerate(names)}
    missing = e.free_vars - set(names)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])

    def build(node: Expr) -> Callable:
        kind = node.kind
        if kind == "const":
            c = float(node.value)
            return lambda *a: c
        if kind == "var":
            i = index[node.name]
            return lambda *a: a[i]
        if kind == "neg":
            f = build(node.args[0])
            return lambda *a: -f(*a)
        if kind in ("sin", "cos", "exp"):
            f = build(node.args[0])
            g = getattr(np, kind)
            return lambda *a: g(f(*a))
        if kind == "ln":
            f = build(node.args[0])
            return lambda *a: np.log(f(*a))
        fa = build(node.args[0])
        if kind == "pow" and is_const(node.args[1]) and _is_int(node.args[1].value):
            n = int(node.args[1].value)
            return lambda *a: fa(*a) ** n
        fb = build(node.args[1])
        if kind == "add":
            return lambda *a: fa(*a) + fb(*a)
        if kind == "sub":
            return lambda *a: fa(*a) - fb(*a)
        if kind == "mul":
            return lambda *a: fa(*a) * fb(*a)
        if kind == "div":
            return lambda *a: fa(*a) / fb(*a)
        if kind == "pow":
            return lambda *a: np.power(fa(*a), fb(*a))
        raise AssertionError(f"unhandled kind {kind}")

    fn = build(e)

    def wrapped(*arrays):
        with np.errstate(all="ignore"):
            out = fn(*arrays)
        if np.ndim(out) == 0 and arrays and np.ndim(arrays[0]) > 0:
            out = np.full_like(np.asarray(arrays[0], dtype=float), float(out))
        return out

    return wrapped


# ---------------------------------------------------------------------------
# differentiation

def differentiate(e: Expr, name: str, cap: int | None = None) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to ``name``."""
    result = _diff(e, name)
    return ensure_cap(result, cap, f"differentiating with respect to {name}")


def _diff(e: Expr, x: str) -> Expr:
    if x not in e.free_vars:
        return const(0)
    kind = e.kind
    if kind == "var":
        return const(1)
    if kind == "neg":
        return _fneg(_diff(e.args[0], x))
    if kind == "add":
        return _fadd(_diff(e.args[0], x), _diff(e.args[1], x))
    if kind == "sub":
        return _fsub(_diff(e.args[0], x), _diff(e.args[1], x))
    if kind == "mul":
        a, b = e.args
        return _fadd(_fmul(_diff(a, x), b), _fmul(a, _diff(b, x)))
    if kind == "div":
        a, b = e.args
        num = _fsub(_fmul(_diff(a, x), b), _fmul(a, _diff(b, x)))
        return _fdiv(num, _fpow(b, const(2)))
    if kind == "pow":
        a, b = e.args
        if is_const(b):
            c = b.value
            step = _fmul(const(c), _fpow(a, const(c - 1)))
            return _fmul(step, _diff(a, x))
        # a^b = exp(b ln a):  a^b * (b' ln a + b a'/a)
        inner = _fadd(
            _fmul(_diff(b, x), ln(a)),
            _fmul(b, _fdiv(_diff(a, x), a)),
        )
        return _fmul(e, inner)
    if kind == "sin":
        return _fmul(cos(e.args[0]), _diff(e.args[0], x))
    if kind == "cos":
        return _fneg(_fmul(sin(e.args[0]), _diff(e.args[0], x)))
    if kind == "exp":
        return _fmul(e, _diff(e.args[0], x))
    if kind == "ln":
        return _fdiv(_diff(e.args[0], x), e.args[0])
    raise AssertionError(f"unhandled kind {kind}")


# folding constructors used while differentiating; they apply the safe 0/1
# identities so derivative trees stay readable without a simplify pass

def _fadd(a, b):
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return add(a, b)


def _fsub(a, b):
    if is_zero(b):
        return a
    if is_zero(a):
        return _fneg(b)
    return sub(a, b)


def _fmul(a, b):
    if is_zero(a) or is_zero(b):
        return const(0)
    if is_one(a):
        return b
    if is_one(b):
        return a
    return mul(a, b)


def _fdiv(a, b):
    if is_zero(a):
        return const(0)
    if is_one(b):
        return a
    return div(a, b)


def _fpow(a, b):
    if is_zero(b):
        return const(1)
    if is_one(b):
        return a
    return pow_(a, b)


def _fneg(a):
    if a.kind == "neg":
        return a.args[0]
    return neg(a)


# ---------------------------------------------------------------------------
# substitution

def substitute(e: Expr, name: str, replacement: Expr, cap: int | None = None) -> Expr:
    """Replace every occurrence of variable ``name`` by ``replacement``."""
    result = _subst(e, name, replacement)
    return ensure_cap(result, cap, f"substituting for {name}")


def _subst(e: Expr, name: str, r: Expr) -> Expr:
    if name not in e.free_vars:
        return e
    if e.kind == "var":
        return r
    new_args = tuple(_subst(a, name, r) for a in e.args)
    if e.kind == "neg":
        return neg(new_args[0])
    if e.kind in _UNARY:
        return Expr(e.kind, args=new_args)
    ctor = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": pow_}[e.kind]
    return ctor(*new_args)


# ---------------------------------------------------------------------------
# simplification: bottom-up rewriting run to a fixpoint.  Products and sums
# are flattened so constants collect into one leading coefficient and like
# factors/terms merge; rules never increase the node count and never change
# the value anywhere both the input and output are defined.

def simplify(e: Expr) -> Expr:
    for _ in range(50):
        reduced = _simp(e)
        if reduced == e:
            return reduced
        e = reduced
    return e


def _simp(e: Expr) -> Expr:
    if e.kind in ("const", "var"):
        return e
    args = tuple(_simp(a) for a in e.args)
    return _rewrite(e.kind, args)


def _power_parts(e: Expr) -> tuple[Expr, Number]:
    if e.kind == "pow" and is_const(e.args[1]):
        return e.args[0], e.args[1].value
    return e, Fraction(1)


def _mul_factors(e: Expr, coeff: Number, factors: list) -> Number:
    """Flatten nested products into coeff * factors (order preserved)."""
    if e.kind == "const":
        return coeff * e.value
    if e.kind == "neg":
        return -_mul_factors(e.args[0], coeff, factors)
    if e.kind == "mul":
        coeff = _mul_factors(e.args[0], coeff, factors)
        return _mul_factors(e.args[1], coeff, factors)
    factors.append(e)
    return coeff


def _rebuild_product(coeff: Number, factors: list) -> Expr:
    if coeff == 0:
        return const(0)
    bases: list[Expr] = []
    exponents: dict[Expr, Number] = {}
    for f in factors:
        base, p = _power_parts(f)
        if base in exponents:
            exponents[base] = exponents[base] + p
        else:
            bases.append(base)
            exponents[base] = p
    result = None
    for base in bases:
        p = exponents[base]
        if p == 0:
            continue
        piece = base if p == 1 else pow_(base, const(p))
        if is_const(piece):
            coeff = coeff * piece.value
            continue
        result = piece if result is None else Expr("mul", args=(result, piece))
    if result is None:
        return const(coeff)
    if coeff == 1:
        return result
    if coeff == -1:
        return Expr("neg", args=(result,))
    return Expr("mul", args=(const(coeff), result))


def _term_parts(e: Expr) -> tuple[Number, Expr]:
    """Split one addend into (coefficient, core)."""
    if e.kind == "neg":
        c, core = _term_parts(e.args[0])
        return -c, core
    if e.kind == "mul" and is_const(e.args[0]):
        return e.args[0].value, e.args[1]
    return Fraction(1), e


def _add_terms(e: Expr, sign: int, total: list, terms: list,
               index: dict) -> None:
    """Flatten nested sums into constant total + coefficient-keyed terms."""
    if e.kind == "const":
        total[0] = total[0] + (e.value if sign > 0 else -e.value)
        return
    if e.kind == "add":
        _add_terms(e.args[0], sign, total, terms, index)
        _add_terms(e.args[1], sign, total, terms, index)
        return
    if e.kind == "sub":
        _add_terms(e.args[0], sign, total, terms, index)
        _add_terms(e.args[1], -sign, total, terms, index)
        return
    if e.kind == "neg":
        _add_terms(e.args[0], -sign, total, terms, index)
        return
    c, core = _term_parts(e)
    if sign < 0:
        c = -c
    if core in index:
        i = index[core]
        terms[i] = (terms[i][0] + c, core)
    else:
        index[core] = len(terms)
        terms.append((c, core))


def _rebuild_sum(total: Number, terms: list) -> Expr:
    live = [(c, core) for c, core in terms if c != 0]
    # a leading negative term would need a unary minus; putting a nonzero
    # constant first instead keeps the node count from growing
    result = const(total) if (total != 0 and live and live[0][0] < 0) else None
    if result is not None:
        total = Fraction(0)
    for c, core in live:
        if result is None:
            if c == 1:
                result = core
            elif c == -1:
                result = Expr("neg", args=(core,))
            else:
                result = Expr("mul", args=(const(c), core))
        elif c == 1:
            result = Expr("add", args=(result, core))
        elif c == -1:
            result = Expr("sub", args=(result, core))
        elif c < 0:
            result = Expr("sub",
                          args=(result, Expr("mul", args=(const(-c), core))))
        else:
            result = Expr("add",
                          args=(result, Expr("mul", args=(const(c), core))))
    if result is None:
        return const(total)
    if total == 0:
        return result
    if total < 0:
        return Expr("sub", args=(result, const(-total)))
    return Expr("add", args=(result, const(total)))


def _rewrite(kind: str, args: tuple) -> Expr:
    if kind == "neg":
        (a,) = args
        if is_const(a):
            return const(-a.value)
        if a.kind == "neg":
            return a.args[0]
        if a.kind == "sub":
            return Expr("sub", args=(a.args[1], a.args[0]))
        return Expr("neg", args=(a,))

    if kind in ("sin", "cos", "exp", "ln"):
        (a,) = args
        if kind == "sin":
            if is_zero(a):
                return const(0)
            if a.kind == "neg":
                return Expr("neg", args=(Expr("sin", args=(a.args[0],)),))
        if kind == "cos":
            if is_zero(a):
                return const(1)
            if a.kind == "neg":
                return Expr("cos", args=(a.args[0],))
        if kind == "exp" and is_zero(a):
            return const(1)
        if kind == "ln" and is_one(a):
            return const(0)
        return Expr(kind, args=(a,))

    a, b = args

    if kind in ("add", "sub"):
        total = [Fraction(0)]
        terms: list = []
        index: dict = {}
        _add_terms(a, 1, total, terms, index)
        _add_terms(b, 1 if kind == "add" else -1, total, terms, index)
        return _rebuild_sum(total[0], terms)

    if kind == "mul":
        factors: list = []
        coeff = _mul_factors(Expr("mul", args=(a, b)), Fraction(1), factors)
        return _rebuild_product(coeff, factors)

    if kind == "div":
        if is_zero(a):
            return const(0)
        if is_one(b):
            return a
        if a == b:
            return const(1)
        if is_const(a) and is_const(b) and b.value != 0:
            return div(a, b)
        if a.kind == "neg":
            return _rewrite("neg", (_rewrite("div", (a.args[0], b)),))
        if b.kind == "neg":
            return _rewrite("neg", (_rewrite("div", (a, b.args[0])),))
        if is_const(b) and b.value != 0 and isinstance(b.value, Fraction):
            return _rewrite("mul", (const(1 / b.value), a))
        if b.kind == "mul" and is_const(b.args[0]) and b.args[0].value != 0 \
                and isinstance(b.args[0].value, Fraction):
            scaled = _rewrite("mul", (const(1 / b.args[0].value), a))
            return _rewrite("div", (scaled, b.args[1]))
        pa, pb = _power_parts(a), _power_parts(b)
        if pa[0] == pb[0] and not is_const(pa[0]):
            return _rewrite("pow", (pa[0], const(pa[1] - pb[1])))
        return Expr("div", args=(a, b))

    if kind == "pow":
        if is_zero(b):
            return const(1)
        if is_one(b):
            return a
        if is_one(a):
            return const(1)
        if is_zero(a) and is_const(b) and b.value > 0:
            return const(0)
        if is_const(a) and is_const(b):
            return pow_(a, b)
        # integer outer exponents distribute safely over ^, unary - and *
        if is_const(b) and _is_int(b.value):
            n = int(b.value)
            if a.kind == "pow" and is_const(a.args[1]):
                return _rewrite("pow", (a.args[0], const(a.args[1].value * b.value)))
            if a.kind == "neg":
                inner = _rewrite("pow", (a.args[0], b))
                return inner if n % 2 == 0 else _rewrite("neg", (inner,))
            if a.kind == "mul" and is_const(a.args[0]):
                scale = _try_fold_pow(a.args[0].value, b.value)
                if scale is not None:
                    return _rewrite("mul", (const(scale),
                                            _rewrite("pow", (a.args[1], b))))
        return Expr("pow", args=(a, b))

    raise AssertionError(f"unhandled kind {kind}")
