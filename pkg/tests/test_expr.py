"""Expression language: grammar, errors, printing, evaluation."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from varsob.expr import ExprEvalError, ExprSyntaxError, evaluate, parse, to_source


@pytest.mark.parametrize("src, point, expected", [
    ("2+3*x", {"x": 1}, 5.0),            # [TRIVIAL] * binds tighter than +
    ("2^3^2", {}, 512.0),                # [TRIVIAL] ^ is right-associative
    ("-2^2", {}, -4.0),                  # [TRIVIAL] ^ binds tighter than unary minus
    ("2^-1", {}, 0.5),                   # [TRIVIAL] unary minus allowed in an exponent
    ("8/2/2", {}, 2.0),                  # [TRIVIAL] / is left-associative
    ("8-2-2", {}, 4.0),
    ("--3", {}, 3.0),
    ("(1+2)*3", {}, 9.0),
    (".5e1 + 1.", {}, 6.0),
    ("abs(x-y)", {"x": 0.25, "y": 0.75}, 0.5),
    ("max(1, x, 3) + min(2, x)", {"x": 5}, 7.0),
    ("exp(log(2))", {}, 2.0),
    ("cos(pi)", {}, -1.0),
    ("sqrt(16) + e - e", {}, 4.0),
])
def test_values(src, point, expected):
    assert evaluate(parse(src, 1), point) == pytest.approx(expected, rel=1e-15)


def test_two_dimensional_coordinates():
    assert evaluate(parse("x1*x2", 2), (0.5, 0.5)) == 0.25
    e = parse("x1 + 10*y2")
    assert e.dim == 2 and e.uses_y
    assert evaluate(e, (1, 2, 3, 4)) == 41.0


def test_one_dimensional_aliases():
    e = parse("x1 + y", 1)
    assert evaluate(e, {"x": 2, "y1": 3}) == 5.0
    assert evaluate(e, (2, 3)) == 5.0


def test_vectorised_call():
    e = parse("x^2 + y", 1)
    x = np.linspace(0, 1, 5)[:, None]
    assert np.allclose(e(x, 2 * x), x[:, 0] ** 2 + 2 * x[:, 0])
    assert parse("3", 1)(x).shape == (5,)


@pytest.mark.parametrize("src, dim, offset, fragment", [
    ("", 1, 1, "empty expression"),
    ("   ", 1, 1, "empty expression"),
    ("2 $ x", 1, 3, "unexpected character"),
    ("foo(x)", 1, 1, "unknown identifier"),
    ("z + 1", 1, 1, "unknown identifier"),
    ("1 + sin(x, y)", 1, 5, "takes 1 argument"),
    ("max(1)", 1, 1, "at least 2"),
    ("2 x", 1, 3, "trailing token"),
    ("2x", 1, 2, "trailing token"),
    ("x+1)", 1, 4, "trailing token"),
    ("(x+1", 1, 5, "unexpected end of input"),
    ("x +", 1, 4, "unexpected end of input"),
    ("sin", 1, 4, "unexpected end of input"),
    ("()", 1, 2, "unexpected token"),
    ("1e999", 1, 1, "out of range"),
    ("x1 + y", 2, 6, "ambiguous in 2-D"),
    ("x2 + y", None, 6, "only valid in 1-D"),
    ("x2", 1, 1, "needs dimension 2"),
])
def test_syntax_errors(src, dim, offset, fragment):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src, dim)
    assert info.value.offset == offset
    assert fragment in info.value.message
    assert info.value.expected


def test_offsets_are_bytes():
    with pytest.raises(ExprSyntaxError) as info:
        parse("1 + é", 1)            # two-byte character at byte 5
    assert info.value.offset == 5


@pytest.mark.parametrize("src, point", [
    ("log(0)", {}), ("log(x)", {"x": -1}), ("sqrt(-1)", {}), ("1/0", {}),
    ("0^-1", {}), ("x^0.5", {"x": -1}), ("exp(1000)", {}),
])
def test_domain_errors(src, point):
    with pytest.raises(ExprEvalError):
        evaluate(parse(src, 1), point)


def test_missing_binding():
    with pytest.raises(ExprEvalError, match="missing binding"):
        evaluate(parse("x + y", 1), {"x": 1})


# --- printing -------------------------------------------------------------

_ATOMS = ["x", "y", "pi", "e", "2", "0.5", "3.25"]


def _random_expr(rnd: random.Random, depth: int) -> str:
    if depth == 0 or rnd.random() < 0.25:
        return rnd.choice(_ATOMS)
    k = rnd.randrange(6)
    a = _random_expr(rnd, depth - 1)
    if k == 0:
        return f"-{a}"
    if k == 1:
        return f"({a})"
    if k == 2:
        return f"{rnd.choice(['sin', 'cos', 'abs', 'exp'])}({a})"
    if k == 3:
        return f"max({a}, {_random_expr(rnd, depth - 1)})"
    return f"{a} {rnd.choice('+-*/^')} {_random_expr(rnd, depth - 1)}"


def test_print_parse_fixed_point():
    rnd = random.Random(3)
    for _ in range(500):
        e = parse(_random_expr(rnd, 4), 1)
        s1 = to_source(e.root)
        s2 = to_source(parse(s1, 1).root)
        assert s1 == s2
        assert parse(s1, 1).root == e.root


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False))
def test_printed_literals_round_trip(a, b):
    e = parse(f"{a!r} + {b!r} * x", 1)
    assert evaluate(parse(str(e), 1), {"x": 1.0}) == evaluate(e, {"x": 1.0})


def test_fuzz_no_crash():
    """Random byte soup from the token alphabet: only the documented errors."""
    rnd = random.Random(11)
    alphabet = list("x y 1 2 . e E + - * / ^ ( ) , ") + ["sin", "max", "pi", "x1", "y2", "$"]
    ok = 0
    for _ in range(5000):
        src = "".join(rnd.choice(alphabet) for _ in range(rnd.randrange(0, 12)))
        try:
            e = parse(src)
        except ExprSyntaxError:
            continue
        try:
            evaluate(e, [0.3] * (2 * e.dim))
            ok += 1
        except ExprEvalError:
            pass
    assert ok > 0


def test_math_consistency():
    e = parse("sin(x)^2 + cos(x)^2", 1)
    xs = np.linspace(-3, 3, 11)[:, None]
    assert np.allclose(e(xs), 1.0, atol=1e-15)
    assert evaluate(parse("pi", 1), {}) == math.pi
