import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossdiff.errors import ParseError
from crossdiff.expr import parse_expression


@pytest.mark.parametrize("src, expected", [
    ("1 + 2*3", 7.0),
    ("-(2 - 5) / 3", 1.0),
    ("min(3, 1, 2)", 1.0),
    ("exp(0)", 1.0),
    ("2^3", 8.0),
    ("2**-1", 0.5),
    ("pi", math.pi),
    ("e", math.e),
])
def test_constant_expressions(src, expected):
    ex = parse_expression(src)
    assert ex.constant_value() == pytest.approx(expected)
    assert ex.variables == frozenset()


def test_competition_coefficients_vectorized():
    u = np.array([0.0, 0.5, 2.0])
    v = np.array([1.0, 0.0, 3.0])
    f = parse_expression("1 - u - 0.5*v")
    B = parse_expression("1 + v/(1 + v)")
    assert np.allclose(f(u, v), 1 - u - 0.5 * v)
    assert np.allclose(B(u, v), 1 + v / (1 + v))
    assert f.variables == {"u", "v"} and B.variables == {"v"}
    assert f.constant_value() is None


def test_constant_broadcasts_and_copies():
    out = parse_expression("2")(np.zeros((3, 2)), np.zeros((3, 2)))
    assert out.shape == (3, 2) and np.all(out == 2)
    out[0, 0] = 5  # must be writable
    assert parse_expression("v")(1.0, np.arange(3.0)).tolist() == [0.0, 1.0, 2.0]


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_matches_python_semantics(u, v):
    ex = parse_expression("min(u, v) * exp(-v^2) + 3*u - v/4")
    ref = min(u, v) * math.exp(-(v**2)) + 3 * u - v / 4
    assert ex(u, v) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("src", [
    "", "u +", "sin(u)", "w", "u ** v", "u < v", "min(u)", "exp(u, v)",
    "__import__('os')", "u.real", "[u]", "'a'", "True", "lambda: 1", "u if v else 1",
    "exp(x=u)", "u % 2", "u // 2",
])
def test_rejects_outside_grammar(src):
    with pytest.raises(ParseError):
        parse_expression(src)


def test_error_position_is_offset_by_enclosing_location():
    with pytest.raises(ParseError) as info:
        parse_expression("1 + w", line=7, column=5)
    assert info.value.line == 7 and info.value.column == 9
    assert "unknown name 'w'" in str(info.value)


def test_syntax_error_position():
    with pytest.raises(ParseError) as info:
        parse_expression("1 + * 2", line=3, column=1)
    assert info.value.line == 3 and info.value.column is not None
