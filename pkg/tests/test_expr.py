import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentqm.expr import ExprError, parse

atoms = st.sampled_from(["x", "y", "t", "pi", "2", "0.5", "1e-1", ".25", "3."])


def combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^", "**"]), children).map(
        lambda p: f"({p[0]} {p[1]} {p[2]})" if p[1] in "+-*/" else f"{p[0]}{p[1]}{p[2]}"
    )
    unary = children.map(lambda c: f"-{c}")
    call = st.tuples(st.sampled_from(["sin", "cos", "exp"]), children).map(lambda p: f"{p[0]}({p[1]})")
    mx = st.lists(children, min_size=2, max_size=3).map(lambda a: f"max({', '.join(a)})")
    return binary | unary | call | mx | children.map(lambda c: f"({c})")


expressions = st.recursive(atoms, combine, max_leaves=8)


def reference(text, t, x, y):
    env = {"x": x, "y": y, "t": t, "pi": np.pi, "sin": np.sin, "cos": np.cos, "exp": np.exp,
           "max": lambda *a: np.maximum.reduce(np.broadcast_arrays(*a))}
    with np.errstate(all="ignore"):
        return np.broadcast_to(eval(text.replace("^", "**"), {"__builtins__": {}}, env), np.shape(x))


@given(expressions)
def test_agrees_with_python_arithmetic(text):
    x = np.array([-0.7, 0.0, 0.3, 1.9])
    y = np.array([0.4, -1.1, 2.0, 0.05])
    ours = parse(text)(0.6, x, y)
    assert np.allclose(ours, reference(text, 0.6, x, y), rtol=1e-12, atol=0, equal_nan=True)


def test_precedence_and_associativity():
    f = lambda s: float(parse(s)(0.0, 2.0, 3.0))  # noqa: E731
    assert f("-x^2") == -4.0
    assert f("2^3^2") == 512.0
    assert f("x**-1") == 0.5
    assert f("1 - 2 - 3") == -4.0
    assert f("12 / 2 / 3") == 2.0
    assert f("max(0, 1 - (x^2 + y^2) / 0.16)^8") == 0.0


def test_variables_and_autonomy():
    assert parse("sin(x) * y").autonomous
    e = parse("t * x")
    assert not e.autonomous
    assert e.variables == {"t", "x"}
    assert np.allclose(e.of_xy(2.0)(np.array([1.0, 2.0]), 0.0), [2.0, 4.0])


def test_constant_broadcasts():
    assert parse("3")(0.0, np.zeros((2, 3)), 0.0).shape == (2, 3)


@pytest.mark.parametrize(
    "text", ["", "  ", "x +", "sin x", "foo(x)", "z", "(x", "x)", "1 $ 2", "max()", "sin(x, y)", "2 3"]
)
def test_malformed(text):
    with pytest.raises(ExprError):
        parse(text)


def test_error_reports_position():
    with pytest.raises(ExprError) as info:
        parse("x + $")
    assert info.value.pos == 4
