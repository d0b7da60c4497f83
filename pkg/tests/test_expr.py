import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actionforge.expr import (
    ExprDomainError,
    ExprSyntaxError,
    differentiate,
    evaluate,
    gradient,
    parse,
    to_source,
)


def ev(src, t=0.0, x=(0.0,), N=None):
    x = np.asarray(x, float)
    return float(evaluate(parse(src, N or x.shape[-1]), t, x))


# parsing and evaluation ------------------------------------------------------------


def test_examples():
    assert ev("0.5*x1^2 - cos(t)*x1", 0.0, [2.0]) == pytest.approx(0.0, abs=1e-15)
    assert ev("sin(x1)*cos(t)", 0.0, [math.pi / 2]) == pytest.approx(1.0)
    assert ev("t*t", 3.0) == 9.0
    assert ev("x1 - 2^3", 0.0, [10.0]) == 2.0


def test_precedence():
    assert ev("2 + 3 * 4") == 14.0
    assert ev("2 * 3 ^ 2") == 18.0
    assert ev("-2 ^ 2") == -4.0
    assert ev("(-2) ^ 2") == 4.0
    assert ev("8 / 4 / 2") == 1.0
    assert ev("8 - 4 - 2") == 2.0
    assert ev("2 ^ -1") == 0.5
    assert ev("--3") == 3.0


def test_pi_and_functions():
    assert ev("cos(pi)") == -1.0
    assert ev("abs_sq(-3)") == 9.0
    assert ev("log(exp(2))") == pytest.approx(2.0)


def test_syntax_error_positions():
    with pytest.raises(ExprSyntaxError) as e:
        parse("sin(", 1)
    assert e.value.position == 4
    for src, pos in [("x1 +", 4), ("foo(x1)", 0), ("x1 ) ", 3), ("2 ^ x1", 4), ("x2", 0), ("1 $ 2", 2)]:
        with pytest.raises(ExprSyntaxError) as e:
            parse(src, 1)
        assert e.value.position == pos, src


def test_empty_and_deep_input():
    with pytest.raises(ExprSyntaxError):
        parse("", 1)
    with pytest.raises(ExprSyntaxError) as e:
        parse("(" * 300 + "x1" + ")" * 300, 1)
    assert "deep" in str(e.value)


def test_domain_errors():
    with pytest.raises(ExprDomainError) as e:
        ev("1/x1", 0.0, [0.0])
    assert e.value.position == 1
    with pytest.raises(ExprDomainError):
        ev("log(x1)", 0.0, [-1.0])
    with pytest.raises(ExprDomainError):
        ev("x1^-2", 0.0, [0.0])


def test_domain_error_reports_first_bad_element():
    x = np.array([[1.0], [2.0], [0.0], [0.0]])
    with pytest.raises(ExprDomainError) as e:
        evaluate(parse("1/x1", 1), 0.0, x)
    assert e.value.index == (2,)


def test_vectorized_broadcast():
    node = parse("x1*t + x2", 2)
    t = np.linspace(0, 1, 5)[:, None]
    x = np.random.default_rng(0).standard_normal((3, 2))
    out = evaluate(node, t, x[None, :, :])
    assert out.shape == (5, 3)
    np.testing.assert_allclose(out, x[None, :, 0] * t + x[None, :, 1])


# differentiation ---------------------------------------------------------------------------


def d_at(src, i, t, x):
    x = np.asarray(x, float)
    return float(evaluate(differentiate(parse(src, x.size), i), t, x))


def test_derivative_examples():
    assert d_at("x1^2 + x2^2", 2, 0.0, [1.0, 2.0]) == 4.0
    assert d_at("cos(x1)", 1, 0.0, [0.0]) == 0.0
    val = d_at("exp(x1*t)", 1, 2.0, [1.0])
    assert val == pytest.approx(2 * math.exp(2), rel=1e-15)
    h = 1e-5
    fd = (ev("exp(x1*t)", 2.0, [1 + h]) - ev("exp(x1*t)", 2.0, [1 - h])) / (2 * h)
    assert val == pytest.approx(fd, rel=1e-8)


def test_zero_power_derivative_is_defined_at_zero():
    assert d_at("x1^0", 1, 0.0, [0.0]) == 0.0


def test_gradient_list():
    g = gradient(parse("x1*x2 + t", 2), 2)
    x = np.array([3.0, 5.0])
    assert [float(evaluate(d, 1.0, x)) for d in g] == [5.0, 3.0]


# round trip corpus ------------------------------------------------------------------------------

CORPUS = [
    "x1",
    "t",
    "pi",
    "0.5",
    "1e-3 * x1",
    "x1 + x2",
    "x1 - x2 - x3",
    "x1 - (x2 - x3)",
    "x1 * x2 / x3",
    "x1 / (x2 * x3)",
    "x1^2",
    "x1^-1",
    "-x1^2",
    "(-x1)^2",
    "-(x1 + t)",
    "--x1",
    "sin(x1)",
    "cos(t) * x1",
    "exp(-x1^2)",
    "log(1 + x1^2)",
    "abs_sq(x1 - x2)",
    "0.5 * x1^2 - cos(t) * x1",
    "-cos(x1) - 0.3 * cos(2 * pi * t) * x1",
    "sin(x1) * cos(t)",
    "(x1 + x2)^3",
    "(x1 * x2)^2",
    "x1^2 + x2^2 + x3^2",
    "1 / (1 + x1^2)",
    "exp(x1 * t)",
    "sin(cos(exp(x1)))",
    "x1 * (x2 + x3)",
    "(x1 + x2) * x3",
    "(x1 - x2) / (x1 + x2)",
    "2^3",
    "t * t",
    "-t",
    "x1 - 2^3",
    "0.1 * (1 - exp(-(x1^2 + x2^2)))",
    "cos(2 * pi * t / 3) * x2",
    "x1 / x2 / x3",
    "x1 / (x2 / x3)",
    "x1 - -x2",
    "x1 * -x2",
    "(x1 + 1)^-2",
    "sin(t)^2 + cos(t)^2",
    "abs_sq(sin(x1)) * exp(t)",
    "log(exp(x1))",
    "3 * x1^4 - 2 * x1^3 + x1",
    "-(x1 * x2)",
    "(-(x1))^3",
]


def test_corpus_size():
    assert len(CORPUS) == 50


@pytest.mark.parametrize("src", CORPUS)
def test_round_trip(src):
    out = to_source(parse(src, 3))
    if src == "(-(x1))^3":
        # redundant parentheses are dropped, nothing else changes
        assert out == "(-x1)^3"
    else:
        assert out.replace(" ", "") == src.replace(" ", "")
    assert to_source(parse(out, 3)) == out


@pytest.mark.parametrize("src", CORPUS)
def test_round_trip_preserves_value(src):
    rng = np.random.default_rng(zlib.crc32(src.encode()))
    x = rng.uniform(0.5, 1.5, (20, 3))
    t = rng.uniform(0, 1, 20)
    a = evaluate(parse(src, 3), t, x)
    b = evaluate(parse(to_source(parse(src, 3)), 3), t, x)
    np.testing.assert_array_equal(a, b)


# random expressions -------------------------------------------------------------------------------

SMOOTH_FUNCS = ("sin", "cos", "exp")


def _leaf():
    return st.one_of(
        st.sampled_from(["x1", "x2", "t", "pi"]),
        st.floats(0.1, 3.0).map(lambda v: f"{v:.3g}"),
    )


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
        st.tuples(st.sampled_from(SMOOTH_FUNCS), children).map(lambda p: f"{p[0]}(0.3 * {p[1]})"),
        st.tuples(children, st.integers(0, 3)).map(lambda p: f"({p[0]})^{p[1]}"),
        children.map(lambda c: f"-{c}"),
        children.map(lambda c: f"log(1 + abs_sq({c}))"),
    )


smooth_exprs = st.recursive(_leaf(), _extend, max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(smooth_exprs, st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_derivative_matches_central_differences(src, x1, x2, t):
    node = parse(src, 2)
    x = np.array([x1, x2])
    h = 1e-5
    for i in (1, 2):
        d = float(evaluate(differentiate(node, i), t, x))
        e = np.zeros(2)
        e[i - 1] = h
        fd = (float(evaluate(node, t, x + e)) - float(evaluate(node, t, x - e))) / (2 * h)
        assert abs(d - fd) <= 1e-6 * max(1.0, abs(d)), (src, i, d, fd)


@settings(max_examples=100, deadline=None)
@given(smooth_exprs, smooth_exprs, st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_derivative_is_linear(f, g, x1, t):
    x = np.array([x1, 0.3])
    d_sum = evaluate(differentiate(parse(f"({f}) + ({g})", 2), 1), t, x)
    d_f = evaluate(differentiate(parse(f, 2), 1), t, x)
    d_g = evaluate(differentiate(parse(g, 2), 1), t, x)
    assert abs(d_sum - (d_f + d_g)) <= 1e-10 * max(1.0, abs(d_sum))


@settings(max_examples=100, deadline=None)
@given(smooth_exprs)
def test_random_round_trip(src):
    out = to_source(parse(src, 2))
    assert to_source(parse(out, 2)) == out
