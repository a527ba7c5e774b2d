import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from soliton_forge import expr as ex
from soliton_forge.expr import BinOp, Call, Num, Var

X = ("x1", "x2", "x3", "x4")


def test_grammar_example_tree():
    e = ex.parse("x1^2 + sin(x2)", X)
    assert e == BinOp("+", BinOp("^", Var("x1", 0), Num(2.0)), Call("sin", Var("x2", 1)))


def test_unknown_identifier():
    with pytest.raises(ex.UnknownIdentifierError) as info:
        ex.parse("phi", X)
    assert info.value.name == "phi"


def test_simple_evaluation():
    e = ex.parse("1/(1 - x1/4)", X)
    assert ex.evaluate(e, np.zeros(4)) == 1.0


def test_precedence_and_associativity():
    pt = np.array([2.0, 3.0, 0.0, 0.0])
    cases = {
        "-x1^2": -4.0,
        "x1^x2^2": 2.0 ** 9,
        "x1 - x2 - 1": -2.0,
        "x1 / x2 / 2": 2.0 / 3.0 / 2.0,
        "2*x1^-1": 1.0,
        "-(x1)^2": -4.0,
        "(-x1)^2": 4.0,
        "pi*x1": 2 * math.pi,
        "1.5e1 + x2": 18.0,
    }
    for src, expected in cases.items():
        assert ex.evaluate(ex.parse(src, X), pt) == pytest.approx(expected, rel=1e-15), src


def test_syntax_error_offset():
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x1 + * x2", X)
    assert info.value.offset == 5
    for bad in ("", "x1 +", "(x1", "x1 x2", "2..3"):
        with pytest.raises(ex.ExprSyntaxError):
            ex.parse(bad, X)


def test_arity_and_reserved_names():
    with pytest.raises(ex.ArityError):
        ex.parse("sin(x1, x2)", X)
    with pytest.raises(ex.ArityError):
        ex.parse("exp()", X)
    with pytest.raises(ex.ArityError):
        ex.parse("sin x1", X)
    with pytest.raises(ex.ExprError):
        ex.parse("x1", ("x1", "pi"))
    with pytest.raises(ex.UnknownIdentifierError):
        ex.parse("foo(x1)", X)


def test_params_late_bound():
    e = ex.parse("a*x1 + b", X, params=("a", "b"))
    pt = np.array([2.0, 0, 0, 0])
    assert ex.evaluate(e, pt, {"a": 3.0, "b": 1.0}) == 7.0
    assert ex.evaluate(e, pt, {"a": -1.0, "b": 0.5}) == -1.5


def test_domain_errors_name_node_and_point():
    pt = np.array([-1.0, 0, 0, 0])
    for src in ("log(x1)", "sqrt(x1)", "1/(x1 + 1)", "x1^0.5", "tan(x2 + pi/2)"):
        e = ex.parse(src, X)
        with pytest.raises(ex.DomainError) as info:
            ex.eval_jet2(e, pt)
        assert info.value.point is not None
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("x2^-2", X), pt)


def test_jet_examples():
    J = ex.eval_jet2(ex.parse("x1^2", X), np.array([3.0, 0, 0, 0]))
    assert J.value == 9.0
    assert J.grad[0] == 6.0 and J.hess[0, 0] == 2.0
    J = ex.eval_jet2(ex.parse("sin(x1)", X), np.zeros(4))
    assert (J.value, J.grad[0], J.hess[0, 0]) == (0.0, 1.0, 0.0)


def test_fd_examples():
    J = ex.eval_fd(ex.parse("x1*x2", X), np.array([1.0, 1.0, 0, 0]), h=1e-3)
    assert abs(J.hess[0, 1] - 1.0) <= 1e-8
    J = ex.eval_fd(ex.parse("exp(x1)", X), np.zeros(4), h=1e-3)
    assert abs(J.grad[0] - 1.0) <= 1e-10


def test_hessian_exactly_symmetric():
    e = ex.parse("sin(x1*x2) * exp(x3 - x4^2) / (2 + cos(x1 + x3))", X)
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 4))
    for J in (ex.eval_jet2(e, pts), ex.eval_fd(e, pts)):
        assert np.array_equal(J.hess, np.swapaxes(J.hess, -1, -2))


# --- random expressions against a symbolic oracle -------------------------

SYM = sp.symbols("x1 x2")
SAFE_UNARY = ("sin", "cos", "exp", "atan", "tanh", "sinh", "cosh")


@st.composite
def trees(draw, depth=4):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        if draw(st.booleans()):
            return f"x{draw(st.integers(1, 2))}"
        return repr(draw(st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 3))))
    kind = draw(st.integers(0, 6))
    a = draw(trees(depth=depth - 1))
    if kind == 0:
        return f"{draw(st.sampled_from(SAFE_UNARY))}({a})"
    if kind == 1:
        return f"log(1 + ({a})^2)"
    if kind == 2:
        return f"sqrt(2 + sin({a}))"
    if kind == 3:
        return f"({a})^{draw(st.integers(0, 3))}"
    if kind == 4:
        return f"-({a})"
    b = draw(trees(depth=depth - 1))
    if kind == 5:
        return f"({a}) {draw(st.sampled_from('+-*'))} ({b})"
    return f"({a}) / (2 + cos({b}))"


def _sympy_jets(src, pt):
    s = sp.sympify(src.replace("^", "**"), locals={"x1": SYM[0], "x2": SYM[1]})
    sub = {SYM[0]: pt[0], SYM[1]: pt[1]}
    val = float(s.evalf(30, subs=sub))
    grad = [float(sp.diff(s, v).evalf(30, subs=sub)) for v in SYM]
    hess = [[float(sp.diff(s, a, b).evalf(30, subs=sub)) for b in SYM] for a in SYM]
    return val, np.array(grad), np.array(hess)


@settings(max_examples=40, deadline=None)
@given(trees(), st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_jet_matches_symbolic_derivatives(src, pt):
    e = ex.parse(src, ("x1", "x2"))
    J = ex.eval_jet2(e, np.array(pt))
    val, grad, hess = _sympy_jets(src, pt)
    scale = 1 + abs(val) + np.abs(grad).max() + np.abs(hess).max()
    assert abs(J.value - val) <= 1e-12 * scale
    assert np.abs(J.grad - grad).max() <= 1e-11 * scale
    assert np.abs(J.hess - hess).max() <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(trees())
def test_round_trip(src):
    e = ex.parse(src, ("x1", "x2"))
    assert ex.parse(ex.to_source(e), ("x1", "x2")) == e


def test_round_trip_edge_cases():
    for src in ("-x1^2", "(-x1)^2", "x1^x2^2", "x1 - (x2 - 1)", "-(-x1)", "2^-x1", "pi/2"):
        e = ex.parse(src, ("x1", "x2"))
        assert ex.parse(ex.to_source(e), ("x1", "x2")) == e, src


# --- finite differences ----------------------------------------------------

CATALOG_EXPRESSIONS = (
    "4/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2",
    "sin(x1)^2 * cosh(x2)",
    "(1 + x3^2 + x4^2)/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2",
    "exp(2*x1) * sqrt(2 + x2*x3)",
    "-2*log(1 - x1/2) + atan(x4)",
)


def test_fd_agrees_with_jet_on_random_points():
    pts = np.random.default_rng(3).uniform(-0.9, 0.9, (100, 4))
    for src in CATALOG_EXPRESSIONS:
        e = ex.parse(src, X)
        J = ex.eval_jet2(e, pts)
        F = ex.eval_fd(e, pts)
        assert np.all(np.abs(F.grad - J.grad) <= 1e-6 * (1 + np.abs(J.grad))), src
        assert np.all(np.abs(F.hess - J.hess) <= 1e-6 * (1 + np.abs(J.hess))), src


def test_jet_grad_against_central_difference():
    pts = np.random.default_rng(4).uniform(-0.9, 0.9, (30, 4))
    h = 1e-4
    for src in CATALOG_EXPRESSIONS:
        e = ex.parse(src, X)
        J = ex.eval_jet2(e, pts)
        for k in range(4):
            d = np.zeros(4)
            d[k] = h
            cd = (ex.evaluate(e, pts + d) - ex.evaluate(e, pts - d)) / (2 * h)
            assert np.all(np.abs(J.grad[:, k] - cd) <= 1e-6 * (1 + np.abs(J.grad[:, k])))


def test_fd_fourth_order():
    e = ex.parse("sin(x1)*exp(0.5*x2) + x3^3*x4", X)
    pt = np.array([0.3, -0.2, 0.5, 0.7])
    J = ex.eval_jet2(e, pt)
    errs = [np.abs(ex.eval_fd(e, pt, h=h).grad - J.grad).max() for h in (0.08, 0.04, 0.02)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(12 <= q <= 20 for q in ratios), ratios


def test_jet_rules():
    pts = np.random.default_rng(5).uniform(-1, 1, (20, 2))
    a = ex.eval_jet2(ex.parse("sin(x1) + x2^2", ("x1", "x2")), pts)
    b = ex.eval_jet2(ex.parse("exp(x1*x2)", ("x1", "x2")), pts)
    prod = a * b
    assert np.allclose(prod.grad, a.grad * b.value[:, None] + a.value[:, None] * b.grad, rtol=0, atol=1e-14)
    q = a / b
    assert np.allclose(q.grad, (a.grad * b.value[:, None] - a.value[:, None] * b.grad) / b.value[:, None] ** 2,
                       rtol=1e-13, atol=1e-14)


def test_user_functions():
    def F(r):
        return r**3, 3 * r**2, 6 * r

    e = ex.parse("F(x1) * x2", ("x1", "x2"), functions=("F",))
    J = ex.eval_jet2(e, np.array([2.0, 3.0]), functions={"F": F})
    assert J.value == 24.0
    assert np.allclose(J.grad, [36.0, 8.0]) and np.allclose(J.hess, [[36.0, 12.0], [12.0, 0.0]])
    with pytest.raises(ex.ExprError, match="no implementation"):
        ex.eval_jet2(e, np.array([2.0, 3.0]))


def test_free_names_and_rebind():
    e = ex.parse("a*x2 + F(x1)", ("x1", "x2"), params=("a",), functions=("F",))
    assert ex.free_names(e) == {"a", "x1", "x2", "F"}
    moved = ex.rebind(e, ("r", "x1", "x2"))
    J = ex.evaluate(moved, np.array([9.0, 1.0, 2.0]), {"a": 1.0}, {"F": lambda r: (r, 1.0, 0.0)})
    assert J == 3.0
