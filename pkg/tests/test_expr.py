import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energygraph import expr as ex
from energygraph.errors import DomainError, ExpressionSyntaxError, NotDifferentiableError, UnboundSymbolError
from energygraph.tables import LookupTable

names = st.sampled_from(["x", "y", "xt", "u1", "cp_f"])
consts = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False).map(ex.Const)
leaves = st.one_of(consts, names.map(ex.Sym))


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: ex.Binary(*t)),
        st.tuples(st.sampled_from(["neg", "sqrt", "abs", "sign"]), children).map(lambda t: ex.Unary(*t)),
        st.tuples(st.sampled_from(["T", "rho"]), st.lists(children, min_size=1, max_size=2)).map(
            lambda t: ex.Call(t[0], tuple(t[1]))
        ),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_round_trip(tree):
    text = ex.to_string(tree)
    assert ex.parse(text) == tree
    assert ex.to_string(ex.parse(text)) == text


@pytest.mark.parametrize(
    "text, value",
    [
        ("1+2*3", 7.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("-3", -3.0),
        ("2*-3", -6.0),
        ("10/4/5", 0.5),
        ("sqrt(16)+abs(-2)+sign(-0.5)", 5.0),
        ("1e3*2.5E-2", 25.0),
        (".5+1.", 1.5),
    ],
)
def test_precedence(text, value):
    assert ex.evaluate(ex.parse(text), {}) == value


def test_negative_literal_is_constant():
    assert ex.parse("-3") == ex.Const(-3.0)
    assert ex.parse("-x") == ex.Unary("neg", ex.Sym("x"))


@pytest.mark.parametrize(
    "text, pos",
    [
        ("x+", 2),
        ("(x+1", 0),
        ("x+1)", 3),
        ("x $ y", 2),
        ("", 0),
        ("()", 1),
        ("sqrt(x, y)", 0),
        ("f()", 2),
    ],
)
def test_syntax_errors_report_position(text, pos):
    with pytest.raises(ExpressionSyntaxError) as info:
        ex.parse(text)
    assert info.value.position == pos
    assert "^" in str(info.value)


def test_evaluate_errors():
    with pytest.raises(UnboundSymbolError, match="'z'"):
        ex.evaluate("x+z", {"x": 1})
    with pytest.raises(DomainError, match="sqrt"):
        ex.evaluate("sqrt(x-2)", {"x": 1})
    with pytest.raises(DomainError, match="division by zero"):
        ex.evaluate("1/x", {"x": 0})
    with pytest.raises(UnboundSymbolError):
        ex.evaluate("T(x)", {"x": 1})


def test_tables_in_expressions():
    tab = LookupTable([[0.0, 1.0, 2.0]], [0.0, 10.0, 30.0])
    assert ex.evaluate("2*T(x)", {"x": 1.5}, {"T": tab}) == 40.0
    assert ex.evaluate("T[1](x)", {"x": 1.5}, {"T": tab}) == 20.0


def test_free_symbols_and_substitute():
    e = ex.parse("cp*u1*xt + T(xh, u2)")
    assert ex.free_symbols(e) == {"cp", "u1", "xt", "xh", "u2"}
    assert ex.function_names(e) == {"T"}
    s = ex.substitute(e, {"u1": "a+b", "xt": "3"})
    assert ex.free_symbols(s) == {"cp", "a", "b", "xh", "u2"}
    assert ex.evaluate(s, {"cp": 2, "a": 1, "b": 1, "xh": 0, "u2": 0}, {"T": lambda *a: 0.0}) == 12.0


def test_rename_functions():
    e = ex.rename_functions(ex.parse("rho(x)*drho[1](x)"), {"rho": "p__rho"})
    assert ex.function_names(e) == {"p__rho", "drho"}


def _fd(e, env, sym, h=1e-6):
    up, dn = dict(env), dict(env)
    up[sym] += h
    dn[sym] -= h
    return (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)


@pytest.mark.parametrize(
    "text",
    [
        "x^3 - 2*x*y + 1",
        "sqrt(x^2 + y)",
        "x/(1+y*x)",
        "abs(x-y)*x",
        "sign(x)*x^2",
        "(x*y)^2.5",
        "-x/y",
    ],
)
def test_derivative_matches_fd(text):
    e = ex.parse(text)
    env = {"x": 1.3, "y": 0.7}
    for sym in ("x", "y"):
        d = ex.differentiate(e, sym)
        assert math.isclose(ex.evaluate(d, env), _fd(e, env, sym), rel_tol=1e-7, abs_tol=1e-9)


def test_table_derivative_orders():
    tab = LookupTable([[0.0, 1.0], [0.0, 2.0]], [[0.0, 2.0], [1.0, 5.0]])
    d = ex.differentiate(ex.parse("T(x, y)"), "x")
    assert d == ex.parse("T[1,0](x, y)")
    assert ex.evaluate(d, {"x": 0.5, "y": 1.0}, {"T": tab}) == pytest.approx(2.0)
    dd = ex.differentiate(d, "y")
    assert dd == ex.parse("T[1,1](x, y)")


def test_not_differentiable():
    with pytest.raises(NotDifferentiableError):
        ex.differentiate("2^x", "x")
    assert ex.is_zero(ex.differentiate("2^y", "x"))


def test_simplify_folds_identities():
    assert ex.simplify("0*x + 1*y") == ex.Sym("y")
    assert ex.simplify("x^1 - 0") == ex.Sym("x")


def test_compiled_matches_evaluate():
    e = ex.parse("cp*u1*(xt - xh)/sqrt(abs(xt)+1)")
    src = ex.to_python(e, lambda s: f"b[{s!r}]", lambda t: t)
    fn = ex.compile_function(["b"], [f"return {src}"])
    env = {"cp": 3300.0, "u1": 0.37, "xt": 301.2, "xh": 299.9}
    assert fn(env) == ex.evaluate(e, env)
