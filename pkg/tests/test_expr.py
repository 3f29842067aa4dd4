import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftham import autodiff as ad
from driftham import expr as ex


def test_lagrangian_kinetic_term():
    tree = ex.parse("m*u1^2/2 - U")
    assert ex.evaluate(tree, {"m": 2.0, "u1": 2.0, "U": 1.0}) == 3.0


def test_centrifugal_expression():
    tree = ex.parse("M^2/(2*m*x1^2)")
    assert ex.evaluate(tree, {"M": 1.0, "m": 0.5, "x1": 1.0}) == pytest.approx(1.0)
    assert ex.evaluate(tree, {"M": 1.0, "m": 1.0, "x1": 1.0}) == pytest.approx(0.5)


def test_bracket_component_expression():
    tree = ex.parse("-2*x3/(m*x1^3)")
    assert ex.evaluate(tree, {"x3": 1.0, "m": 1.0, "x1": 1.0}) == -2.0


def test_precedence():
    env = {"x": 2.0}
    assert ex.evaluate(ex.parse("2+3*4"), env) == 14.0
    assert ex.evaluate(ex.parse("2*3+4"), env) == 10.0
    assert ex.evaluate(ex.parse("2^3^2"), env) == 512.0  # right-associative
    assert ex.evaluate(ex.parse("-x^2"), env) == -4.0     # minus binds looser
    assert ex.evaluate(ex.parse("(-x)^2"), env) == 4.0
    assert ex.evaluate(ex.parse("x^-1"), env) == 0.5


def test_functions():
    assert ex.evaluate(ex.parse("sqrt(x)"), {"x": 9.0}) == 3.0
    assert ex.evaluate(ex.parse("abs(-3*x)"), {"x": 2.0}) == 6.0
    assert ex.evaluate(ex.parse("log(exp(x))"), {"x": 1.5}) == pytest.approx(1.5)


def test_parse_error_reports_offset():
    with pytest.raises(ex.ParseError) as err:
        ex.parse("1 + * 2")
    assert err.value.offset == 4
    with pytest.raises(ex.ParseError) as err:
        ex.parse("x + ")
    assert err.value.offset == 4
    with pytest.raises(ex.ParseError):
        ex.parse("")
    with pytest.raises(ex.ParseError):
        ex.parse("foo(1)")  # unknown function
    with pytest.raises(ex.ParseError):
        ex.parse("1 $ 2")


def test_unbound_name():
    with pytest.raises(ex.UnboundNameError) as err:
        ex.evaluate(ex.parse("a + b"), {"a": 1.0})
    assert err.value.name == "b"


def test_free_names():
    assert ex.free_names(ex.parse("m*u1^2/2 - alpha/x1")) == {"m", "u1", "alpha", "x1"}
    assert ex.free_names(ex.parse("sqrt(2.0)")) == set()


def test_division_by_zero():
    with pytest.raises(ad.ADDomainError):
        ex.evaluate(ex.parse("1/x"), {"x": 0.0})


# -- round-trip property ------------------------------------------------

_names = st.sampled_from(["x1", "x2", "u1", "m", "alpha", "M_long"])
_funcs = st.sampled_from(sorted(ex.FUNCTIONS))


def _trees(depth):
    leaf = st.one_of(
        st.floats(min_value=0.0, max_value=100.0, allow_nan=False).map(ex.Num),
        _names.map(ex.Var))
    if depth == 0:
        return leaf
    sub = _trees(depth - 1)
    return st.one_of(
        leaf,
        sub.map(ex.Neg),
        st.tuples(_funcs, sub).map(lambda t: ex.Call(*t)),
        st.tuples(st.sampled_from("+-*/^"), sub, sub).map(lambda t: ex.BinOp(*t)))


@settings(max_examples=1200, deadline=None)
@given(_trees(4))
def test_to_source_parse_round_trip(tree):
    assert ex.parse(ex.to_source(tree)) == tree


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.5, max_value=3.0, allow_nan=False),
       st.floats(min_value=0.5, max_value=2.0, allow_nan=False))
def test_dual_evaluation_matches_finite_difference(r, M):
    tree = ex.parse("M^2/(2*x1^2) - 1/x1 + sin(x1)*exp(-x1)")

    def f(rv):
        return ad.real(ex.evaluate(tree, {"x1": rv, "M": M}))

    (rd,) = ad.seed([r], [0])
    exact = ex.evaluate(tree, {"x1": rd, "M": M}).partials[0]
    h = 1e-6
    approx = (f(r + h) - f(r - h)) / (2.0 * h)
    assert exact == pytest.approx(approx, rel=1e-5, abs=1e-6)
