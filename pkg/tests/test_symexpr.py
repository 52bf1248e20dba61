import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from connred import symexpr as sx
from connred.errors import EvaluationDomainError, ParseError, UnboundVariable, UnknownVariable
from connred.symexpr import Bindings, CallableRealization, canon, differentiate, is_zero, parse

from conftest import expressions, random_expr

# V(z) = sin(z) + z^2/2, with hand-written derivatives (independent of the engine)
V_NUMERIC = CallableRealization((
    lambda z: math.sin(z) + z * z / 2,
    lambda z: math.cos(z) + z,
    lambda z: -math.sin(z) + 1.0,
    lambda z: -math.cos(z),
))

EX_L = "1/2*(vx^2 + vy^2) - V(y) + (t - x)*vx + (t - x)*vy"


def ex_lagrangian():
    return parse(EX_L, symbols={"V"})


def central_difference(e, name, point, h=1e-5):
    plus = dict(point, **{name: point[name] + h})
    minus = dict(point, **{name: point[name] - h})
    b = lambda p: Bindings(p, {"V": V_NUMERIC})
    return (sx.evaluate(e, b(plus)) - sx.evaluate(e, b(minus))) / (2 * h)


def same(a, b):
    return canon(a - b) == sx.ZERO


# -- differentiate ----------------------------------------------------------

def test_derivative_of_ex_lagrangian_in_vx():
    d = differentiate(ex_lagrangian(), "vx")
    assert same(d, parse("vx + (t - x)"))


def test_derivative_of_ex_lagrangian_matches_finite_differences():
    rng = random.Random(7)
    L = ex_lagrangian()
    d = differentiate(L, "vx")
    for _ in range(10):
        p = {n: rng.uniform(-2, 2) for n in ("t", "x", "y", "vx", "vy")}
        fd = central_difference(L, "vx", p)
        sym = sx.evaluate(d, Bindings(p, {"V": V_NUMERIC}))
        assert abs(sym - fd) / max(1.0, abs(sym)) < 1e-7


def test_derivative_of_constant_is_zero():
    assert differentiate(sx.Const(Fraction(3, 7)), "x") == sx.ZERO


def test_uninterpreted_symbol_gives_formal_derivative():
    d = differentiate(parse("V(y)", symbols={"V"}), "y")
    assert d == sx.Sym("V", sx.Var("y"), 1)
    assert str(d) == "V'(y)"


def test_chain_rule_through_symbol():
    d = canon(differentiate(parse("V(x^2)", symbols={"V"}), "x"))
    assert same(d, parse("2*x*V'(x^2)", symbols={"V"}))


def test_unknown_variable():
    with pytest.raises(UnknownVariable):
        differentiate(sx.Var("x"), "x", declared=("t",))
    with pytest.raises(UnknownVariable):
        differentiate(sx.Var("x"), "1x")


def test_finite_difference_agreement_100_cases():
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(100):
        e = random_expr(rng, depth=5)
        name = rng.choice(("x", "y", "t"))
        p = {n: rng.uniform(-2, 2) for n in ("x", "y", "t")}
        d = differentiate(e, name)
        sym = sx.evaluate(d, Bindings(p, {"V": V_NUMERIC}))
        fd = central_difference(e, name, p)
        worst = max(worst, abs(sym - fd) / max(1.0, abs(sym)))
    assert worst < 1e-6


@settings(max_examples=60, deadline=None)
@given(expressions(depth=3), expressions(depth=3),
       st.fractions(max_denominator=9, min_value=-5, max_value=5),
       st.fractions(max_denominator=9, min_value=-5, max_value=5),
       st.sampled_from(["x", "y", "t"]))
def test_linearity(f, g, a, b, name):
    lhs = differentiate(a * f + b * g, name)
    rhs = a * differentiate(f, name) + b * differentiate(g, name)
    assert is_zero(lhs - rhs)


@settings(max_examples=40, deadline=None)
@given(expressions(depth=3), expressions(depth=3), st.sampled_from(["x", "y", "t"]))
def test_product_rule(f, g, name):
    lhs = differentiate(f * g, name)
    rhs = differentiate(f, name) * g + f * differentiate(g, name)
    assert is_zero(lhs - rhs)


@settings(max_examples=40, deadline=None)
@given(expressions(depth=3), expressions(depth=2, names=("x",)))
def test_chain_rule_by_substitution(f, inner):
    # d/dx f(u)|_{u=inner(x)} = f'(inner) * inner'
    fu = sx.substitute(f, {"x": sx.Var("u")})
    lhs = differentiate(sx.substitute(fu, {"u": inner}), "x")
    rhs = sx.substitute(differentiate(fu, "u"), {"u": inner}) * differentiate(inner, "x")
    assert is_zero(lhs - rhs)


@settings(max_examples=40, deadline=None)
@given(expressions(depth=4))
def test_clairaut(e):
    a = differentiate(differentiate(e, "x"), "y")
    b = differentiate(differentiate(e, "y"), "x")
    assert canon(a) == canon(b) or is_zero(a - b)


# -- canon ------------------------------------------------------------------

def test_canon_ring_identity():
    assert canon(parse("(x+t)*vx - x*vx")) == canon(parse("t*vx"))


@settings(max_examples=60, deadline=None)
@given(expressions(depth=5))
def test_canon_difference_with_self_is_zero(e):
    assert canon(e - e) == sx.ZERO


@settings(max_examples=80, deadline=None)
@given(expressions(depth=5))
def test_canon_idempotent(e):
    c = canon(e)
    assert canon(c) == c


def test_canon_of_ex_energy():
    raw = parse("(vx + t - x)*(vx - 1) + (vy + t - x)*vy", symbols={"V"}) - ex_lagrangian()
    assert canon(raw) == canon(parse("1/2*(vx^2+vy^2) + V(y) + x - t - vx", symbols={"V"}))


def test_canon_rational_functions():
    assert canon(parse("x/(x+1) + 1/(x+1)")) == sx.ONE
    assert canon(parse("(x^2-1)/(x-1)")) == canon(parse("x+1"))
    assert canon(parse("1/(x+y) - 1/(y+x)")) == sx.ZERO


def test_canon_merges_exponentials_and_roots():
    assert canon(parse("exp(2*t)*exp(-2*t)")) == sx.ONE
    assert canon(parse("exp(t)^3")) == canon(parse("exp(3*t)"))
    assert canon(parse("sqrt(x)*sqrt(x)")) == sx.Var("x")
    assert canon(parse("4^(1/2)")) == sx.Const(2)


def test_canon_has_no_zero_denominator():
    e = canon(parse("1/(x - x + y)"))
    assert not (isinstance(e, sx.Div) and e.den == sx.ZERO)
    with pytest.raises(ZeroDivisionError):
        canon(parse("1/(x - x)"))


# -- is_zero ----------------------------------------------------------------

def test_is_zero_symbolic_path():
    r = is_zero(parse("x*y - y*x"))
    assert r and r.path == "symbolic"


def test_is_zero_nonzero():
    r = is_zero(parse("x - t"))
    assert not r and r.path == "probe"


def test_is_zero_falls_back_to_probing_for_trig_identity():
    r = is_zero(parse("sin(x)^2 + cos(x)^2 - 1"), seed=11)
    assert r and r.path == "probe" and r.seed == 11 and r.trials == 32


def test_is_zero_handles_domain_errors_by_redrawing():
    r = is_zero(parse("log(x)^2 - log(x)*log(x) + sin(log(x))^2 + cos(log(x))^2 - 1"))
    assert r


def test_is_zero_gives_up_after_bounded_retries():
    with pytest.raises(EvaluationDomainError):
        is_zero(parse("sin(log(-1 - x^2))"), max_retries=5)


def test_is_zero_deterministic_in_seed():
    e = parse("sin(x)^2 + cos(x)^2 - 1 + x/1000000000000")
    assert is_zero(e, seed=3) == is_zero(e, seed=3)


def test_is_zero_argument_checks():
    with pytest.raises(ValueError):
        is_zero(sx.Var("x"), tol=0)
    with pytest.raises(ValueError):
        is_zero(sx.Var("x"), trials=0)


# -- substitute / evaluate / parse / print ---------------------------------

def test_substitute_time_slice_of_ex_energy():
    E = parse("1/2*(vx^2+vy^2) + V(y) + x - t - vx", symbols={"V"})
    assert same(sx.substitute(E, {"t": 0}), parse("1/2*(vx^2+vy^2) + V(y) + x - vx", symbols={"V"}))


def test_substitute_is_simultaneous():
    e = sx.substitute(parse("x - 2*y"), {"x": sx.Var("y"), "y": sx.Var("x")})
    assert same(e, parse("y - 2*x"))


def test_substitute_symbol_realization():
    r = sx.SymbolRealization("z", parse("z^3"))
    e = sx.substitute(parse("V'(x+1)", symbols={"V"}), Bindings({}, {"V": r}))
    assert same(e, parse("3*(x+1)^2"))


def test_evaluate_arithmetic():
    assert sx.evaluate(parse("x*vx"), {"x": 2, "vx": 3}) == 6


def test_evaluate_unbound():
    with pytest.raises(UnboundVariable):
        sx.evaluate(parse("x + y"), {"x": 1})
    with pytest.raises(UnboundVariable):
        sx.evaluate(parse("V(x)", symbols={"V"}), {"x": 1})


def test_evaluate_domain_errors():
    with pytest.raises(EvaluationDomainError):
        sx.evaluate(parse("log(x)"), {"x": -1})
    with pytest.raises(EvaluationDomainError):
        sx.evaluate(parse("1/x"), {"x": 0.0})


def test_parse_print_round_trip_ex_lagrangian():
    L = ex_lagrangian()
    assert canon(parse(str(L), symbols={"V"})) == canon(L)
    assert canon(parse(str(canon(L)), symbols={"V"})) == canon(L)


def test_parse_print_round_trip_100_random():
    rng = random.Random(99)
    for _ in range(100):
        e = random_expr(rng, depth=5)
        assert canon(parse(str(e), symbols={"V"})) == canon(e)
        c = canon(e)
        assert parse(str(c), symbols={"V"}) == c or canon(parse(str(c), symbols={"V"})) == c


@pytest.mark.parametrize("text,pos", [
    ("x + * y", 4),
    ("x + (y", 6),
    ("W(x)", 0),
    ("x $ y", 2),
    ("x^y", 1),
    ("sin", 0),
])
def test_parse_errors_report_position(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.position == pos


def test_parse_declared_variables():
    with pytest.raises(ParseError):
        parse("x + z", variables={"x"})
    assert parse("x + 1", variables={"x"}) == sx.add(sx.Var("x"), 1)


def test_parse_grammar_features():
    assert same(parse("2^-1*x**2"), parse("x^2/2"))
    assert same(parse("-x^2"), sx.neg(sx.power(sx.Var("x"), 2)))
    assert same(parse("1.5e1 + .5"), sx.Const(Fraction(31, 2)))
    assert parse("V''(y)", symbols={"V"}) == sx.Sym("V", sx.Var("y"), 2)


def test_expressions_are_immutable_and_hashable():
    e = parse("x + y")
    with pytest.raises(AttributeError):
        e.terms = ()
    assert {e: 1}[parse("x + y")] == 1


def test_compile_matches_evaluate():
    exprs = [ex_lagrangian(), differentiate(ex_lagrangian(), "y"), parse("exp(x)/(1+t^2)")]
    names = ["t", "x", "y", "vx", "vy"]
    f = sx.compile_exprs(exprs, names, Bindings({}, {"V": V_NUMERIC}))
    rng = random.Random(1)
    for _ in range(5):
        p = {n: rng.uniform(-2, 2) for n in names}
        got = f(*(p[n] for n in names))
        want = [sx.evaluate(e, Bindings(p, {"V": V_NUMERIC})) for e in exprs]
        assert max(abs(a - b) for a, b in zip(got, want)) < 1e-12
