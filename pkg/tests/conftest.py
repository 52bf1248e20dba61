import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from connred import symexpr as sx

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"

VARS = ("x", "y", "t")


def random_expr(rng: random.Random, depth: int = 4, names=VARS, symbols=True):
    """Random tree whose numeric evaluation is safe on [-2, 2]^k."""
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.65:
            return sx.Var(rng.choice(names))
        return sx.Const(Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
    kind = rng.choice(["add", "add", "mul", "mul", "sub", "pow", "div", "sin", "cos", "exp", "sym", "log"])
    a = random_expr(rng, depth - 1, names, symbols)
    if kind == "add":
        return a + random_expr(rng, depth - 1, names, symbols)
    if kind == "sub":
        return a - random_expr(rng, depth - 1, names, symbols)
    if kind == "mul":
        return a * random_expr(rng, depth - 1, names, symbols)
    if kind == "pow":
        return sx.power(a, rng.randint(0, 3))
    if kind == "div":
        return a / (1 + sx.power(random_expr(rng, depth - 1, names, symbols), 2))
    if kind == "log":
        return sx.log(2 + sx.sin(a))
    if kind == "exp":
        return sx.exp(sx.sin(a))
    if kind == "sym" and symbols:
        return sx.Sym("V", a)
    return sx.Func(kind if kind in ("sin", "cos") else "sin", a)


@st.composite
def expressions(draw, depth=4, names=VARS, symbols=True):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_expr(random.Random(seed), depth, names, symbols)


@pytest.fixture
def problems_dir():
    return PROBLEMS


# -- running systems ------------------------------------------------------------

from connred.geometry import Chart, Connection, LagrangianSystem  # noqa: E402

EX_L = "1/2*(vx^2 + vy^2) - V(y) + (t - x)*vx + (t - x)*vy"
HALF_SQUARE = sx.SymbolRealization("z", sx.parse("1/2*z^2"))


def ex():
    ch = Chart(("x", "y"))
    return LagrangianSystem(ch, sx.parse(EX_L, symbols={"V"}), "EX"), Connection(ch, (1, 0))


def fp():
    ch = Chart(("q",))
    return LagrangianSystem(ch, sx.parse("1/2*v^2"), "FP"), Connection.standard(ch)


def one_dof(L, gamma=0):
    ch = Chart(("q",))
    return LagrangianSystem(ch, sx.parse(L), "1dof"), Connection(ch, (sx._as_expr(gamma),))


def P(text, symbols=("V",)):
    return sx.parse(text, symbols=set(symbols))


def random_poly_lagrangian(rng: random.Random, n: int, degree: int = 3, regular: bool = False):
    """Random polynomial L in (t, q, v) of total degree <= degree.

    With ``regular`` the extra monomials are at most linear in the velocities,
    so the velocity Hessian stays the identity.
    """
    ch = Chart(tuple(f"q{i}" for i in range(n)), tuple(f"v{i}" for i in range(n)))
    names = ch.coords
    terms = [sx.Const(Fraction(1, 2)) * sx.Var(v) * sx.Var(v) for v in ch.v]
    for _ in range(rng.randint(2, 6)):
        deg = rng.randint(1, degree)
        picks = [rng.choice(names) for _ in range(deg)]
        if regular:
            vs = [p for p in picks if p in ch.v]
            picks = [p for p in picks if p not in ch.v] + vs[:1]
        mono = sx.mul(*(sx.Var(p) for p in picks))
        terms.append(sx.Const(Fraction(rng.randint(-3, 3), rng.randint(1, 3))) * mono)
    return LagrangianSystem(ch, sx.add(*terms), "random")
