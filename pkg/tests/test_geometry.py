import random

import pytest
from hypothesis import given, settings, strategies as st

from connred import symexpr as sx
from connred.errors import ChartMismatch
from connred.geometry import (
    Chart, Connection, LagrangianSystem, OneForm, TwoForm, VectorField, check_regular,
    closedness_residuals, differential, dt_form, energy, exterior_derivative,
    exterior_derivative_2, form_is_zero, from_dict, interior_product, interior_product_1,
    is_symmetry, jet_prolongation, lie_bracket, lie_derivative_fn, lie_derivative_one_form,
    lie_derivative_two_form, poincare_cartan_forms, suspension, wedge_dt,
)
from connred.symexpr import canon

from conftest import P, ex, fp, one_dof, random_poly_lagrangian


def same(a, b):
    return canon(sx._as_expr(a) - sx._as_expr(b)) == sx.ZERO


def same_form(a, b):
    return all(same(x, y) for x, y in zip(a.coeffs, b.coeffs))


# -- chart and containers ---------------------------------------------------

def test_chart_defaults_and_order():
    ch = Chart(("x", "y"))
    assert ch.coords == ("t", "x", "y", "vx", "vy")
    assert Chart(("q",)).v == ("v",)
    assert ch.dim == 5 and ch.n == 2


def test_chart_rejects_duplicates():
    with pytest.raises(ValueError):
        Chart(("x", "x"))


def test_two_form_must_be_antisymmetric():
    ch = Chart(("q",))
    with pytest.raises(ValueError):
        TwoForm(ch, ((0, 1, 0), (1, 0, 0), (0, 0, 0)))


def test_chart_mismatch():
    a, b = Chart(("x",)), Chart(("y",))
    with pytest.raises(ChartMismatch):
        interior_product_1(VectorField.from_components(a, {"t": 1}), dt_form(b))


def test_serialization_round_trip():
    sys_, c = ex()
    theta, omega = poincare_cartan_forms(sys_)
    X = jet_prolongation(c)
    for obj in (theta, omega, X):
        back = from_dict(obj.to_dict())
        assert type(back) is type(obj)
        assert back.chart == obj.chart
        if isinstance(obj, TwoForm):
            assert all(same(a, b) for ra, rb in zip(back.matrix, obj.matrix) for a, b in zip(ra, rb))
        else:
            assert same_form(back, obj)


# -- regularity -------------------------------------------------------------

def test_ex_is_regular_symbolically():
    sys_, _ = ex()
    r = check_regular(sys_)
    assert r and r.path == "symbolic"
    assert sys_.hessian == [[sx.ONE, sx.ZERO], [sx.ZERO, sx.ONE]]


def test_degenerate_lagrangian_is_not_regular():
    sys_, _ = one_dof("q*v")
    assert not check_regular(sys_)


def test_regularity_probing_finds_singular_points():
    # W = 3 v^2 vanishes on v = 0 only; probing away from it passes
    sys_, _ = one_dof("1/4*v^4")
    r = check_regular(sys_, probes=32)
    assert r.path == "probe" and r.probes == 32


# -- connection, suspension, prolongation ----------------------------------

def test_suspension_and_jet_of_ex():
    _, c = ex()
    assert suspension(c).nonzero_components() == {"t": sx.ONE, "x": sx.ONE}
    assert jet_prolongation(c).nonzero_components() == {"t": sx.ONE, "x": sx.ONE}


def test_jet_prolongation_velocity_components():
    ch = Chart(("q",))
    c = Connection(ch, (P("t*q^2"),))
    j = jet_prolongation(c)
    assert same(j["v"], P("q^2 + 2*t*q*v"))


def test_connection_must_not_depend_on_velocities():
    ch = Chart(("q",))
    with pytest.raises(ValueError):
        Connection(ch, (P("v"),))


# -- Poincare-Cartan forms and energy --------------------------------------

def test_poincare_cartan_one_form_of_ex():
    sys_, _ = ex()
    theta, _ = poincare_cartan_forms(sys_)
    assert same(theta["t"], P("-1/2*(vx^2+vy^2) - V(y)"))
    assert same(theta["x"], P("vx + t - x"))
    assert same(theta["y"], P("vy + t - x"))
    assert theta["vx"] == sx.ZERO


def test_omega_is_minus_d_theta():
    sys_, _ = ex()
    theta, omega = poincare_cartan_forms(sys_)
    d = exterior_derivative(theta)
    assert all(same(a, -b) for ra, rb in zip(omega.matrix, d.matrix) for a, b in zip(ra, rb))


def test_energy_of_ex():
    sys_, c = ex()
    assert same(energy(sys_, c), P("1/2*(vx^2+vy^2) + V(y) + x - t - vx"))


def test_energy_of_fp_is_kinetic():
    sys_, c = fp()
    assert same(energy(sys_, c), P("1/2*v^2"))


def test_symmetry_of_ex():
    sys_, c = ex()
    assert is_symmetry(sys_, c)
    assert not is_symmetry(sys_, Connection.standard(sys_.chart))
    assert same(lie_derivative_fn(jet_prolongation(Connection.standard(sys_.chart)), sys_.L), P("vx + vy"))


# -- exterior calculus ------------------------------------------------------

def test_interior_product_convention():
    ch = Chart(("q",))
    w = TwoForm.from_upper(ch, {(0, 1): sx.ONE})  # dt ^ dq
    X = VectorField.from_components(ch, {"t": 1})
    Y = VectorField.from_components(ch, {"q": 1})
    assert interior_product(X, w).coeffs == (sx.ZERO, sx.ONE, sx.ZERO)
    assert interior_product(Y, w).coeffs == (sx.Const(-1), sx.ZERO, sx.ZERO)


def test_wedge_dt():
    ch = Chart(("q",))
    a = OneForm.from_components(ch, {"q": P("v"), "t": P("q")})
    w = wedge_dt(a)
    assert same(w[0, 1], P("v")) and same(w[1, 0], P("-v"))


def test_d_of_exact_form_is_zero():
    sys_, c = ex()
    df = differential(energy(sys_, c), sys_.chart)
    assert form_is_zero(exterior_derivative(df))


def test_ex_omega_closed_and_invariant():
    sys_, c = ex()
    _, omega = poincare_cartan_forms(sys_)
    assert closedness_residuals(omega) == {}
    assert form_is_zero(lie_derivative_two_form(jet_prolongation(c), omega))
    assert form_is_zero(lie_derivative_one_form(jet_prolongation(c), dt_form(sys_.chart)))


def test_cartan_formula_against_coordinate_lie_derivative():
    # (L_X a)_j = X^i d_i a_j + a_i d_j X^i
    sys_, c = ex()
    theta, _ = poincare_cartan_forms(sys_)
    X = VectorField.from_components(sys_.chart, {"t": P("x"), "x": P("vy^2"), "vy": P("t*y")})
    got = lie_derivative_one_form(X, theta)
    cs = sys_.chart.coords
    for j, cj in enumerate(cs):
        want = sx.add(*(X.coeffs[i] * sx.differentiate(theta.coeffs[j], ci) for i, ci in enumerate(cs)))
        want = want + sx.add(*(theta.coeffs[i] * sx.differentiate(X.coeffs[i], cj) for i in range(len(cs))))
        assert sx.is_zero(got.coeffs[j] - want)


def test_lie_bracket_antisymmetric():
    sys_, c = ex()
    X = VectorField.from_components(sys_.chart, {"x": P("vx"), "vx": P("-y")})
    Y = jet_prolongation(c)
    assert form_is_zero(lie_bracket(X, Y) + lie_bracket(Y, X))


def test_exterior_derivative_2_is_totally_antisymmetric():
    sys_, _ = random_poly_lagrangian(random.Random(5), 2), None
    _, omega = poincare_cartan_forms(sys_)
    theta = OneForm.from_components(sys_.chart, {"q0": P("q1*t^2"), "v1": P("t*q0*v0")})
    B = exterior_derivative_2(exterior_derivative(theta) + omega)
    d = sys_.chart.dim
    for i in range(d):
        for j in range(d):
            for k in range(d):
                assert same(B[i][j][k], -B[j][i][k])
                assert same(B[i][j][k], -B[i][k][j])


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=3))
def test_omega_antisymmetric_and_closed_for_random_polynomial_lagrangians(seed, n):
    sys_ = random_poly_lagrangian(random.Random(seed), n)
    _, omega = poincare_cartan_forms(sys_)
    assert omega.is_antisymmetric()
    assert closedness_residuals(omega) == {}


def test_hessian_of_quartic():
    # d^2/dv^2 (v^4/2) = 6 v^2; the 3 v^2 Hessian belongs to v^4/4
    assert same(one_dof("1/2*v^4")[0].hessian[0][0], P("6*v^2"))
    assert same(one_dof("1/4*v^4")[0].hessian[0][0], P("3*v^2"))


def test_jet_prolongation_of_linear_connection():
    _, c = one_dof("1/2*v^2", P("q"))
    j = jet_prolongation(c)
    assert j.nonzero_components() == {"t": sx.ONE, "q": sx.Var("q"), "v": sx.Var("v")}


def test_fp_theta():
    sys_, _ = fp()
    theta, _ = poincare_cartan_forms(sys_)
    assert same(theta["t"], P("-1/2*v^2")) and same(theta["q"], P("v")) and theta["v"] == sx.ZERO


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=3))
def test_standard_connection_energy_is_classical(seed, n):
    sys_ = random_poly_lagrangian(random.Random(seed), n)
    ch = sys_.chart
    classical = sx.add(*(sx.Var(v) * sx.differentiate(sys_.L, v) for v in ch.v)) - sys_.L
    assert same(energy(sys_, Connection.standard(ch)), classical)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=2))
def test_double_interior_product_vanishes(seed, n):
    rng = random.Random(seed)
    sys_ = random_poly_lagrangian(rng, n)
    _, omega = poincare_cartan_forms(sys_)
    X = VectorField(sys_.chart, tuple(sx.Const(rng.randint(-3, 3)) * sx.Var(rng.choice(sys_.chart.coords))
                                      for _ in sys_.chart.coords))
    assert sx.is_zero(interior_product_1(X, interior_product(X, omega)))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_jet_prolongation_restricts_to_suspension(seed):
    rng = random.Random(seed)
    ch = Chart(("q0", "q1"))
    gamma = tuple(sx.Const(rng.randint(-2, 2)) * sx.Var(rng.choice(("t", "q0", "q1"))) ** rng.randint(0, 2)
                  for _ in range(2))
    c = Connection(ch, gamma)
    j, s = jet_prolongation(c), suspension(c)
    assert j.coeffs[:3] == s.coeffs[:3]
    assert sx.is_zero(interior_product_1(j, dt_form(ch)) - 1)


def test_hessian_is_symmetric_for_random_lagrangians():
    rng = random.Random(3)
    for _ in range(10):
        W = random_poly_lagrangian(rng, 3).hessian
        assert all(W[i][j] == W[j][i] for i in range(3) for j in range(3))
