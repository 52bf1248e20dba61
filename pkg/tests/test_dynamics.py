import random

import pytest
from hypothesis import given, settings, strategies as st

from connred import symexpr as sx
from connred.dynamics import (
    check_projectable, energy_rate, reduction_identities, sode, split_forms, split_one_form,
    split_two_form, split_vector_field, verify_dynamics,
)
from connred.errors import ChartMismatch, SingularHessian, SymmetryRequired
from connred.geometry import (
    Chart, Connection, OneForm, TwoForm, VectorField, dt_form, form_is_zero, interior_product,
    interior_product_1, jet_prolongation, poincare_cartan_forms,
)
from connred.symexpr import canon

from conftest import P, ex, fp, one_dof, random_poly_lagrangian


def same(a, b):
    return canon(sx._as_expr(a) - sx._as_expr(b)) == sx.ZERO


def field_equals(X, comps):
    want = VectorField.from_components(X.chart, {k: P(v) if isinstance(v, str) else v for k, v in comps.items()})
    return all(same(a, b) for a, b in zip(X.coeffs, want.coeffs))


# -- sode -------------------------------------------------------------------

def test_sode_of_ex():
    sys_, _ = ex()
    X = sode(sys_)
    assert field_equals(X, {"t": 1, "x": "vx", "y": "vy", "vx": "-(1 + vy)", "vy": "vx - 1 - V'(y)"})


def test_sode_of_fp():
    X = sode(fp()[0])
    assert field_equals(X, {"t": 1, "q": "v"})


def test_sode_of_linear_potential():
    # W = 1, b = -1
    X = sode(one_dof("1/2*v^2 - q")[0])
    assert field_equals(X, {"t": 1, "q": "v", "v": -1})


def test_sode_singular():
    with pytest.raises(SingularHessian):
        sode(one_dof("q*v")[0])


def test_sode_time_dependent_mass():
    # L = 1/2 exp(t) v^2: d/dt(exp(t) v) = 0 -> a = -v
    X = sode(one_dof("1/2*exp(t)*v^2")[0])
    assert field_equals(X, {"t": 1, "q": "v", "v": "-v"})


def test_sode_coupled_three_dof():
    ch = Chart(("a", "b", "c"))
    L = P("1/2*(va^2 + vb^2 + vc^2) + 1/2*va*vb - a*b*c")
    from connred.geometry import LagrangianSystem
    X = sode(LagrangianSystem(ch, L))
    assert verify_dynamics(X, LagrangianSystem(ch, L))


# -- verify_dynamics ---------------------------------------------------------

def test_verify_dynamics_passes_on_ex():
    sys_, _ = ex()
    r = verify_dynamics(sode(sys_), sys_)
    assert r and all(v == sx.ZERO for v in r.residuals.values())


def test_verify_dynamics_rejects_time_only_field_on_fp():
    sys_, _ = fp()
    r = verify_dynamics(VectorField.from_components(sys_.chart, {"t": 1}), sys_)
    assert not r
    assert r.failures() == {"i(X)Omega_L[dv]": "-v"}


def test_verify_dynamics_dt_pairing():
    sys_, _ = one_dof("1/2*v^2 - q")
    X = sode(sys_)
    r = verify_dynamics(X + VectorField.from_components(sys_.chart, {"t": 1}), sys_)
    assert not r.tests["i(X)dt-1"]
    assert r.residuals["i(X)dt-1"] == sx.ONE


def test_sode_uniqueness_spot_checks():
    # adding anything to X_L breaks the dynamical equation
    sys_, _ = ex()
    X = sode(sys_)
    rng = random.Random(0)
    for name in sys_.chart.coords:
        f = sx.Const(rng.randint(1, 4)) * sx.Var(rng.choice(sys_.chart.coords))
        bumped = X + VectorField.from_components(sys_.chart, {name: f})
        assert not verify_dynamics(bumped, sys_)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=3))
def test_sode_properties_random_lagrangians(seed, n):
    sys_ = random_poly_lagrangian(random.Random(seed), n, regular=True)
    X = sode(sys_)
    assert X.coeffs[0] == sx.ONE
    assert all(X[q] == sx.Var(v) for q, v in zip(sys_.chart.q, sys_.chart.v))
    assert verify_dynamics(X, sys_)
    assert sx.is_zero(energy_rate(sys_, Connection.standard(sys_.chart)))


# -- splits ------------------------------------------------------------------

def test_theta_v_of_ex():
    sys_, c = ex()
    sf = split_forms(sys_, c)
    assert same(sf.theta_v["t"], P("x - vx - t"))
    assert same(sf.theta_v["x"], P("vx - x + t"))
    assert same(sf.theta_v["y"], P("vy - x + t"))


def test_splits_for_standard_connection_autonomous():
    sys_, c = one_dof("1/2*v^2 - 1/2*q^2")
    theta, _ = poincare_cartan_forms(sys_)
    H, V = split_one_form(theta, c)
    assert same(H["t"], P("1/2*v^2 - 1/2*q^2 - v*v")) and H["q"] == sx.ZERO
    assert V["t"] == sx.ZERO and same(V["q"], P("v"))


def test_split_reassembles():
    sys_, c = ex()
    theta, omega = poincare_cartan_forms(sys_)
    H, V = split_one_form(theta, c)
    assert form_is_zero(H + V - theta)
    H2, V2 = split_two_form(omega, c)
    assert form_is_zero(H2 + V2 - omega)
    XH, XV = split_vector_field(sode(sys_), c)
    assert form_is_zero(XH + XV - sode(sys_))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_vertical_part_annihilates_jet(seed):
    rng = random.Random(seed)
    ch = Chart(("x", "y"))
    c = Connection(ch, (sx.Var("y"), sx.Const(rng.randint(-2, 2)) * sx.Var("t")))
    entries = {(i, j): sx.Const(rng.randint(-3, 3)) * sx.Var(rng.choice(ch.coords))
               for i in range(5) for j in range(i + 1, 5)}
    w = TwoForm.from_upper(ch, entries)
    _, V = split_two_form(w, c)
    assert form_is_zero(interior_product(jet_prolongation(c), V))
    a = OneForm(ch, tuple(sx.Var(rng.choice(ch.coords)) for _ in range(5)))
    _, Va = split_one_form(a, c)
    assert sx.is_zero(interior_product_1(jet_prolongation(c), Va))


def test_split_vector_field_of_ex():
    sys_, c = ex()
    XH, XV = split_vector_field(sode(sys_), c)
    assert field_equals(XH, {"t": 1, "x": 1})
    assert field_equals(XV, {"x": "vx - 1", "y": "vy", "vx": "-(1 + vy)", "vy": "vx - 1 - V'(y)"})
    assert sx.is_zero(interior_product_1(XV, dt_form(sys_.chart)))


def test_split_vector_field_trivial_cases():
    sys_, c = ex()
    j = jet_prolongation(c)
    assert split_vector_field(j, c)[1].nonzero_components() == {}
    Y = VectorField.from_components(sys_.chart, {"x": P("vy")})
    assert split_vector_field(Y, c)[0].nonzero_components() == {}


def test_split_chart_mismatch():
    _, c = ex()
    with pytest.raises(ChartMismatch):
        split_one_form(dt_form(Chart(("q",))), c)


# -- energy rate and projectability -----------------------------------------

@pytest.mark.parametrize("system", [ex, fp, lambda: one_dof("1/2*v^2 + t*q")])
def test_energy_rate_vanishes(system):
    sys_, c = system()
    assert canon(energy_rate(sys_, c)) == sx.ZERO


def test_check_projectable_ex_and_fp():
    for sys_, c in (ex(), fp()):
        r = check_projectable(sys_, c)
        assert r and len({k.split("[")[0] for k in r.residuals}) == 6
        assert check_projectable(sys_, c, extended=True)


def test_check_projectable_requires_symmetry():
    with pytest.raises(SymmetryRequired):
        check_projectable(*one_dof("1/2*v^2 + t*q"))


def test_reduction_identities_ex():
    assert reduction_identities(*ex())


def test_projectable_for_time_dependent_connection():
    sys_, c = one_dof("1/2*(v - t)^2 - 1/2*(q - t^2/2)^2", sx.Var("t"))
    assert check_projectable(sys_, c, extended=True)
    assert reduction_identities(sys_, c)
