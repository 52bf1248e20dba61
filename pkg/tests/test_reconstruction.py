import numpy as np
import pytest

from connred import symexpr as sx
from connred.dynamics import sode, split_vector_field, verify_dynamics
from connred.geometry import Chart, Connection, LagrangianSystem, VectorField, dt_form, form_is_zero, interior_product_1, jet_prolongation
from connred.reconstruction import lift_reduced_field, reconstruct, reconstruction_report, vertical_part
from connred.reduction import flow_auto, reduce
from connred.symexpr import canon

from conftest import HALF_SQUARE, P, ex, fp, one_dof


def reduced(system):
    sys_, c = system
    return sys_, c, reduce(sys_, c, flow_auto(c))


def test_lift_ex():
    sys_, c, red = reduced(ex())
    lift = lift_reduced_field(red)
    want = VectorField.from_components(sys_.chart, {
        "x": P("vx - 1"), "y": P("vy"), "vx": P("-(1 + vy)"), "vy": P("vx - 1 - V'(y)")})
    assert form_is_zero(lift - want)
    assert interior_product_1(lift, dt_form(sys_.chart)) == sx.ZERO


def test_lift_fp():
    sys_, c, red = reduced(fp())
    assert lift_reduced_field(red).nonzero_components() == {"q": sx.Var("v")}


def test_vertical_part_ignores_jet_direction():
    sys_, c, red = reduced(ex())
    lift = lift_reduced_field(red)
    f = P("x*vy + sin(t)")
    shifted = lift + jet_prolongation(c).scale(f)
    assert form_is_zero(vertical_part(shifted, c) - vertical_part(lift, c))


def test_reconstruct_ex_equals_sode():
    sys_, c, red = reduced(ex())
    Z = reconstruct(sys_, c, red)
    assert form_is_zero(Z - sode(sys_))
    assert verify_dynamics(Z, sys_)


def test_reconstruct_fp():
    sys_, c, red = reduced(fp())
    assert reconstruct(sys_, c, red).nonzero_components() == {"t": sx.ONE, "q": sx.Var("v")}


def test_reconstruct_numeric_spot_check():
    sys_, c, red = reduced(ex())
    b = sx.Bindings({}, {"V": HALF_SQUARE})
    names = list(sys_.chart.coords)
    Z = sx.compile_exprs(list(reconstruct(sys_, c, red).coeffs), names, b)
    X = sx.compile_exprs(list(sode(sys_).coeffs), names, b)
    rng = np.random.default_rng(20)
    worst = max(np.max(np.abs(Z(*p) - X(*p))) for p in rng.uniform(-3, 3, (20, 5)))
    assert worst < 1e-10


def test_round_trip_split_and_projection():
    sys_, c, red = reduced(ex())
    r = reconstruction_report(sys_, c, red)
    assert r, r.failures()
    Z = r.info["Z"]
    H, V = split_vector_field(Z, c)
    assert form_is_zero(H - jet_prolongation(c))
    assert form_is_zero(red.quotient.push_field(V) - red.field)


@pytest.mark.parametrize("L,gamma", [
    ("1/2*(v - t)^2 - 1/2*(q - t^2/2)^2", "t"),
    ("1/2*v^2 - 1/2*(q - 2*t)^2 + (q - 2*t)^3/3", "2"),
    ("1/2*exp(q - t)*(v - 1)^2 - cos(q - t)", "1"),
])
def test_reconstruction_for_other_systems(L, gamma):
    sys_, c = one_dof(L, P(gamma))
    red = reduce(sys_, c, flow_auto(c))
    assert reconstruction_report(sys_, c, red)


def test_reconstruction_two_dof_time_dependent_connection():
    ch = Chart(("x", "y"))
    c = Connection(ch, (P("y"), P("1")))
    # co-moving coordinates u = x - t*y + t^2/2, w = y - t are invariant
    u, w = P("x - t*y + t^2/2"), P("y - t")
    du, dw = P("vx - y - t*vy + t"), P("vy - 1")
    sys_ = LagrangianSystem(ch, (du * du + dw * dw) / 2 + u * dw - w * w * u / 3)
    red = reduce(sys_, c, flow_auto(c))
    r = reconstruction_report(sys_, c, red)
    assert r, r.failures()
