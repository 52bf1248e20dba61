"""Dynamical vector field, connection splittings and energy identities."""

from __future__ import annotations

from dataclasses import dataclass

from . import linalg
from . import symexpr as sx
from .errors import ChartMismatch, LinearSolveFailure, SingularHessian, SymmetryRequired
from .geometry import (
    Connection, LagrangianSystem, OneForm, TwoForm, VectorField,
    differential, dt_form, energy, exterior_derivative, interior_product,
    interior_product_1, is_symmetry, jet_prolongation, lie_bracket,
    lie_derivative_fn, lie_derivative_one_form, lie_derivative_two_form,
    poincare_cartan_forms, wedge_dt,
)
from .report import CheckReport
from .symexpr import canon, differentiate


def sode(sys: LagrangianSystem) -> VectorField:
    """X_L = d/dt + v^mu d/dq^mu + a^mu d/dv^mu with W a = b (Euler-Lagrange)."""
    ch = sys.chart
    W = sys.hessian
    if linalg.det(W) == sx.ZERO:
        raise SingularHessian(f"{sys.name}: velocity Hessian determinant is identically zero")
    p = [differentiate(sys.L, v) for v in ch.v]
    b = []
    for mu, q in enumerate(ch.q):
        rhs = differentiate(sys.L, q) - differentiate(p[mu], ch.t)
        rhs = rhs - sx.add(*(sx.Var(vn) * differentiate(p[mu], qn) for qn, vn in zip(ch.q, ch.v)))
        b.append(canon(rhs))
    try:
        acc = linalg.solve(W, b, name=f"{sys.name} accelerations")
    except LinearSolveFailure:
        raise
    comps = {ch.t: sx.ONE}
    comps.update({q: sx.Var(v) for q, v in zip(ch.q, ch.v)})
    comps.update(dict(zip(ch.v, acc)))
    return VectorField.from_components(ch, comps)


def verify_dynamics(X: VectorField, sys: LagrangianSystem, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """Residuals of i(X) Omega_L = 0 and i(X) dt = 1."""
    if X.chart != sys.chart:
        raise ChartMismatch("vector field and system use different charts")
    _, omega = poincare_cartan_forms(sys)
    return CheckReport.build("dynamics", {
        "i(X)Omega_L": interior_product(X, omega),
        "i(X)dt-1": interior_product_1(X, dt_form(sys.chart)) - 1,
    }, tol, trials, seed)


def split_one_form(a: OneForm, c: Connection):
    """(H, V) with H = (i(j1Y) a) dt and V = a - H."""
    if a.chart != c.chart:
        raise ChartMismatch("form and connection use different charts")
    j = jet_prolongation(c)
    H = dt_form(a.chart).scale(interior_product_1(j, a)).canon()
    return H, (a - H).canon()


def split_two_form(w: TwoForm, c: Connection):
    """(H, V) with H = dt ^ i(j1Y) w and V = w - H."""
    if w.chart != c.chart:
        raise ChartMismatch("form and connection use different charts")
    j = jet_prolongation(c)
    H = wedge_dt(interior_product(j, w)).canon()
    return H, (w - H).canon()


def split_vector_field(X: VectorField, c: Connection):
    """(X_H, X_V) with X_H = (i(X) dt) j1Y."""
    if X.chart != c.chart:
        raise ChartMismatch("field and connection use different charts")
    j = jet_prolongation(c)
    XH = j.scale(interior_product_1(X, dt_form(X.chart))).canon()
    return XH, (X - XH).canon()


@dataclass(frozen=True)
class SplitForms:
    connection: Connection
    theta_h: OneForm
    theta_v: OneForm
    omega_h: TwoForm
    omega_v: TwoForm


def split_forms(sys: LagrangianSystem, c: Connection) -> SplitForms:
    theta, omega = poincare_cartan_forms(sys)
    th, tv = split_one_form(theta, c)
    oh, ov = split_two_form(omega, c)
    return SplitForms(c, th, tv, oh, ov)


def energy_rate(sys: LagrangianSystem, c: Connection) -> sx.Expr:
    """canon(X_L(E) + (j1Y) L); zero for every regular system."""
    X = sode(sys)
    E = energy(sys, c)
    return canon(lie_derivative_fn(X, E) + lie_derivative_fn(jet_prolongation(c), sys.L))


def check_projectable(sys: LagrangianSystem, c: Connection, extended=False,
                      tol=1e-8, trials=32, seed=0) -> CheckReport:
    """Projectability of Theta^V, Omega^V and E along j1Y, plus dTheta^V = -Omega^V.

    Everything is recomputed from ``sys`` and ``c``. With ``extended`` the
    remaining invariances (Omega_L, dt and X_L under j1Y) are also checked.
    """
    sym = is_symmetry(sys, c, tol, trials, seed)
    if not sym:
        raise SymmetryRequired(f"{sys.name}: j1Y is not an infinitesimal symmetry "
                               f"(residual {sym.residual})")
    j = jet_prolongation(c)
    theta, omega = poincare_cartan_forms(sys)
    _, theta_v = split_one_form(theta, c)
    _, omega_v = split_two_form(omega, c)
    E = energy(sys, c)
    res = {
        "i(j1Y)Omega_V": interior_product(j, omega_v),
        "L(j1Y)Omega_V": lie_derivative_two_form(j, omega_v),
        "i(j1Y)Theta_V": interior_product_1(j, theta_v),
        "L(j1Y)Theta_V": lie_derivative_one_form(j, theta_v),
        "L(j1Y)E": lie_derivative_fn(j, E),
        "dTheta_V+Omega_V": (exterior_derivative(theta_v) + omega_v).canon(),
    }
    if extended:
        res["L(j1Y)Omega_L"] = lie_derivative_two_form(j, omega)
        res["L(j1Y)dt"] = lie_derivative_one_form(j, dt_form(sys.chart))
        res["[j1Y,X_L]"] = lie_bracket(j, sode(sys))
    return CheckReport.build("projectability", res, tol, trials, seed)


def reduction_identities(sys: LagrangianSystem, c: Connection, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """i(j1Y) Omega_L = -dE and i(X_L^V) Omega_L^V = dE (valid under the symmetry)."""
    X = sode(sys)
    j = jet_prolongation(c)
    _, omega = poincare_cartan_forms(sys)
    _, omega_v = split_two_form(omega, c)
    _, XV = split_vector_field(X, c)
    dE = differential(energy(sys, c), sys.chart)
    return CheckReport.build("reduction-identities", {
        "i(j1Y)Omega_L+dE": (interior_product(j, omega) + dE).canon(),
        "i(X_V)Omega_V-dE": (interior_product(XV, omega_v) - dE).canon(),
    }, tol, trials, seed)
