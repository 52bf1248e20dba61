"""Rebuild the full dynamics from the reduced field: Z = j1Y + v(lift of X_red)."""

from __future__ import annotations

from . import symexpr as sx
from .dynamics import sode, split_vector_field, verify_dynamics
from .geometry import Connection, LagrangianSystem, VectorField, jet_prolongation
from .reduction import QuotientChart, ReducedSystem
from .report import CheckReport
from .symexpr import canon, differentiate


def lift_reduced_field(red: ReducedSystem, chart: QuotientChart | None = None) -> VectorField:
    """Transport X_red through the inverse chart; the dt coefficient is 0.

    Coefficients are d(Psi_t)/d(qbar, vbar) . X_red, all composed with Phi so
    that the result is a field on (t, q, v).
    """
    qc = chart or red.quotient
    full = qc.chart
    rc = red.chart
    comps = {full.t: sx.ZERO}
    for name, psi in zip(full.q + full.v, qc.inverse):
        rate = sx.add(*(differentiate(psi, b) * x for b, x in zip(rc.coords, red.field.coeffs)))
        comps[name] = canon(qc.pull(rate))
    return VectorField.from_components(full, comps)


def vertical_part(X: VectorField, c: Connection) -> VectorField:
    return split_vector_field(X, c)[1]


def reconstruct(sys: LagrangianSystem, c: Connection, red: ReducedSystem,
                chart: QuotientChart | None = None) -> VectorField:
    lift = lift_reduced_field(red, chart)
    return (jet_prolongation(c) + vertical_part(lift, c)).canon()


def reconstruction_report(sys: LagrangianSystem, c: Connection, red: ReducedSystem,
                          chart: QuotientChart | None = None, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """Z against X_L, the dynamical equation for Z, and the reduce/reconstruct round trip."""
    qc = chart or red.quotient
    lift = lift_reduced_field(red, qc)
    Z = (jet_prolongation(c) + vertical_part(lift, c)).canon()
    X = sode(sys)
    ZH, ZV = split_vector_field(Z, c)
    rep = CheckReport.build("reconstruction", {
        "Z-X_L": Z - X,
        "split(Z).H-j1Y": ZH - jet_prolongation(c),
        "split(Z).V-lift": ZV - lift,
        "push(Z-j1Y)-X_red": qc.push_field(Z - jet_prolongation(c)) - red.field,
    }, tol, trials, seed, info={"Z": Z, "X_L": X})
    return rep.merge(verify_dynamics(Z, sys, tol, trials, seed), "dynamics(Z)")
