"""Reduction by the flow of the suspension: quotient chart, reduced system, pullbacks.

Orbits of j1Y are represented by their point on the slice t = 0. A flow
``phi_s(q, t)`` of the suspension gives the chart

    qbar = phi_{-t}(q, t)
    vbar = (d phi_s/dt + d phi_s/dq . v) at s = -t

where d/dt only acts on the explicit base-time slot of ``phi`` (``s`` is
held fixed and substituted afterwards).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from . import symexpr as sx
from .dynamics import split_one_form, split_two_form
from .errors import (
    InvalidFlow, LinearSolveFailure, NonInvertibleVelocityMap, SingularHessian,
    SymmetryRequired, UnsupportedConnection,
)
from .geometry import (
    Chart, Connection, LagrangianSystem, OneForm, TwoForm, VectorField,
    closedness_residuals, differential, energy, exterior_derivative,
    interior_product, is_symmetry, lie_derivative_fn, poincare_cartan_forms,
)
from .report import CheckReport
from .symexpr import Expr, canon, differentiate


# ---------------------------------------------------------------------------
# antiderivatives (polynomials times sin/cos/exp of linear arguments)


def _linear_rate(arg: Expr, t: str):
    a = canon(differentiate(arg, t))
    if a == sx.ZERO or t in sx.free_vars(a):
        return None
    return a


def _antiderivative_term(coef: Expr, k: int, g, t: str) -> Expr:
    tv = sx.Var(t)
    if g is None:
        return coef * sx.power(tv, k + 1) / (k + 1)
    a = _linear_rate(g.arg, t)
    if a is None:
        raise UnsupportedConnection(f"cannot integrate {g} in {t}")
    # G = scale * h with G' = g
    scale, h = {"sin": (-1 / a, sx.Func("cos", g.arg)),
                "cos": (1 / a, sx.Func("sin", g.arg)),
                "exp": (1 / a, g)}[g.name]
    if k == 0:
        return coef * scale * h
    # by parts: int t^k g = t^k G - k int t^(k-1) G
    return coef * scale * sx.power(tv, k) * h - k * _antiderivative_term(coef * scale, k - 1, h, t)


def antiderivative(e: Expr, t: str = "t") -> Expr:
    """Some A with dA/dt = e, for sums of c * t^k * [sin|cos|exp](a t + b)."""
    e = canon(e)
    if t not in sx.free_vars(e):
        return e * sx.Var(t)
    if isinstance(e, sx.Div):
        if t in sx.free_vars(e.den):
            raise UnsupportedConnection(f"cannot integrate {e} in {t} (t in a denominator)")
        return antiderivative(e.num, t) / e.den
    if isinstance(e, sx.Add):
        return sx.add(*(antiderivative(term, t) for term in e.terms))
    factors = e.factors if isinstance(e, sx.Mul) else (e,)
    coef, k, g = [], 0, None
    for f in factors:
        if t not in sx.free_vars(f):
            coef.append(f)
        elif f == sx.Var(t):
            k += 1
        elif isinstance(f, sx.Pow) and f.base == sx.Var(t) and f.exponent.denominator == 1 and f.exponent > 0:
            k += int(f.exponent)
        elif isinstance(f, sx.Func) and f.name in ("sin", "cos", "exp") and g is None:
            g = f
        else:
            raise UnsupportedConnection(f"cannot integrate {e} in {t}")
    out = _antiderivative_term(sx.mul(*coef), k, g, t)
    if not sx.is_zero(differentiate(out, t) - e):
        raise UnsupportedConnection(f"antiderivative check failed for {e}")
    return out


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True)
class Flow:
    """phi^mu_s(q, t): the Q-part of the flow of the suspension, in (s, q, t)."""

    chart: Chart
    phi: tuple
    s: str = "s"
    provenance: str = "user-supplied"

    def __post_init__(self):
        phi = tuple(sx._as_expr(p) for p in self.phi)
        if len(phi) != self.chart.n:
            raise InvalidFlow(f"flow needs {self.chart.n} components, got {len(phi)}")
        if self.s in self.chart.coords:
            raise InvalidFlow(f"flow parameter {self.s!r} clashes with a chart coordinate")
        allowed = set(self.chart.q) | {self.chart.t, self.s}
        for p in phi:
            bad = sx.free_vars(p) - allowed
            if bad:
                raise InvalidFlow(f"flow components may depend on (s, q, t) only; found {sorted(bad)}")
        object.__setattr__(self, "phi", phi)

    def at(self, s, q=None, t=None) -> tuple:
        """phi with s (and optionally q, t) replaced simultaneously."""
        b = {self.s: s}
        if q is not None:
            b.update(dict(zip(self.chart.q, q)))
        if t is not None:
            b[self.chart.t] = t
        return tuple(sx.substitute(p, b) for p in self.phi)

    def prolonged(self) -> tuple:
        """Flow of j1Y on (t, q, v) for parameter s: (t+s, phi_s, d_t phi_s + d_q phi_s . v)."""
        ch = self.chart
        vel = tuple(canon(differentiate(p, ch.t) + sx.add(*(sx.Var(v) * differentiate(p, q)
                                                              for q, v in zip(ch.q, ch.v))))
                    for p in self.phi)
        return (sx.Var(ch.t) + sx.Var(self.s),) + self.phi + vel

    def to_dict(self):
        return {"parameter": self.s, "provenance": self.provenance,
                "components": {q: str(p) for q, p in zip(self.chart.q, self.phi)}}


def _fresh(chart, base):
    name, i = base, 0
    while name in chart.coords:
        i += 1
        name = f"{base}{i}"
    return name


def _matrix_exponential(M, sv):
    """exp(s M) as Exprs for constant M that is diagonal or nilpotent."""
    n = len(M)
    if all(M[i][j] == 0 for i in range(n) for j in range(n) if i != j):
        return [[sx.exp(M[i][i] * sv) if i == j else sx.ZERO for j in range(n)] for i in range(n)]
    powers = [[[Fraction(int(i == j)) for j in range(n)] for i in range(n)]]
    for _ in range(n):
        P = powers[-1]
        powers.append([[sum(P[i][k] * M[k][j] for k in range(n)) for j in range(n)] for i in range(n)])
    if any(x != 0 for row in powers[n] for x in row):
        raise UnsupportedConnection("constant connection matrix is neither diagonal nor nilpotent")
    return [[canon(sx.add(*(powers[k][i][j] * sx.power(sv, k) / math.factorial(k) for k in range(n))))
             for j in range(n)] for i in range(n)]


def flow_auto(c: Connection) -> Flow:
    """Closed-form flow for Gamma = M q + b(t) with M constant (zero, diagonal or nilpotent).

    phi_s = exp(sM) q + int_0^s exp((s-u)M) b(t+u) du, the integral taken by
    ``antiderivative``. Anything else raises ``UnsupportedConnection``.
    """
    ch = c.chart
    s = _fresh(ch, "s")
    u = _fresh(ch, "u")
    gamma = [canon(g) for g in c.gamma]
    tv, sv, uv = sx.Var(ch.t), sx.Var(s), sx.Var(u)
    M, b = [], []
    for g in gamma:
        row = []
        for q in ch.q:
            d = canon(differentiate(g, q))
            if not isinstance(d, sx.Const):
                raise UnsupportedConnection("connection is not affine in q with a constant matrix")
            row.append(d.value)
        M.append(row)
        rest = canon(g - sx.add(*(m * sx.Var(q) for m, q in zip(row, ch.q))))
        if set(ch.q) & sx.free_vars(rest):
            raise UnsupportedConnection("connection is not affine in q with a constant matrix")
        b.append(rest)
    n = ch.n
    E = _matrix_exponential(M, sv)
    E_back = [[sx.substitute(x, {s: sv - uv}) for x in row] for row in E]
    b_shift = [sx.substitute(x, {ch.t: tv + uv}) for x in b]
    phi = []
    for i in range(n):
        hom = sx.add(*(E[i][j] * sx.Var(q) for j, q in enumerate(ch.q)))
        integrand = canon(sx.add(*(E_back[i][j] * b_shift[j] for j in range(n))))
        if integrand == sx.ZERO:
            inh = sx.ZERO
        else:
            A = antiderivative(integrand, u)
            inh = sx.substitute(A, {u: sv}) - sx.substitute(A, {u: 0})
        phi.append(canon(hom + inh))
    return Flow(ch, tuple(phi), s, "auto-derived")


def flow_validate(f: Flow, c: Connection, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """phi_0 = id, d phi/ds = Gamma(phi, t + s) and the group property (probed)."""
    ch = f.chart
    sv = sx.Var(f.s)
    at0 = f.at(0)
    shifted = {ch.t: sx.Var(ch.t) + sv}
    shifted.update(dict(zip(ch.q, f.phi)))
    gamma_on_flow = [sx.substitute(g, shifted) for g in c.gamma]
    res = {}
    for q, p0, p, g in zip(ch.q, at0, f.phi, gamma_on_flow):
        res[f"phi_0-id[{q}]"] = p0 - sx.Var(q)
        res[f"dphi/ds-Gamma[{q}]"] = differentiate(p, f.s) - g
    s1, s2 = _fresh(ch, "s_a"), _fresh(ch, "s_b")
    first = f.at(sx.Var(s1))
    for q, p12, p2 in zip(ch.q, f.at(sx.Var(s1) + sx.Var(s2)),
                          f.at(sx.Var(s2), q=first, t=sx.Var(ch.t) + sx.Var(s1))):
        res[f"group[{q}]"] = p12 - p2
    return CheckReport.build("flow", res, tol, trials, seed, info={"flow": f.to_dict()})


# ---------------------------------------------------------------------------
# quotient chart


def bar_chart(chart: Chart) -> Chart:
    """Reduced chart (qbar, vbar) without time."""
    return Chart(tuple(q + "bar" for q in chart.q), tuple(v + "bar" for v in chart.v), None)


@dataclass(frozen=True)
class QuotientChart:
    """Phi: (t, q, v) -> (qbar, vbar) and its inverse at a given t."""

    chart: Chart
    reduced: Chart
    flow: Flow
    qbar: tuple
    vbar: tuple
    q_of: tuple
    v_of: tuple
    vbar_alt: tuple = ()

    @property
    def forward(self) -> tuple:
        return self.qbar + self.vbar

    @property
    def inverse(self) -> tuple:
        return self.q_of + self.v_of

    def forward_subs(self) -> dict:
        return dict(zip(self.reduced.coords, self.forward))

    def inverse_subs(self) -> dict:
        return dict(zip(self.chart.q + self.chart.v, self.inverse))

    def pull(self, e: Expr) -> Expr:
        """e(qbar, vbar) composed with Phi, as a function of (t, q, v)."""
        return sx.substitute(e, self.forward_subs())

    def push(self, e: Expr) -> Expr:
        """e(t, q, v) expressed in (t, qbar, vbar) through the inverse map."""
        return sx.substitute(e, self.inverse_subs())

    def push_field(self, X: VectorField) -> VectorField:
        """Tangent map of Phi applied to X, expressed on the reduced chart.

        Only meaningful when the result is independent of t (projectable X)."""
        coeffs = [canon(self.push(lie_derivative_fn(X, phi))) for phi in self.forward]
        return VectorField(self.reduced, tuple(coeffs))

    def roundtrip_residuals(self) -> dict:
        """Phi o Phi^-1 - id, as expressions in (t, qbar, vbar)."""
        return {f"{name}": canon(self.push(phi) - sx.Var(name))
                for name, phi in zip(self.reduced.coords, self.forward)}

    def numeric(self, bindings=None):
        """Compiled forward map f(t, q..., v...) -> array(qbar..., vbar...)."""
        return sx.compile_exprs(list(self.forward), list(self.chart.coords), bindings)

    def numeric_inverse(self, bindings=None):
        """Compiled inverse f(t, qbar..., vbar...) -> array(q..., v...)."""
        return sx.compile_exprs(list(self.inverse), [self.chart.t] + list(self.reduced.coords), bindings)

    def to_dict(self):
        return {"forward": {n: str(e) for n, e in zip(self.reduced.coords, self.forward)},
                "inverse": {n: str(e) for n, e in zip(self.chart.q + self.chart.v, self.inverse)}}


def quotient_chart(f: Flow, c: Connection) -> QuotientChart:
    ch = f.chart
    red = bar_chart(ch)
    tv = sx.Var(ch.t)
    back = {f.s: -tv}
    qbar = tuple(canon(sx.substitute(p, back)) for p in f.phi)
    J = [[canon(sx.substitute(differentiate(p, q), back)) for q in ch.q] for p in f.phi]
    k = [canon(sx.substitute(differentiate(p, ch.t), back)) for p in f.phi]
    vbar = tuple(canon(kk + sx.add(*(Jr[j] * sx.Var(v) for j, v in enumerate(ch.v))))
                 for kk, Jr in zip(k, J))
    # the other reading: total t-derivative of qbar (s = -t slot included)
    alt = tuple(canon(differentiate(qb, ch.t) + sx.add(*(sx.Var(v) * differentiate(qb, q)
                                                          for q, v in zip(ch.q, ch.v))))
                for qb in qbar)
    # inverse: q = phi_t(qbar, 0), v = J^-1 (vbar - k)
    qbv = [sx.Var(n) for n in red.q]
    q_of = tuple(canon(p) for p in f.at(tv, q=qbv, t=0))
    to_bar = dict(zip(ch.q, q_of))
    Jb = [[canon(sx.substitute(x, to_bar)) for x in row] for row in J]
    rhs = [canon(sx.Var(vb) - sx.substitute(kk, to_bar)) for vb, kk in zip(red.v, k)]
    try:
        v_of = tuple(linalg.solve(Jb, rhs, name="velocity map"))
    except LinearSolveFailure as exc:
        raise NonInvertibleVelocityMap(str(exc)) from exc
    return QuotientChart(ch, red, f, qbar, vbar, q_of, v_of, alt)


# ---------------------------------------------------------------------------
# reduced system


@dataclass(frozen=True)
class ReducedSystem:
    chart: Chart
    L: Expr
    theta: OneForm
    omega: TwoForm
    energy: Expr
    field: VectorField
    energy_lagrangian: Expr
    quotient: QuotientChart
    info: dict = dataclasses.field(default_factory=dict, compare=False)

    @property
    def mismatch(self) -> Expr:
        """canon(E_red - E_{Lbar}); zero exactly when the reduced system is Lagrangian for Lbar."""
        return canon(self.energy - self.energy_lagrangian)

    def structure_check(self, tol=1e-8, trials=32, seed=0) -> CheckReport:
        w = self.omega
        res = {"omega+omega^T": TwoForm(w.chart, tuple(tuple(w.matrix[i][j] + w.matrix[j][i]
                                                             for j in range(w.chart.dim))
                                                       for i in range(w.chart.dim)))}
        res.update({f"d omega[{k}]": v for k, v in closedness_residuals(w).items()})
        rep = CheckReport.build("reduced-structure", res, tol, trials, seed)
        d = linalg.det([list(r) for r in w.matrix])
        rep.info["det(omega)"] = str(d)
        rep.tests["det(omega)!=0"] = sx.ZeroTest(not sx.is_zero(d, tol, trials, seed), "symbolic"
                                                  if isinstance(d, sx.Const) else "probe", seed, trials)
        rep.residuals["det(omega)!=0"] = sx.ZERO
        return rep

    def to_dict(self):
        return {"chart": self.chart.to_dict(), "L_bar": str(self.L),
                "theta": self.theta.to_dict("theta"), "omega": self.omega.to_dict("omega"),
                "energy": str(self.energy), "energy_L_bar": str(self.energy_lagrangian),
                "mismatch": str(self.mismatch), "field": self.field.to_dict("reduced_field"),
                "quotient_chart": self.quotient.to_dict()}


def _to_bar(e: Expr, ch: Chart, red: Chart) -> Expr:
    b = {ch.t: 0}
    b.update({a: sx.Var(bn) for a, bn in zip(ch.q + ch.v, red.q + red.v)})
    return canon(sx.substitute(e, b))


def reduce(sys: LagrangianSystem, c: Connection, f: Flow, tol=1e-8, trials=32, seed=0) -> ReducedSystem:
    ch = sys.chart
    sym = is_symmetry(sys, c, tol, trials, seed)
    if not sym:
        raise SymmetryRequired(f"{sys.name}: j1Y is not an infinitesimal symmetry (residual {sym.residual})")
    if linalg.det(sys.hessian) == sx.ZERO:
        raise SingularHessian(f"{sys.name}: velocity Hessian determinant is identically zero")
    fv = flow_validate(f, c, tol, trials, seed)
    if not fv:
        raise InvalidFlow(f"flow fails validation: {fv.failures()}")
    qc = quotient_chart(f, c)
    red = qc.reduced
    Lb = _to_bar(sys.L, ch, red)
    Eb = _to_bar(energy(sys, c), ch, red)
    p = [canon(differentiate(Lb, v)) for v in red.v]
    theta = OneForm.from_components(red, dict(zip(red.q, p)))
    omega = (-exterior_derivative(theta)).canon()
    dE = differential(Eb, red)
    A = [list(r) for r in omega.matrix]
    if linalg.det(A) == sx.ZERO:
        raise SingularHessian(f"{sys.name}: reduced 2-form is degenerate")
    field = VectorField(red, tuple(linalg.solve(linalg.transpose(A), list(dE.coeffs), name="reduced field")))
    EL = canon(sx.add(*(sx.Var(v) * pv for v, pv in zip(red.v, p))) - Lb)
    # orbit-constancy cross-check: Lbar o Phi = L
    cross = sx.is_zero(qc.pull(Lb) - sys.L, tol, trials, seed)
    return ReducedSystem(red, Lb, theta, omega, Eb, field, EL, qc,
                         {"L_bar_o_Phi=L": cross, "flow": f.to_dict()})


def pullback_one_form(a: OneForm, qc: QuotientChart) -> OneForm:
    """Phi^* a on the full chart."""
    comps = [qc.pull(x) for x in a.coeffs]
    out = None
    for x, phi in zip(comps, qc.forward):
        term = differential(canon(phi), qc.chart).scale(x)
        out = term if out is None else out + term
    return out.canon()


def pullback_two_form(w: TwoForm, qc: QuotientChart) -> TwoForm:
    ch = qc.chart
    d = ch.dim
    jac = [[canon(differentiate(phi, c)) for c in ch.coords] for phi in qc.forward]
    W = [[qc.pull(x) for x in row] for row in w.matrix]
    m = len(W)
    M = [[canon(sx.add(*(W[a][b] * jac[a][i] * jac[b][j]
                         for a in range(m) for b in range(m) if W[a][b] != sx.ZERO)))
          for j in range(d)] for i in range(d)]
    return TwoForm(ch, tuple(tuple(r) for r in M))


def pullback_check(sys: LagrangianSystem, c: Connection, f: Flow, red: ReducedSystem,
                   tol=1e-8, trials=32, seed=0, verbose=False) -> CheckReport:
    """Phi^* theta = Theta^V, Phi^* omega = Omega^V, E_red o Phi = E; mismatch reported."""
    qc = red.quotient
    theta, omega = poincare_cartan_forms(sys)
    _, theta_v = split_one_form(theta, c)
    _, omega_v = split_two_form(omega, c)
    E = energy(sys, c)
    rep = CheckReport.build("pullback", {
        "Phi*theta-Theta_V": pullback_one_form(red.theta, qc) - theta_v,
        "Phi*omega-Omega_V": pullback_two_form(red.omega, qc) - omega_v,
        "E_red o Phi-E": qc.pull(red.energy) - E,
    }, tol, trials, seed)
    rep.info["mismatch"] = str(red.mismatch)
    rep.info["mismatch o Phi"] = str(canon(qc.pull(red.mismatch)))
    if verbose:
        alt = dataclasses.replace(qc, vbar=qc.vbar_alt)
        r = pullback_one_form(red.theta, alt) - theta_v
        rep.info["alternate velocity reading"] = {
            "vbar": [str(x) for x in qc.vbar_alt],
            "Phi*theta-Theta_V": {k: str(v) for k, v in r.nonzero_components().items()},
        }
    return rep


def first_integral_check(red: ReducedSystem, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """X_red(E_red) = 0."""
    return CheckReport.build("first-integral", {"X(E)": lie_derivative_fn(red.field, red.energy)},
                             tol, trials, seed)


def reduced_field_check(red: ReducedSystem, tol=1e-8, trials=32, seed=0) -> CheckReport:
    """i(X) omega - dE = 0."""
    return CheckReport.build("reduced-dynamics", {
        "i(X)omega-dE": interior_product(red.field, red.omega) - differential(red.energy, red.chart),
    }, tol, trials, seed)
