"""Coordinate realizations of the objects on TQ x R.

Everything lives in one global chart ``(t, q^1..q^n, v^1..v^n)``. Vector
fields and 1-forms are coefficient tuples over that frame/coframe; a 2-form
is an antisymmetric matrix ``A`` standing for ``sum_{i<j} A_ij dxi^i ^ dxi^j``.
Charts without a time coordinate (``t=None``) are used for reduced systems.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

from . import linalg
from . import symexpr as sx
from .errors import ChartMismatch
from .symexpr import Expr, ZeroTest, canon, differentiate


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names: ``t`` (optional), positions, velocities."""

    q: tuple
    v: tuple = None
    t: str | None = "t"

    def __post_init__(self):
        q = tuple(self.q)
        if not q:
            raise ValueError("a chart needs at least one position coordinate")
        v = self.v
        if v is None:
            v = ("v",) if q == ("q",) else tuple("v" + name for name in q)
        v = tuple(v)
        if len(v) != len(q):
            raise ValueError("need one velocity name per position name")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        names = self.coords
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be distinct: {names}")
        for name in names:
            sx.Var(name)

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def coords(self) -> tuple:
        return ((self.t,) if self.t else ()) + self.q + self.v

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def has_time(self) -> bool:
        return self.t is not None

    @property
    def q_slice(self) -> slice:
        off = 1 if self.t else 0
        return slice(off, off + self.n)

    @property
    def v_slice(self) -> slice:
        off = 1 if self.t else 0
        return slice(off + self.n, off + 2 * self.n)

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def coframe(self) -> tuple:
        return tuple("d" + c for c in self.coords)

    def vars(self) -> tuple:
        return tuple(sx.Var(c) for c in self.coords)

    def to_dict(self) -> dict:
        return {"time": self.t, "positions": list(self.q), "velocities": list(self.v)}

    @classmethod
    def from_dict(cls, d) -> "Chart":
        return cls(tuple(d["positions"]), tuple(d["velocities"]), d.get("time"))


def _check_chart(a, b, what="operands"):
    if a != b:
        raise ChartMismatch(f"{what} live on different charts: {a.coords} vs {b.coords}")


def _canon_all(xs):
    return tuple(canon(x) for x in xs)


def _symbol_names(exprs):
    out = set()
    for e in exprs:
        out |= {n for n, _ in sx.symbols_of(e)}
    return sorted(out)


# ---------------------------------------------------------------------------
# fields and forms


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(sx._as_expr(c) for c in self.coeffs)
        if len(coeffs) != self.chart.dim:
            raise ChartMismatch(f"vector field needs {self.chart.dim} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_components(cls, chart, comps: dict) -> "VectorField":
        return cls(chart, tuple(comps.get(c, sx.ZERO) for c in chart.coords))

    def __getitem__(self, name):
        return self.coeffs[self.chart.index(name)]

    def __add__(self, other):
        _check_chart(self.chart, other.chart)
        return VectorField(self.chart, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        _check_chart(self.chart, other.chart)
        return VectorField(self.chart, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def scale(self, f) -> "VectorField":
        f = sx._as_expr(f)
        return VectorField(self.chart, tuple(f * c for c in self.coeffs))

    def canon(self) -> "VectorField":
        return VectorField(self.chart, _canon_all(self.coeffs))

    def __call__(self, f: Expr) -> Expr:
        return lie_derivative_fn(self, f)

    def nonzero_components(self) -> dict:
        return {c: e for c, e in zip(self.chart.coords, _canon_all(self.coeffs)) if e != sx.ZERO}

    def to_dict(self, role=None) -> dict:
        return {"kind": "vector_field", "role": role, "chart": self.chart.to_dict(),
                "symbols": _symbol_names(self.coeffs),
                "coefficients": {c: str(canon(e)) for c, e in zip(self.chart.coords, self.coeffs)}}

    def __str__(self):
        parts = [f"({e})*d/d{c}" for c, e in self.nonzero_components().items()]
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True)
class OneForm:
    chart: Chart
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(sx._as_expr(c) for c in self.coeffs)
        if len(coeffs) != self.chart.dim:
            raise ChartMismatch(f"1-form needs {self.chart.dim} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_components(cls, chart, comps: dict) -> "OneForm":
        return cls(chart, tuple(comps.get(c, sx.ZERO) for c in chart.coords))

    def __getitem__(self, name):
        return self.coeffs[self.chart.index(name)]

    def __add__(self, other):
        _check_chart(self.chart, other.chart)
        return OneForm(self.chart, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        _check_chart(self.chart, other.chart)
        return OneForm(self.chart, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return OneForm(self.chart, tuple(-a for a in self.coeffs))

    def scale(self, f) -> "OneForm":
        f = sx._as_expr(f)
        return OneForm(self.chart, tuple(f * c for c in self.coeffs))

    def canon(self) -> "OneForm":
        return OneForm(self.chart, _canon_all(self.coeffs))

    def nonzero_components(self) -> dict:
        return {"d" + c: e for c, e in zip(self.chart.coords, _canon_all(self.coeffs)) if e != sx.ZERO}

    def to_dict(self, role=None) -> dict:
        return {"kind": "one_form", "role": role, "chart": self.chart.to_dict(),
                "symbols": _symbol_names(self.coeffs),
                "coefficients": {"d" + c: str(canon(e)) for c, e in zip(self.chart.coords, self.coeffs)}}

    def __str__(self):
        parts = [f"({e})*{c}" for c, e in self.nonzero_components().items()]
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True)
class TwoForm:
    chart: Chart
    matrix: tuple

    def __post_init__(self):
        m = tuple(tuple(sx._as_expr(x) for x in row) for row in self.matrix)
        d = self.chart.dim
        if len(m) != d or any(len(row) != d for row in m):
            raise ChartMismatch(f"2-form needs a {d}x{d} matrix")
        for i in range(d):
            if canon(m[i][i]) != sx.ZERO:
                raise ValueError(f"2-form matrix has nonzero diagonal entry {i}")
            for j in range(i + 1, d):
                if m[j][i] != sx.neg(m[i][j]) and canon(m[i][j] + m[j][i]) != sx.ZERO:
                    raise ValueError(f"2-form matrix is not antisymmetric at ({i}, {j})")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_upper(cls, chart, entries: dict) -> "TwoForm":
        """Build from ``{(i, j): A_ij}`` with ``i < j`` (indices or names)."""
        d = chart.dim
        m = [[sx.ZERO] * d for _ in range(d)]
        for (i, j), e in entries.items():
            i = chart.index(i) if isinstance(i, str) else i
            j = chart.index(j) if isinstance(j, str) else j
            e = sx._as_expr(e)
            m[i][j] = e
            m[j][i] = -e
        return cls(chart, tuple(tuple(r) for r in m))

    def __getitem__(self, ij):
        i, j = ij
        i = self.chart.index(i) if isinstance(i, str) else i
        j = self.chart.index(j) if isinstance(j, str) else j
        return self.matrix[i][j]

    def _zip(self, other, op):
        _check_chart(self.chart, other.chart)
        return TwoForm(self.chart, tuple(tuple(op(a, b) for a, b in zip(r1, r2))
                                         for r1, r2 in zip(self.matrix, other.matrix)))

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return TwoForm(self.chart, tuple(tuple(-a for a in row) for row in self.matrix))

    def canon(self) -> "TwoForm":
        return TwoForm(self.chart, tuple(_canon_all(row) for row in self.matrix))

    def upper(self) -> dict:
        d = self.chart.dim
        return {(i, j): canon(self.matrix[i][j]) for i in range(d) for j in range(i + 1, d)}

    def is_antisymmetric(self) -> bool:
        d = self.chart.dim
        return all(canon(self.matrix[i][j] + self.matrix[j][i]) == sx.ZERO
                   for i in range(d) for j in range(i, d))

    def nonzero_components(self) -> dict:
        cf = self.chart.coframe()
        return {f"{cf[i]}^{cf[j]}": e for (i, j), e in self.upper().items() if e != sx.ZERO}

    def to_dict(self, role=None) -> dict:
        cf = self.chart.coframe()
        flat = [e for row in self.matrix for e in row]
        return {"kind": "two_form", "role": role, "chart": self.chart.to_dict(),
                "symbols": _symbol_names(flat),
                "coefficients": {f"{cf[i]}^{cf[j]}": str(e) for (i, j), e in self.upper().items()}}

    def __str__(self):
        parts = [f"({e})*{k}" for k, e in self.nonzero_components().items()]
        return " + ".join(parts) if parts else "0"


def from_dict(d):
    """Inverse of the ``to_dict`` serializations above."""
    chart = Chart.from_dict(d["chart"])
    syms = d.get("symbols", ())
    coeffs = {k: sx.parse(v, symbols=syms) for k, v in d["coefficients"].items()}
    kind = d["kind"]
    if kind == "vector_field":
        return VectorField.from_components(chart, coeffs)
    if kind == "one_form":
        return OneForm.from_components(chart, {k[1:]: e for k, e in coeffs.items()})
    if kind == "two_form":
        entries = {}
        for k, e in coeffs.items():
            a, b = k.split("^")
            entries[(a[1:], b[1:])] = e
        return TwoForm.from_upper(chart, entries)
    raise ValueError(f"unknown serialized kind {kind!r}")


def zero_vector_field(chart):
    return VectorField(chart, (sx.ZERO,) * chart.dim)


def zero_one_form(chart):
    return OneForm(chart, (sx.ZERO,) * chart.dim)


def dt_form(chart) -> OneForm:
    if not chart.has_time:
        raise ChartMismatch("chart has no time coordinate")
    return OneForm.from_components(chart, {chart.t: sx.ONE})


# ---------------------------------------------------------------------------
# Lagrangian systems and connections


@dataclass(frozen=True)
class LagrangianSystem:
    chart: Chart
    L: Expr
    name: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "L", sx._as_expr(self.L))
        extra = sx.free_vars(self.L) - set(self.chart.coords)
        if extra:
            raise ChartMismatch(f"Lagrangian mentions non-chart variables {sorted(extra)}")

    @functools.cached_property
    def hessian(self):
        return hessian(self)

    def momenta(self):
        return [canon(differentiate(self.L, v)) for v in self.chart.v]


@dataclass(frozen=True)
class Connection:
    """Horizontal direction d/dt + Gamma^mu d/dq^mu on Q x R."""

    chart: Chart
    gamma: tuple

    def __post_init__(self):
        g = tuple(sx._as_expr(x) for x in self.gamma)
        if len(g) != self.chart.n:
            raise ChartMismatch(f"connection needs {self.chart.n} components, got {len(g)}")
        allowed = set(self.chart.q) | ({self.chart.t} if self.chart.t else set())
        for comp in g:
            bad = sx.free_vars(comp) - allowed
            if bad:
                raise ValueError(f"connection components may depend on (t, q) only; found {sorted(bad)}")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def standard(cls, chart) -> "Connection":
        return cls(chart, (sx.ZERO,) * chart.n)

    def is_standard(self) -> bool:
        return all(canon(g) == sx.ZERO for g in self.gamma)


def hessian(sys: LagrangianSystem):
    """Velocity Hessian W_{mu nu} = d^2 L / dv^mu dv^nu."""
    p = [differentiate(sys.L, v) for v in sys.chart.v]
    return [[canon(differentiate(pm, vn)) for vn in sys.chart.v] for pm in p]


@dataclass
class RegularityReport:
    regular: bool
    det: Expr
    path: str
    singular_points: list = field(default_factory=list)
    probes: int = 0

    def __bool__(self):
        return self.regular

    def to_dict(self):
        return {"regular": self.regular, "det": str(self.det), "path": self.path,
                "probes": self.probes, "singular_points": self.singular_points}


def check_regular(sys: LagrangianSystem, probes: int = 32, tol: float = 1e-8, seed: int = 0) -> RegularityReport:
    """Regularity of ``L``: nonzero constant det W, else probed at random points."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    d = linalg.det(sys.hessian)
    if isinstance(d, sx.Const):
        return RegularityReport(d.value != 0, d, "symbolic")
    import numpy as np

    rng = np.random.default_rng(seed)
    names = sorted(sx.free_vars(d))
    syms = sorted({n for n, _ in sx.symbols_of(d)})
    realization = {n: sx._random_poly_realization(rng) for n in syms}
    bad = []
    done = 0
    attempts = 0
    while done < probes and attempts < 20 * probes:
        attempts += 1
        point = dict(zip(names, rng.uniform(-2.0, 2.0, size=len(names))))
        try:
            val = sx.evaluate(d, sx.Bindings(point, realization))
        except Exception:
            continue
        done += 1
        if abs(val) < tol:
            bad.append({k: float(x) for k, x in point.items()})
    return RegularityReport(not bad and done > 0, d, "probe", bad, done)


def suspension(c: Connection) -> VectorField:
    """d/dt + Gamma^mu d/dq^mu, with zero velocity components."""
    ch = c.chart
    comps = {ch.t: sx.ONE}
    comps.update(dict(zip(ch.q, c.gamma)))
    return VectorField.from_components(ch, comps)


def jet_prolongation(c: Connection) -> VectorField:
    """Canonical lift of the suspension to TQ x R."""
    ch = c.chart
    comps = {ch.t: sx.ONE}
    for qn, vn, g in zip(ch.q, ch.v, c.gamma):
        comps[qn] = g
        rate = differentiate(g, ch.t) + sx.add(*(sx.Var(vv) * differentiate(g, qq)
                                                 for qq, vv in zip(ch.q, ch.v)))
        comps[vn] = canon(rate)
    return VectorField.from_components(ch, comps)


def energy(sys: LagrangianSystem, c: Connection) -> Expr:
    """Connection energy dL/dv^mu (v^mu - Gamma^mu) - L."""
    _check_chart(sys.chart, c.chart)
    p = sys.momenta()
    return canon(sx.add(*(pm * (sx.Var(v) - g) for pm, v, g in zip(p, sys.chart.v, c.gamma))) - sys.L)


def poincare_cartan_forms(sys: LagrangianSystem):
    """Return ``(Theta_L, Omega_L)``; Omega_L = -d Theta_L."""
    ch = sys.chart
    p = sys.momenta()
    comps = {ch.t: canon(sys.L - sx.add(*(sx.Var(v) * pm for v, pm in zip(ch.v, p))))}
    comps.update(dict(zip(ch.q, p)))
    theta = OneForm.from_components(ch, comps)
    return theta, (-exterior_derivative(theta)).canon()


def differential(f: Expr, chart: Chart) -> OneForm:
    return OneForm(chart, tuple(canon(differentiate(f, c)) for c in chart.coords))


def lie_derivative_fn(X: VectorField, f: Expr) -> Expr:
    return canon(sx.add(*(x * differentiate(f, c) for c, x in zip(X.chart.coords, X.coeffs))))


def is_symmetry(sys: LagrangianSystem, c: Connection, tol=1e-8, trials=32, seed=0) -> ZeroTest:
    """Whether the jet prolongation of ``c`` annihilates ``L``."""
    _check_chart(sys.chart, c.chart)
    return sx.is_zero(lie_derivative_fn(jet_prolongation(c), sys.L), tol, trials, seed)


def interior_product(X: VectorField, w: TwoForm) -> OneForm:
    _check_chart(X.chart, w.chart)
    d = X.chart.dim
    return OneForm(X.chart, tuple(canon(sx.add(*(X.coeffs[i] * w.matrix[i][j] for i in range(d))))
                                  for j in range(d)))


def interior_product_1(X: VectorField, a: OneForm) -> Expr:
    _check_chart(X.chart, a.chart)
    return canon(sx.add(*(x * y for x, y in zip(X.coeffs, a.coeffs))))


def exterior_derivative(a: OneForm) -> TwoForm:
    ch = a.chart
    d = ch.dim
    grads = [[differentiate(a.coeffs[j], ch.coords[i]) for j in range(d)] for i in range(d)]
    m = [[canon(grads[i][j] - grads[j][i]) if i != j else sx.ZERO for j in range(d)] for i in range(d)]
    return TwoForm(ch, tuple(tuple(r) for r in m))


def wedge_dt(a: OneForm) -> TwoForm:
    """dt ^ a."""
    ch = a.chart
    t = ch.index(ch.t) if ch.has_time else None
    if t is None:
        raise ChartMismatch("chart has no time coordinate")
    entries = {(t, j): a.coeffs[j] for j in range(ch.dim) if j != t}
    return TwoForm.from_upper(ch, entries)


def exterior_derivative_2(w: TwoForm):
    """Components B[i][j][k] of dw (cyclic sum of partials)."""
    ch = w.chart
    d = ch.dim
    A = w.matrix
    cs = ch.coords

    @functools.lru_cache(maxsize=None)
    def dA(i, j, k):
        return differentiate(A[j][k], cs[i])

    B = [[[sx.ZERO] * d for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            for k in range(j + 1, d):
                val = canon(dA(i, j, k) + dA(j, k, i) + dA(k, i, j))
                for (a, b, c), s in (((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1),
                                     ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)):
                    B[a][b][c] = val if s > 0 else canon(-val)
    return B


def closedness_residuals(w: TwoForm) -> dict:
    """Nonzero components of dw over i<j<k (empty iff w is closed)."""
    B = exterior_derivative_2(w)
    d = w.chart.dim
    cf = w.chart.coframe()
    return {f"{cf[i]}^{cf[j]}^{cf[k]}": B[i][j][k]
            for i in range(d) for j in range(i + 1, d) for k in range(j + 1, d)
            if B[i][j][k] != sx.ZERO}


def lie_derivative_one_form(X: VectorField, a: OneForm) -> OneForm:
    """Cartan: L_X a = i(X) da + d(i(X) a)."""
    return (interior_product(X, exterior_derivative(a)) + differential(interior_product_1(X, a), a.chart)).canon()


def lie_derivative_two_form(X: VectorField, w: TwoForm) -> TwoForm:
    """Cartan: L_X w = i(X) dw + d(i(X) w)."""
    _check_chart(X.chart, w.chart)
    d = X.chart.dim
    B = exterior_derivative_2(w)
    ixdw = [[canon(sx.add(*(X.coeffs[i] * B[i][j][k] for i in range(d)))) for k in range(d)] for j in range(d)]
    first = TwoForm(X.chart, tuple(tuple(r) for r in ixdw))
    return (first + exterior_derivative(interior_product(X, w))).canon()


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    _check_chart(X.chart, Y.chart)
    return VectorField(X.chart, tuple(canon(lie_derivative_fn(X, y) - lie_derivative_fn(Y, x))
                                      for x, y in zip(X.coeffs, Y.coeffs)))


def form_is_zero(obj, tol=1e-8, trials=32, seed=0) -> ZeroTest:
    """Componentwise zero test for fields, forms and plain expressions."""
    if isinstance(obj, (VectorField, OneForm)):
        exprs = obj.coeffs
    elif isinstance(obj, TwoForm):
        exprs = [e for row in obj.matrix for e in row]
    elif isinstance(obj, dict):
        exprs = list(obj.values())
    else:
        exprs = [obj]
    worst = None
    for e in exprs:
        r = sx.is_zero(e, tol, trials, seed)
        if not r:
            return r
        if worst is None or r.path == "probe":
            worst = r
    return worst or ZeroTest(True, "symbolic")
