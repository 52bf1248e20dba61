"""Problem files: one INI document drives every command.

Sections: ``system``, ``coordinates``, ``symbols``, ``lagrangian``,
``connection``, ``flow`` (optional), ``numeric``, ``integrator``. See
``docs/problem_format.md`` for the full description.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import symexpr as sx
from .errors import ConnredError, ParseError, ProblemFileError
from .geometry import Chart, Connection, LagrangianSystem
from .integrate import IntegratorConfig
from .reduction import Flow

_SYMBOL_KEY = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\))?\s*")


@dataclass(frozen=True)
class Problem:
    name: str
    chart: Chart
    L: sx.Expr
    connection: Connection
    flow: Flow | None = None
    symbols: tuple = ()
    bindings: sx.Bindings = field(default_factory=sx.Bindings, compare=False)
    initial: tuple | None = None
    span: tuple | None = None
    tol: float = 1e-8
    probes: int = 32
    seed: int = 0
    drift_tol: float = 1e-8
    projection_tol: float = 1e-6
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    source: str | None = None

    @property
    def system(self) -> LagrangianSystem:
        return LagrangianSystem(self.chart, self.L, self.name)

    @property
    def realized(self) -> bool:
        """Every declared symbol has a numeric realization."""
        return all(s in self.bindings.symbols for s in self.symbols)

    def override(self, **kw) -> "Problem":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _floats(text, what):
    try:
        return tuple(float(x) for x in _names(text))
    except ValueError as exc:
        raise ProblemFileError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _expr(text, where, symbols=(), variables=None):
    try:
        return sx.parse(text, symbols=set(symbols), variables=variables)
    except ParseError as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc


def loads(text: str, source: str | None = None) -> Problem:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<problem>")
    except configparser.Error as exc:
        raise ProblemFileError(str(exc)) from exc
    for sec in ("coordinates", "lagrangian", "connection"):
        if not cp.has_section(sec):
            raise ProblemFileError(f"missing section [{sec}]")
    sysec = cp["system"] if cp.has_section("system") else {}
    co = cp["coordinates"]
    try:
        positions = _names(co.get("positions", ""))
        vel = co.get("velocities")
        chart = Chart(positions, _names(vel) if vel else None, co.get("time", "t").strip())
    except ValueError as exc:
        raise ProblemFileError(f"[coordinates]: {exc}") from exc

    symbols, realizations = [], {}
    if cp.has_section("symbols"):
        for key, body in cp["symbols"].items():
            m = _SYMBOL_KEY.fullmatch(key)
            if not m:
                raise ProblemFileError(f"[symbols]: bad declaration {key!r}; use NAME or NAME(arg)")
            name, param = m.groups()
            if name in chart.coords or name in sx.FUNCTIONS:
                raise ProblemFileError(f"[symbols]: {name!r} clashes with a coordinate or builtin")
            symbols.append(name)
            if body and body.strip():
                param = param or "z"
                realizations[name] = sx.SymbolRealization(
                    param, _expr(body, f"[symbols] {key}", variables={param}))
    symbols = tuple(symbols)

    lag = cp["lagrangian"]
    if "L" not in lag:
        raise ProblemFileError("[lagrangian]: missing key L")
    L = _expr(lag["L"], "[lagrangian] L", symbols, set(chart.coords))

    con = cp["connection"]
    base = set(chart.q) | {chart.t}
    gamma = []
    for q in chart.q:
        if q not in con:
            raise ProblemFileError(f"[connection]: missing component for {q!r}")
        gamma.append(_expr(con[q], f"[connection] {q}", (), base))
    extra = set(con) - set(chart.q)
    if extra:
        raise ProblemFileError(f"[connection]: unknown components {sorted(extra)}")
    try:
        connection = Connection(chart, tuple(gamma))
    except (ValueError, ConnredError) as exc:
        raise ProblemFileError(f"[connection]: {exc}") from exc

    flow = None
    if cp.has_section("flow"):
        fs = cp["flow"]
        s = fs.get("parameter", "s").strip()
        phi = []
        for q in chart.q:
            if q not in fs:
                raise ProblemFileError(f"[flow]: missing component for {q!r}")
            phi.append(_expr(fs[q], f"[flow] {q}", (), base | {s}))
        try:
            flow = Flow(chart, tuple(phi), s, "user-supplied")
        except ConnredError as exc:
            raise ProblemFileError(f"[flow]: {exc}") from exc

    num = cp["numeric"] if cp.has_section("numeric") else {}
    initial = _floats(num["initial"], "[numeric] initial") if "initial" in num else None
    if initial is not None and len(initial) != chart.dim:
        raise ProblemFileError(f"[numeric] initial: need {chart.dim} values {chart.coords}, got {len(initial)}")
    span = _floats(num["span"], "[numeric] span") if "span" in num else None
    if span is not None and (len(span) != 2 or not span[1] > span[0]):
        raise ProblemFileError("[numeric] span: need two increasing values")

    def number(sec, key, default, kind=float):
        if key not in sec:
            return default
        try:
            return kind(sec[key])
        except ValueError as exc:
            raise ProblemFileError(f"{key}: expected a number, got {sec[key]!r}") from exc

    integ = cp["integrator"] if cp.has_section("integrator") else {}
    try:
        cfg = IntegratorConfig(
            method=integ.get("method", "dopri5").strip(),
            step=number(integ, "step", 1e-2),
            atol=number(integ, "atol", 1e-10),
            rtol=number(integ, "rtol", 1e-10),
            max_steps=number(integ, "max_steps", 1_000_000, int),
        )
    except ValueError as exc:
        raise ProblemFileError(f"[integrator]: {exc}") from exc

    return Problem(
        name=sysec.get("name", Path(source).stem if source else "problem"),
        chart=chart, L=L, connection=connection, flow=flow, symbols=symbols,
        bindings=sx.Bindings({}, realizations),
        initial=initial, span=span,
        tol=number(num, "tol", 1e-8), probes=number(num, "probes", 32, int),
        seed=number(sysec, "seed", 0, int),
        drift_tol=number(num, "drift_tol", 1e-8),
        projection_tol=number(num, "projection_tol", 1e-6),
        integrator=cfg, source=source,
    )


def load(path) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    return loads(text, str(path))


def load_ic_grid(path, dim) -> list:
    """Initial conditions, one comma-separated row per line; ``#`` comments allowed."""
    rows, header_seen = [], False
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            row = tuple(float(x) for x in line.split(","))
        except ValueError:
            if not rows and not header_seen:
                header_seen = True
                continue
            raise ProblemFileError(f"{path}:{k}: not a numeric row")
        if len(row) != dim:
            raise ProblemFileError(f"{path}:{k}: need {dim} values, got {len(row)}")
        rows.append(row)
    if not rows:
        raise ProblemFileError(f"{path}: no initial conditions")
    return rows
