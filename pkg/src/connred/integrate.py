"""Numeric integration of X_L and of the reduced field, with conservation monitors."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import symexpr as sx
from .dynamics import sode
from .errors import IllConditionedHessian, SpanMismatch, StepLimitExceeded
from .geometry import Connection, LagrangianSystem, energy
from .reduction import QuotientChart, ReducedSystem
from .symexpr import Bindings, canon

METHODS = ("rk4", "dopri5")


@dataclass(frozen=True)
class IntegratorConfig:
    """``rk4`` uses the fixed ``step``; ``dopri5`` is adaptive with (atol, rtol)."""

    method: str = "dopri5"
    step: float = 1e-2
    atol: float = 1e-10
    rtol: float = 1e-10
    max_steps: int = 1_000_000
    max_condition: float = 1e12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("step", "atol", "rtol", "max_condition"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def to_dict(self):
        d = {"method": self.method, "max_steps": self.max_steps}
        if self.method == "rk4":
            d["step"] = self.step
        else:
            d.update(atol=self.atol, rtol=self.rtol)
        return d


@dataclass(frozen=True)
class Trajectory:
    """Accepted samples of one run; ``params`` strictly increasing."""

    names: tuple
    params: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    meta: dict = field(default_factory=dict)
    monitor: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape != (len(p), len(self.names)):
            raise ValueError("states must have shape (samples, len(names))")
        if len(p) > 1 and not np.all(np.diff(p) > 0):
            raise ValueError("trajectory parameter must be strictly increasing")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "states", s)

    @property
    def span(self):
        return float(self.params[0]), float(self.params[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def column(self, name) -> np.ndarray:
        return self.states[:, self.names.index(name)]

    def at(self, s):
        """Dense output: cubic Hermite interpolation on accepted steps."""
        spline = CubicHermiteSpline(self.params, self.states, self.derivs, axis=0)
        return spline(s)

    @property
    def drift(self) -> float:
        """max |m - m0| / max(1, |m0|) of the monitored quantity."""
        if self.monitor is None:
            return float("nan")
        m0 = self.monitor[0]
        return float(np.max(np.abs(self.monitor - m0)) / max(1.0, abs(m0)))


def hessian_condition(W) -> float:
    """max(1, s_max) / s_min over the singular values of W.

    Equals the usual condition number when s_max >= 1 and also flags a
    Hessian that shrinks towards zero (for n = 1 the plain ratio is always 1).
    """
    s = np.linalg.svd(W, compute_uv=False)
    return float("inf") if s[-1] == 0 else max(1.0, s[0]) / s[-1]


def _run(rhs, y0, span, cfg: IntegratorConfig):
    t0, t1 = span
    if not t1 > t0:
        raise ValueError("span must satisfy t1 > t0")
    y0 = np.asarray(y0, dtype=float)
    if cfg.method == "rk4":
        n = max(1, math.ceil((t1 - t0) / cfg.step - 1e-12))
        if n > cfg.max_steps:
            raise StepLimitExceeded(f"rk4 needs {n} steps, limit {cfg.max_steps}")
        h = (t1 - t0) / n
        ts = t0 + h * np.arange(n + 1)
        ts[-1] = t1
        ys = np.empty((n + 1, len(y0)))
        ys[0] = y = y0
        for i in range(n):
            t = ts[i]
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            ys[i + 1] = y
        return ts, ys
    # solve_ivp has no step cap of its own; RK45 uses 6 evaluations per step
    budget = {"left": 6 * cfg.max_steps + 10}

    def counted(t, y):
        budget["left"] -= 1
        if budget["left"] < 0:
            raise StepLimitExceeded(f"more than {cfg.max_steps} steps")
        return rhs(t, y)

    sol = solve_ivp(counted, (t0, t1), y0, method="RK45", atol=cfg.atol, rtol=cfg.rtol)
    if not sol.success:
        raise StepLimitExceeded(sol.message)
    return sol.t, sol.y.T


def _finish(names, ts, ys, field_fn, monitor_fn, meta):
    d = np.array([field_fn(y) for y in ys])
    if not np.all(np.isfinite(ys)):
        raise IllConditionedHessian("non-finite state reached")
    mon = np.array([monitor_fn(y)[0] for y in ys]) if monitor_fn else None
    traj = Trajectory(tuple(names), ts, ys, d, meta, mon)
    traj.meta["drift"] = traj.drift
    return traj


def integrate_full(sys: LagrangianSystem, c: Connection, ic, span, cfg: IntegratorConfig | None = None,
                   bindings: Bindings | None = None, seed=None) -> Trajectory:
    """Integral curve of X_L from ``ic`` = (t, q, v); E is monitored."""
    cfg = cfg or IntegratorConfig()
    ch = sys.chart
    X = sode(sys)
    coords = list(ch.coords)
    F = sx.compile_exprs([canon(sx.substitute(e, bindings or {})) for e in X.coeffs], coords, bindings)
    Efn = sx.compile_exprs([energy(sys, c)], coords, bindings)
    n = ch.n
    if all(isinstance(w, sx.Const) for row in sys.hessian for w in row):
        def rhs(_, y):
            return F(*y)
    else:
        W = sx.compile_exprs([w for row in sys.hessian for w in row], coords, bindings)

        def rhs(_, y):
            cond = hessian_condition(W(*y).reshape(n, n))
            if not cond < cfg.max_condition:
                raise IllConditionedHessian(f"Hessian condition {cond:.3g} at {list(y)}")
            return F(*y)

    ts, ys = _run(rhs, ic, span, cfg)
    meta = {"system": sys.name, "kind": "full", "monitor": "E", "seed": seed, **cfg.to_dict()}
    return _finish(coords, ts, ys, lambda y: F(*y), lambda y: Efn(*y), meta)


def integrate_reduced(red: ReducedSystem, ic, span, cfg: IntegratorConfig | None = None,
                      bindings: Bindings | None = None, reverse=False, seed=None, name="reduced") -> Trajectory:
    """Integral curve of X_red from ``ic`` = (qbar, vbar); E_red is monitored.

    With ``reverse`` the field is negated (backward evolution, same parameter direction).
    """
    cfg = cfg or IntegratorConfig()
    coords = list(red.chart.coords)
    sign = -1.0 if reverse else 1.0
    F = sx.compile_exprs([canon(sx.substitute(e, bindings or {})) for e in red.field.coeffs], coords, bindings)
    Efn = sx.compile_exprs([red.energy], coords, bindings)

    def rhs(_, y):
        return sign * F(*y)

    ts, ys = _run(rhs, ic, span, cfg)
    meta = {"system": name, "kind": "reduced", "monitor": "E_red", "seed": seed, **cfg.to_dict()}
    return _finish(coords, ts, ys, lambda y: sign * F(*y), lambda y: Efn(*y), meta)


@dataclass
class ProjectionReport:
    max_deviation: float
    argmax: int
    first_deviation: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tol

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"passed": self.passed, "max_deviation": self.max_deviation, "at_sample": self.argmax,
                "deviation_at_sample_0": self.first_deviation, "tol": self.tol, "samples": self.samples}


def compare_projection(full: Trajectory, chart: QuotientChart, red: Trajectory, tol=1e-6,
                       bindings: Bindings | None = None) -> ProjectionReport:
    """max over full samples of |Phi(full) - red| (reduced run read by dense output)."""
    if not np.allclose(full.span, red.span, rtol=0, atol=1e-12):
        raise SpanMismatch(f"spans differ: {full.span} vs {red.span}")
    Phi = chart.numeric(bindings)
    proj = np.array([Phi(*y) for y in full.states])
    dev = np.max(np.abs(proj - red.at(full.params)), axis=1)
    return ProjectionReport(float(dev.max()), int(dev.argmax()), float(dev[0]), tol, len(dev))


def write_csv(traj: Trajectory, path, extra_meta: dict | None = None) -> Path:
    """``#`` metadata lines, a header (param + coordinates), one row per accepted step."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(traj.meta)
    meta.update(extra_meta or {})
    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(("param",) + tuple(traj.names))
        for p, y in zip(traj.params, traj.states):
            w.writerow([repr(float(p))] + [repr(float(x)) for x in y])
    return path


def read_csv(path) -> tuple:
    """(meta dict, header, array) from a file written by ``write_csv``."""
    meta, rows, header = {}, [], None
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition(": ")
                meta[k] = v
            elif header is None:
                header = line.strip().split(",")
            elif line.strip():
                rows.append([float(x) for x in line.split(",")])
    return meta, header, np.array(rows)


def run_batch(fn, inputs, max_workers=None) -> list:
    """Apply ``fn`` to each input concurrently; results keep input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        return list(ex.map(fn, inputs))
