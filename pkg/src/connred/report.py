"""Check reports and their JSON / text serializations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import symexpr as sx
from .geometry import OneForm, TwoForm, VectorField


def flatten(label: str, obj) -> dict:
    """Split a field/form/expression into labelled scalar components."""
    if isinstance(obj, VectorField):
        return {f"{label}[{c}]": e for c, e in zip(obj.chart.coords, obj.coeffs)}
    if isinstance(obj, OneForm):
        return {f"{label}[d{c}]": e for c, e in zip(obj.chart.coords, obj.coeffs)}
    if isinstance(obj, TwoForm):
        cf = obj.chart.coframe()
        return {f"{label}[{cf[i]}^{cf[j]}]": e for (i, j), e in obj.upper().items()}
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            out.update(flatten(f"{label}[{k}]", v))
        return out
    return {label: sx._as_expr(obj)}


@dataclass
class CheckReport:
    """Named identity checks: every residual is expected to vanish."""

    name: str
    residuals: dict = field(default_factory=dict)
    tests: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, residuals: dict, tol=1e-8, trials=32, seed=0, info=None):
        comps = {}
        for label, obj in residuals.items():
            comps.update(flatten(label, obj))
        comps = {k: sx.canon(v) for k, v in comps.items()}
        tests = {k: sx.is_zero(v, tol, trials, seed) for k, v in comps.items()}
        return cls(name, comps, tests, dict(info or {}))

    @property
    def passed(self) -> bool:
        return all(bool(t) for t in self.tests.values())

    def __bool__(self):
        return self.passed

    def failures(self) -> dict:
        return {k: str(self.residuals[k]) for k, t in self.tests.items() if not t}

    def merge(self, other: "CheckReport", prefix=None) -> "CheckReport":
        p = f"{prefix or other.name}."
        self.residuals.update({p + k: v for k, v in other.residuals.items()})
        self.tests.update({p + k: v for k, v in other.tests.items()})
        return self

    def to_dict(self) -> dict:
        checks = {}
        for k, t in self.tests.items():
            entry = {"zero": bool(t), "path": t.path}
            if t.path == "probe":
                entry["seed"] = t.seed
                entry["max_abs"] = t.max_abs
            if self.residuals[k] != sx.ZERO:
                entry["residual"] = str(self.residuals[k])
            checks[k] = entry
        return {"name": self.name, "passed": self.passed, "checks": checks,
                "info": _jsonable(self.info)}

    def summary_lines(self) -> list:
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"]
        for k, t in self.tests.items():
            if not t:
                lines.append(f"    {k}: residual {self.residuals[k]}")
        return lines


def _jsonable(x):
    if isinstance(x, sx.Expr):
        return str(x)
    if isinstance(x, (VectorField, OneForm, TwoForm)):
        return x.to_dict()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "to_dict"):
        return x.to_dict()
    if isinstance(x, float) or isinstance(x, (int, str, bool)) or x is None:
        return x
    return str(x)


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False)


def to_text(obj, indent=0) -> str:
    """Readable indented rendering of a (nested) report dictionary."""
    pad = "  " * indent
    obj = _jsonable(obj)
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(to_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
        return "\n".join(lines)
    if isinstance(obj, list):
        return "\n".join(f"{pad}- {to_text(v, 0) if not isinstance(v, (dict, list)) else chr(10) + to_text(v, indent + 1)}"
                         for v in obj)
    return f"{pad}{obj}"
