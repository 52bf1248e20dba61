"""Exact symbolic expressions over rational constants.

Expressions are immutable trees. The canonical form is an expanded rational
function in "atoms": variables, elementary functions of canonical arguments,
uninterpreted unary symbols (and their formal derivatives), and rational
roots of canonical bases. Coefficients are ``fractions.Fraction``.

Typical use::

    >>> L = parse("1/2*v^2 - V(q)", symbols={"V"})
    >>> print(canon(differentiate(L, "q")))
    -V'(q)
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EvaluationDomainError,
    ParseError,
    UnboundVariable,
    UnknownVariable,
)

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Pow", "Div", "Func", "Sym",
    "const", "var", "sym", "add", "mul", "power", "div", "neg",
    "sin", "cos", "exp", "log", "sqrt",
    "differentiate", "canon", "is_zero", "ZeroTest", "substitute",
    "evaluate", "parse", "to_str", "Bindings", "SymbolRealization",
    "compile_exprs", "free_vars", "symbols_of", "ZERO", "ONE",
]

FUNCTIONS = ("sin", "cos", "exp", "log")


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite constant {x!r}")
        return Fraction(x)
    raise TypeError(f"cannot make a constant from {type(x).__name__}")


def _as_expr(x) -> "Expr":
    if isinstance(x, Expr):
        return x
    return Const(_frac(x))


class Expr:
    """Base class of expression nodes.

    Nodes compare structurally and hash by structure; both are cached.
    Arithmetic operators build (lightly simplified) trees, they never
    canonicalize.
    """

    __slots__ = ("_hash", "_str")

    def _fields(self) -> tuple:
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._fields())
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Expr) else False
        return hash(self) == hash(other) and self._fields() == other._fields()

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __str__(self):
        try:
            return self._str
        except AttributeError:
            s = to_str(self)
            object.__setattr__(self, "_str", s)
            return s

    def __repr__(self):
        return f"{type(self).__name__}({str(self)!r})"

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_expr(other)))

    def __rsub__(self, other):
        return add(_as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __pow__(self, other):
        return power(self, other)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def canon(self) -> "Expr":
        return canon(self)

    def subs(self, mapping) -> "Expr":
        return substitute(self, mapping)

    def free_vars(self) -> frozenset:
        return free_vars(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", _frac(value))

    def _fields(self):
        return (self.value,)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not isinstance(name, str) or not _IDENT.fullmatch(name):
            raise ValueError(f"invalid variable name {name!r}")
        object.__setattr__(self, "name", name)

    def _fields(self):
        return (self.name,)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))

    def _fields(self):
        return self.terms

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))

    def _fields(self):
        return self.factors

    def children(self):
        return self.factors


class Pow(Expr):
    """``base ** exponent`` with a rational exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", _frac(exponent))

    def _fields(self):
        return (self.base, self.exponent)

    def children(self):
        return (self.base,)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def _fields(self):
        return (self.num, self.den)

    def children(self):
        return (self.num, self.den)


class Func(Expr):
    """Elementary function (sin, cos, exp, log) applied to one argument."""

    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown elementary function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)

    def _fields(self):
        return (self.name, self.arg)

    def children(self):
        return (self.arg,)


class Sym(Expr):
    """Uninterpreted unary symbol; ``order`` > 0 marks a formal derivative."""

    __slots__ = ("name", "order", "arg")

    def __init__(self, name: str, arg: Expr, order: int = 0):
        if not _IDENT.fullmatch(name) or name in FUNCTIONS:
            raise ValueError(f"invalid symbol name {name!r}")
        if order < 0:
            raise ValueError("derivative order must be non-negative")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "order", int(order))
        object.__setattr__(self, "arg", arg)

    def _fields(self):
        return (self.name, self.order, self.arg)

    def children(self):
        return (self.arg,)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

ZERO = Const(0)
ONE = Const(1)


# ---------------------------------------------------------------------------
# smart constructors


def const(x) -> Const:
    return Const(x)


def var(name: str) -> Var:
    return Var(name)


def sym(name: str, arg, order: int = 0) -> Sym:
    return Sym(name, _as_expr(arg), order)


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(*terms) -> Expr:
    flat = []
    c = Fraction(0)
    for t in terms:
        t = _as_expr(t)
        if isinstance(t, Add):
            items = t.terms
        else:
            items = (t,)
        for u in items:
            if isinstance(u, Const):
                c += u.value
            else:
                flat.append(u)
    if c != 0:
        flat.append(Const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> Expr:
    flat = []
    c = Fraction(1)
    for f in factors:
        f = _as_expr(f)
        items = f.factors if isinstance(f, Mul) else (f,)
        for u in items:
            if isinstance(u, Const):
                c *= u.value
            else:
                flat.append(u)
    if c == 0:
        return ZERO
    if c != 1:
        flat.insert(0, Const(c))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Mul(flat)


def neg(e) -> Expr:
    return mul(Const(-1), e)


def power(base, exponent) -> Expr:
    base = _as_expr(base)
    if isinstance(exponent, Expr):
        if not isinstance(exponent, Const):
            raise TypeError("exponents must be rational constants")
        exponent = exponent.value
    exponent = _frac(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and exponent.denominator == 1:
        if base.value == 0 and exponent < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return Const(base.value ** int(exponent))
    return Pow(base, exponent)


def div(num, den) -> Expr:
    num, den = _as_expr(num), _as_expr(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise ZeroDivisionError("division by literal zero")
        return mul(Const(1 / den.value), num)
    if _is_const(num, 0):
        return ZERO
    return Div(num, den)


def _func(name):
    def f(arg) -> Expr:
        return Func(name, _as_expr(arg))
    f.__name__ = name
    return f


sin = _func("sin")
cos = _func("cos")
exp = _func("exp")
log = _func("log")


def sqrt(arg) -> Expr:
    return power(_as_expr(arg), Fraction(1, 2))


# ---------------------------------------------------------------------------
# traversal helpers


def free_vars(e: Expr) -> frozenset:
    return _free_vars(e)


@functools.lru_cache(maxsize=65536)
def _free_vars(e):
    if isinstance(e, Var):
        return frozenset((e.name,))
    out = frozenset()
    for c in e.children():
        out |= _free_vars(c)
    return out


def symbols_of(e: Expr) -> frozenset:
    """Set of ``(name, order)`` pairs of uninterpreted symbols in ``e``."""
    return _symbols_of(e)


@functools.lru_cache(maxsize=65536)
def _symbols_of(e):
    out = frozenset()
    if isinstance(e, Sym):
        out = frozenset(((e.name, e.order),))
    for c in e.children():
        out |= _symbols_of(c)
    return out


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, name: str, declared: Iterable[str] | None = None) -> Expr:
    """Partial derivative of ``e`` with respect to the variable ``name``.

    Uninterpreted symbols follow the chain rule and produce formal-derivative
    markers: d/dy V(y) is ``Sym("V", y, order=1)``, printed ``V'(y)``.
    """
    if not isinstance(name, str) or not _IDENT.fullmatch(name):
        raise UnknownVariable(f"not a variable name: {name!r}")
    if declared is not None and name not in set(declared):
        raise UnknownVariable(f"variable {name!r} is not declared")
    return _diff(e, name)


@functools.lru_cache(maxsize=65536)
def _diff(e: Expr, x: str) -> Expr:
    if x not in _free_vars(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(_diff(t, x) for t in e.terms))
    if isinstance(e, Mul):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, x)
            if _is_const(df, 0):
                continue
            parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Pow):
        db = _diff(e.base, x)
        return mul(Const(e.exponent), power(e.base, e.exponent - 1), db)
    if isinstance(e, Div):
        da = _diff(e.num, x)
        db = _diff(e.den, x)
        if _is_const(db, 0):
            return div(da, e.den)
        return div(add(mul(da, e.den), neg(mul(e.num, db))), power(e.den, 2))
    if isinstance(e, Func):
        da = _diff(e.arg, x)
        a = e.arg
        if e.name == "sin":
            outer = cos(a)
        elif e.name == "cos":
            outer = neg(sin(a))
        elif e.name == "exp":
            outer = e
        else:
            return div(da, a)
        return mul(outer, da)
    if isinstance(e, Sym):
        return mul(Sym(e.name, e.arg, e.order + 1), _diff(e.arg, x))
    raise TypeError(f"cannot differentiate {type(e).__name__}")


# ---------------------------------------------------------------------------
# canonical form
#
# A polynomial is a dict {monomial: Fraction}; a monomial is a sorted tuple
# of (atom, exponent) pairs. Exponents may be negative (Laurent monomials).
# exp atoms are merged (exp(a)*exp(b) -> exp(a+b)) so they always carry
# exponent 1. Root atoms are Pow(base, 1/q) with exponent kept in [0, q).
# A rational form is a pair (num, den) with den == {(): 1} whenever the
# denominator divides out.

_RANK = {Var: 0, Sym: 1, Func: 2, Pow: 3}


def _atom_key(a):
    return (_RANK[type(a)], str(a))


def _is_exp(a):
    return isinstance(a, Func) and a.name == "exp"


def _is_root(a):
    return isinstance(a, Pow)


_ONE_P = {(): Fraction(1)}


def _sorted_mono(d):
    return tuple(sorted(((a, k) for a, k in d.items() if k != 0), key=lambda it: _atom_key(it[0])))


def _merge_exp(d):
    exps = [a for a in d if _is_exp(a)]
    if not exps:
        return d
    if len(exps) == 1 and d[exps[0]] == 1:
        return d
    arg = canon(add(*(mul(Const(d[a]), a.arg) for a in exps)))
    for a in exps:
        del d[a]
    if not _is_const(arg, 0):
        d[Func("exp", arg)] = 1
    return d


def _m_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, k in m2:
        d[a] = d.get(a, 0) + k
    d = {a: k for a, k in d.items() if k != 0}
    return _sorted_mono(_merge_exp(d))


def _m_inv(m):
    d = {a: -k for a, k in m}
    return _sorted_mono(_merge_exp(d))


def _p_add(p, q):
    out = dict(p)
    for m, c in q.items():
        s = out.get(m, 0) + c
        if s:
            out[m] = s
        else:
            out.pop(m, None)
    return out


def _p_scale(p, c, m=()):
    if c == 0:
        return {}
    out = {}
    for mm, cc in p.items():
        key = _m_mul(mm, m)
        s = out.get(key, 0) + cc * c
        if s:
            out[key] = s
        else:
            out.pop(key, None)
    return out


def _p_mul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            key = _m_mul(m1, m2)
            s = out.get(key, 0) + c1 * c2
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return out


def _p_is_one(p):
    return len(p) == 1 and p.get(()) == 1


def _lex_cmp(m1, m2):
    d1, d2 = dict(m1), dict(m2)
    for a in sorted(set(d1) | set(d2), key=_atom_key):
        k1, k2 = d1.get(a, 0), d2.get(a, 0)
        if k1 != k2:
            return 1 if k1 > k2 else -1
    return 0


_lex_key = functools.cmp_to_key(_lex_cmp)


def _leading(p):
    return max(p, key=_lex_key)


def _has_exp(p):
    return any(_is_exp(a) for m in p for a, _ in m)


def _exact_div(num, den):
    """Exact quotient num/den in the Laurent ring, or None."""
    if _has_exp(den) or _has_exp(num):
        return None
    shift = {}
    for m in num:
        for a, k in m:
            if k < 0:
                shift[a] = max(shift.get(a, 0), -k)
    shift_m = _sorted_mono(shift)
    r = _p_scale(num, Fraction(1), shift_m) if shift_m else dict(num)
    lt_d = _leading(den)
    lc_d = den[lt_d]
    dd = dict(lt_d)
    q = {}
    budget = 4 * (len(num) + 4) * (len(den) + 4)
    while r:
        budget -= 1
        if budget < 0:
            return None
        lt = _leading(r)
        dl = dict(lt)
        if any(dl.get(a, 0) < k for a, k in dd.items()):
            return None
        qm = _sorted_mono({a: dl.get(a, 0) - dd.get(a, 0) for a in set(dl) | set(dd)})
        qc = r[lt] / lc_d
        q[qm] = q.get(qm, 0) + qc
        r = _p_add(r, _p_scale(den, -qc, qm))
    if shift_m:
        q = _p_scale(q, Fraction(1), _m_inv(shift_m))
    return {m: c for m, c in q.items() if c}


def _bad_roots(p):
    for m in p:
        for a, k in m:
            if _is_root(a):
                q = a.exponent.denominator
                if k < 0 or k >= q or math.gcd(k, q) > 1:
                    return True
    return False


def _fix_roots(p):
    """Rewrite root exponents into [0, q) with coprime exponent; rational result."""
    total = ({}, _ONE_P)
    for m, c in p.items():
        rest = {}
        term = ({(): c}, _ONE_P)
        for a, k in m:
            if _is_root(a):
                q = a.exponent.denominator
                whole, k2 = divmod(k, q)
                if whole:
                    term = _r_mul(term, _r_pow(_to_rational(a.base), whole))
                if k2:
                    g = math.gcd(k2, q)
                    atom = Pow(a.base, Fraction(1, q // g))
                    rest[atom] = rest.get(atom, 0) + k2 // g
            else:
                rest[a] = k
        term = _r_mul(term, ({_sorted_mono(rest): Fraction(1)}, _ONE_P))
        total = _r_add(total, term)
    return total


def _content(den):
    atoms = {a for m in den for a, _ in m if not _is_exp(a)}
    low = {a: min(dict(m).get(a, 0) for m in den) for a in atoms}
    return _sorted_mono(low)


def _normalize(num, den):
    for _ in range(8):
        if not num:
            return ({}, _ONE_P)
        if _bad_roots(num) or _bad_roots(den):
            n1, d1 = _fix_roots(num) if _bad_roots(num) else (num, _ONE_P)
            n2, d2 = _fix_roots(den) if _bad_roots(den) else (den, _ONE_P)
            num, den = _p_mul(n1, d2), _p_mul(d1, n2)
            continue
        if _p_is_one(den):
            return (num, _ONE_P)
        if not den:
            raise ZeroDivisionError("canonical denominator is zero")
        if len(den) == 1:
            (m, c), = den.items()
            num = _p_scale(num, 1 / c, _m_inv(m))
            den = _ONE_P
            continue
        m0 = _content(den)
        if m0:
            inv = _m_inv(m0)
            den = _p_scale(den, Fraction(1), inv)
            num = _p_scale(num, Fraction(1), inv)
        lc = den[_leading(den)]
        if lc != 1:
            den = _p_scale(den, 1 / lc)
            num = _p_scale(num, 1 / lc)
        q = _exact_div(num, den)
        if q is not None:
            num, den = q, _ONE_P
            continue
        if not (_bad_roots(num) or _bad_roots(den)):
            return (num, den)
    return (num, den)


def _r_add(r1, r2):
    n1, d1 = r1
    n2, d2 = r2
    if not n1:
        return r2
    if not n2:
        return r1
    if d1 == d2:
        return (_p_add(n1, n2), d1)
    return (_p_add(_p_mul(n1, d2), _p_mul(n2, d1)), _p_mul(d1, d2))


def _r_mul(r1, r2):
    return (_p_mul(r1[0], r2[0]), _p_mul(r1[1], r2[1]))


def _r_inv(r):
    n, d = r
    if not n:
        raise ZeroDivisionError("division by an expression that canonicalizes to 0")
    return _normalize(d, n)


def _r_pow(r, k: int):
    if k < 0:
        r = _r_inv(r)
        k = -k
    out = ({(): Fraction(1)}, _ONE_P)
    base = r
    while k:
        if k & 1:
            out = _normalize(*_r_mul(out, base))
        k >>= 1
        if k:
            base = _normalize(*_r_mul(base, base))
    return out


def _atom_rational(a):
    return ({((a, 1),): Fraction(1)}, _ONE_P)


@functools.lru_cache(maxsize=65536)
def _to_rational(e: Expr):
    if isinstance(e, Const):
        return ({(): e.value}, _ONE_P) if e.value else ({}, _ONE_P)
    if isinstance(e, Var):
        return _atom_rational(e)
    if isinstance(e, Add):
        r = ({}, _ONE_P)
        for t in e.terms:
            r = _r_add(r, _to_rational(t))
        return _normalize(*r)
    if isinstance(e, Mul):
        r = ({(): Fraction(1)}, _ONE_P)
        for f in e.factors:
            r = _r_mul(r, _to_rational(f))
            if not r[0]:
                return ({}, _ONE_P)
        return _normalize(*r)
    if isinstance(e, Div):
        return _normalize(*_r_mul(_to_rational(e.num), _r_inv(_to_rational(e.den))))
    if isinstance(e, Pow):
        p = e.exponent
        if p.denominator == 1:
            return _r_pow(_to_rational(e.base), int(p))
        base = canon(e.base)
        if isinstance(base, Const):
            root = _rational_root(base.value, p)
            if root is not None:
                return ({(): root}, _ONE_P) if root else ({}, _ONE_P)
        whole, k = divmod(p.numerator, p.denominator)
        atom = Pow(base, Fraction(1, p.denominator))
        r = ({((atom, k),): Fraction(1)}, _ONE_P)
        if whole:
            r = _r_mul(r, _r_pow(_to_rational(base), whole))
        return _normalize(*r)
    if isinstance(e, Func):
        arg = canon(e.arg)
        if isinstance(arg, Const) and arg.value == 0:
            if e.name in ("sin",):
                return ({}, _ONE_P)
            if e.name in ("cos", "exp"):
                return ({(): Fraction(1)}, _ONE_P)
        if e.name == "log" and isinstance(arg, Const) and arg.value == 1:
            return ({}, _ONE_P)
        return _atom_rational(Func(e.name, arg))
    if isinstance(e, Sym):
        return _atom_rational(Sym(e.name, canon(e.arg), e.order))
    raise TypeError(f"cannot canonicalize {type(e).__name__}")


def _rational_root(value: Fraction, p: Fraction):
    if value == 0:
        if p < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return Fraction(0)
    if value < 0:
        return None
    q = p.denominator

    def iroot(n):
        r = round(n ** (1.0 / q))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** q == n:
                return c
        return None

    a, b = iroot(value.numerator), iroot(value.denominator)
    if a is None or b is None:
        return None
    return Fraction(a, b) ** p.numerator


def _mono_expr(m, c):
    factors = []
    for a, k in m:
        if _is_root(a):
            factors.append(Pow(a.base, Fraction(k, a.exponent.denominator)))
        elif k == 1:
            factors.append(a)
        else:
            factors.append(Pow(a, k))
    if c != 1 or not factors:
        factors.insert(0, Const(c))
    return factors[0] if len(factors) == 1 else Mul(factors)


def _degree(m):
    return sum(k for _, k in m)


def _poly_expr(p):
    if not p:
        return ZERO
    order = sorted(p, key=lambda m: (-_degree(m), [(_atom_key(a), -k) for a, k in m]))
    terms = [_mono_expr(m, p[m]) for m in order]
    return terms[0] if len(terms) == 1 else Add(terms)


def _from_rational(r):
    num, den = r
    if _p_is_one(den):
        return _poly_expr(num)
    return Div(_poly_expr(num), _poly_expr(den))


@functools.lru_cache(maxsize=65536)
def canon(e: Expr) -> Expr:
    """Expanded, collected canonical form of ``e`` (idempotent)."""
    e = _as_expr(e)
    return _from_rational(_to_rational(e))


def numerator(e: Expr) -> Expr:
    """Numerator of the canonical rational form; zero iff ``canon(e)`` is zero."""
    return _poly_expr(_to_rational(e)[0])


# ---------------------------------------------------------------------------
# substitution and evaluation


@dataclass(frozen=True)
class SymbolRealization:
    """Numeric realization of a unary symbol ``name(param) = body``.

    Formal derivatives are obtained by differentiating ``body``.
    """

    param: str
    body: Expr

    def derivative(self, order: int) -> Expr:
        return _realization_derivative(self.param, self.body, order)

    @classmethod
    def from_callables(cls, funcs: Sequence[Callable[[float], float]]) -> "CallableRealization":
        return CallableRealization(tuple(funcs))


@dataclass(frozen=True)
class CallableRealization:
    """Realization backed by Python callables, one per derivative order."""

    funcs: tuple

    def call(self, order: int, x: float) -> float:
        if order >= len(self.funcs):
            raise UnboundVariable(f"no callable for derivative order {order}")
        return self.funcs[order](x)


@functools.lru_cache(maxsize=4096)
def _realization_derivative(param, body, order):
    out = body
    for _ in range(order):
        out = _diff(out, param)
    return out


@dataclass
class Bindings:
    """Variable values (numbers or replacement expressions) plus symbol realizations."""

    values: dict = field(default_factory=dict)
    symbols: dict = field(default_factory=dict)

    def with_values(self, values: Mapping) -> "Bindings":
        merged = dict(self.values)
        merged.update(values)
        return Bindings(merged, dict(self.symbols))


def substitute(e: Expr, b) -> Expr:
    """Simultaneous, capture-free substitution.

    ``b`` is a ``Bindings`` or a plain mapping of variable names to numbers or
    expressions. Symbol realizations given as ``SymbolRealization`` replace
    ``V(arg)`` (and its formal derivatives) by the realized body.
    """
    if not isinstance(b, Bindings):
        b = Bindings(dict(b))
    values = {k: _as_expr(v) for k, v in b.values.items()}
    syms = {k: r for k, r in b.symbols.items() if isinstance(r, SymbolRealization)}
    if not values and not syms:
        return e
    memo = {}

    def go(x):
        if x in memo:
            return memo[x]
        if isinstance(x, Var):
            out = values.get(x.name, x)
        elif isinstance(x, Const):
            out = x
        elif isinstance(x, Add):
            out = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            out = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exponent)
        elif isinstance(x, Div):
            out = div(go(x.num), go(x.den))
        elif isinstance(x, Func):
            out = Func(x.name, go(x.arg))
        elif isinstance(x, Sym):
            arg = go(x.arg)
            r = syms.get(x.name)
            if r is None:
                out = Sym(x.name, arg, x.order)
            else:
                body = r.derivative(x.order)
                out = substitute(body, {r.param: arg})
        else:
            raise TypeError(type(x).__name__)
        memo[x] = out
        return out

    return go(e)


def evaluate(e: Expr, b, min_denominator: float = 0.0) -> float:
    """Numeric value of ``e`` under ``b`` (a ``Bindings`` or a mapping)."""
    if not isinstance(b, Bindings):
        b = Bindings(dict(b))
    memo = {}

    def go(x):
        try:
            return memo[x]
        except KeyError:
            pass
        if isinstance(x, Const):
            out = float(x.value)
        elif isinstance(x, Var):
            if x.name not in b.values:
                raise UnboundVariable(f"variable {x.name!r} is unbound")
            v = b.values[x.name]
            out = go(v) if isinstance(v, Expr) else float(v)
        elif isinstance(x, Add):
            out = math.fsum(go(t) for t in x.terms)
        elif isinstance(x, Mul):
            out = 1.0
            for f in x.factors:
                out *= go(f)
        elif isinstance(x, Pow):
            base = go(x.base)
            p = x.exponent
            if p.denominator != 1 and base < 0:
                raise EvaluationDomainError(f"fractional power of negative base {base}")
            if p < 0 and abs(base) <= min_denominator:
                raise EvaluationDomainError("negative power of a near-zero base")
            try:
                out = base ** (p.numerator if p.denominator == 1 else float(p))
            except ZeroDivisionError as exc:
                raise EvaluationDomainError(str(exc)) from None
        elif isinstance(x, Div):
            d = go(x.den)
            if abs(d) <= min_denominator or d == 0:
                raise EvaluationDomainError("division by (near) zero")
            out = go(x.num) / d
        elif isinstance(x, Func):
            a = go(x.arg)
            if x.name == "log":
                if a <= 0:
                    raise EvaluationDomainError(f"log of non-positive value {a}")
                out = math.log(a)
            elif x.name == "exp":
                try:
                    out = math.exp(a)
                except OverflowError as exc:
                    raise EvaluationDomainError(str(exc)) from None
            else:
                out = getattr(math, x.name)(a)
        elif isinstance(x, Sym):
            r = b.symbols.get(x.name)
            if r is None:
                raise UnboundVariable(f"symbol {x.name!r} has no numeric realization")
            a = go(x.arg)
            if isinstance(r, SymbolRealization):
                out = evaluate(r.derivative(x.order), {r.param: a}, min_denominator)
            elif isinstance(r, CallableRealization):
                out = float(r.call(x.order, a))
            else:
                out = float(r[x.order](a))
        else:
            raise TypeError(type(x).__name__)
        memo[x] = out
        return out

    return go(_as_expr(e))


# ---------------------------------------------------------------------------
# zero testing


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of ``is_zero``; truthy iff the expression was judged zero."""

    zero: bool
    path: str  # "symbolic" or "probe"
    seed: int | None = None
    trials: int = 0
    max_abs: float = 0.0
    residual: str = "0"

    def __bool__(self):
        return self.zero


def _random_poly_realization(rng, degree=3):
    z = Var("_z")
    coeffs = rng.uniform(-1.0, 1.0, size=degree + 1)
    body = add(*(mul(Const(Fraction(float(c)).limit_denominator(10**6)), power(z, i))
                 for i, c in enumerate(coeffs)))
    return SymbolRealization("_z", body)


def is_zero(e: Expr, tol: float = 1e-8, trials: int = 32, seed: int = 0,
            max_retries: int | None = None) -> ZeroTest:
    """Decide whether ``e`` is identically zero.

    Canonical zero decides symbolically. Otherwise ``e`` is probed at
    ``trials`` points drawn uniformly from [-2, 2] per variable, with
    uninterpreted symbols realized as seeded random cubics; it is declared
    zero iff every probe is below ``tol`` in absolute value.
    """
    if tol <= 0 or trials < 1:
        raise ValueError("need tol > 0 and trials >= 1")
    e = _as_expr(e)
    num = _to_rational(e)[0]
    if not num:
        return ZeroTest(True, "symbolic", None, 0, 0.0, "0")
    expr = canon(e)
    rng = np.random.default_rng(seed)
    names = sorted(_free_vars(expr))
    sym_names = sorted({n for n, _ in _symbols_of(expr)})
    realizations = {n: _random_poly_realization(rng) for n in sym_names}
    max_retries = 20 * trials if max_retries is None else max_retries
    done = retries = 0
    worst = 0.0
    while done < trials:
        point = dict(zip(names, rng.uniform(-2.0, 2.0, size=len(names))))
        try:
            val = evaluate(e, Bindings(point, realizations), min_denominator=1e-6)
        except (EvaluationDomainError, ZeroDivisionError, OverflowError, ValueError):
            retries += 1
            if retries > max_retries:
                raise EvaluationDomainError(
                    f"could not find {trials} admissible probe points for {expr}")
            continue
        done += 1
        worst = max(worst, abs(val))
        if not math.isfinite(val) or abs(val) >= tol:
            return ZeroTest(False, "probe", seed, done, worst if math.isfinite(val) else math.inf, str(expr))
    return ZeroTest(True, "probe", seed, done, worst, str(expr))


# ---------------------------------------------------------------------------
# compilation to flat Python code


def compile_exprs(exprs: Sequence[Expr], argnames: Sequence[str], bindings: Bindings | None = None):
    """Compile expressions to a function ``f(*args) -> numpy array``.

    Symbols realized by ``SymbolRealization`` are substituted symbolically;
    callable realizations are looked up at run time. Shared subtrees are
    evaluated once (the generated body is a flat sequence of assignments).
    """
    bindings = bindings or Bindings()
    exprs = [substitute(_as_expr(x), bindings) for x in exprs]
    namespace = {"math": math, "_np": np, "_syms": {}}
    for n, r in bindings.symbols.items():
        if isinstance(r, CallableRealization):
            namespace["_syms"][n] = r.funcs
        elif not isinstance(r, SymbolRealization):
            namespace["_syms"][n] = tuple(r)
    argmap = {a: f"_a{i}" for i, a in enumerate(argnames)}
    consts = {k: v for k, v in bindings.values.items() if k not in argmap}
    lines = []
    names = {}

    def emit(x):
        if x in names:
            return names[x]
        if isinstance(x, Const):
            return repr(float(x.value))
        if isinstance(x, Var):
            if x.name in argmap:
                return argmap[x.name]
            if x.name in consts:
                v = consts[x.name]
                return f"({emit(v)})" if isinstance(v, Expr) else repr(float(v))
            raise UnboundVariable(f"variable {x.name!r} is not an argument")
        if isinstance(x, Add):
            src = " + ".join(emit(t) for t in x.terms)
        elif isinstance(x, Mul):
            src = " * ".join(emit(f) for f in x.factors)
        elif isinstance(x, Pow):
            p = x.exponent
            if p.denominator == 1:
                src = f"{emit(x.base)} ** {p.numerator}"
            else:
                src = f"math.pow({emit(x.base)}, {float(p)!r})"
        elif isinstance(x, Div):
            src = f"{emit(x.num)} / {emit(x.den)}"
        elif isinstance(x, Func):
            src = f"math.{x.name}({emit(x.arg)})"
        elif isinstance(x, Sym):
            if x.name not in namespace["_syms"]:
                raise UnboundVariable(f"symbol {x.name!r} has no numeric realization")
            src = f"_syms[{x.name!r}][{x.order}]({emit(x.arg)})"
        else:
            raise TypeError(type(x).__name__)
        tmp = f"_t{len(names)}"
        lines.append(f"    {tmp} = {src}")
        names[x] = tmp
        return tmp

    outs = [emit(x) for x in exprs]
    args = ", ".join(argmap[a] for a in argnames)
    src = f"def _compiled({args}):\n" + "\n".join(lines) + \
        f"\n    return _np.array([{', '.join(outs)}], dtype=float)\n"
    exec(compile(src, "<connred-compiled>", "exec"), namespace)
    fn = namespace["_compiled"]
    fn.source = src
    return fn


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _const_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _prec(e):
    if isinstance(e, Const):
        if e.value < 0:
            return _PREC_NEG
        return _PREC_ATOM if e.value.denominator == 1 else _PREC_MUL
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, Mul):
        if isinstance(e.factors[0], Const) and e.factors[0].value < 0:
            return _PREC_NEG
        return _PREC_MUL
    if isinstance(e, Div):
        return _PREC_MUL
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e, min_prec):
    s = to_str(e)
    return f"({s})" if _prec(e) < min_prec else s


def _is_negative(e):
    if isinstance(e, Const):
        return e.value < 0
    if isinstance(e, Mul):
        return isinstance(e.factors[0], Const) and e.factors[0].value < 0
    return False


def to_str(e: Expr) -> str:
    """Render ``e`` in the infix grammar accepted by ``parse``."""
    if isinstance(e, Const):
        return _const_str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            if i and _is_negative(t):
                parts.append(" - " + _wrap(neg(t), _PREC_MUL + 1 if isinstance(neg(t), Add) else _PREC_MUL))
            elif i:
                parts.append(" + " + _wrap(t, _PREC_MUL))
            else:
                parts.append(_wrap(t, _PREC_ADD + 1) if isinstance(t, Add) else to_str(t))
        return "".join(parts)
    if isinstance(e, Mul):
        fs = list(e.factors)
        prefix = ""
        if isinstance(fs[0], Const) and fs[0].value == -1 and len(fs) > 1:
            prefix = "-"
            fs = fs[1:]
        out = []
        for i, f in enumerate(fs):
            if i == 0 and isinstance(f, Const):
                out.append(_const_str(f.value))
            elif isinstance(f, (Div, Mul)) or (isinstance(f, Const) and f.value.denominator != 1):
                out.append(f"({to_str(f)})")
            else:
                out.append(_wrap(f, _PREC_POW))
        body = "*".join(out)
        return prefix + body
    if isinstance(e, Pow):
        p = e.exponent
        ps = str(p.numerator) if p.denominator == 1 and p > 0 else f"({_const_str(p)})"
        return f"{_wrap(e.base, _PREC_ATOM)}^{ps}"
    if isinstance(e, Div):
        return f"{_wrap(e.num, _PREC_MUL)}/{_wrap(e.den, _PREC_ATOM)}"
    if isinstance(e, Func):
        return f"{e.name}({to_str(e.arg)})"
    if isinstance(e, Sym):
        return f"{e.name}{chr(39) * e.order}({to_str(e.arg)})"
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# parsing
#
#   expr    := term (("+" | "-") term)*
#   term    := unary (("*" | "/") unary)*
#   unary   := ("+" | "-") unary | power
#   power   := primary (("^" | "**") unary)?
#   primary := number | ident "'"* "(" expr ")" | ident | "(" expr ")"

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),'])|(?P<bad>\S))"
)


def _tokenize(text):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.lastgroup is None:
            break
        kind = m.lastgroup
        start = m.start(kind)
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group(kind)!r}", start, text)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, symbols, variables):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ParseError(f"expected {value!r}, found {t[1] or 'end of input'!r}", t[2], self.text)
        return t

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            right = self.term()
            left = add(left, right) if op == "+" else add(left, neg(right))
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()
            right = self.unary()
            if op[1] == "*":
                left = mul(left, right)
            else:
                try:
                    left = div(left, right)
                except ZeroDivisionError:
                    raise ParseError("division by literal zero", op[2], self.text) from None
        return left

    def unary(self):
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = self.unary()
            return neg(e) if op == "-" else e
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] in ("^", "**"):
            op = self.take()
            ex = canon(self.unary())
            if not isinstance(ex, Const):
                raise ParseError("exponent must be a rational constant", op[2], self.text)
            try:
                return power(base, ex.value)
            except ZeroDivisionError:
                raise ParseError("zero raised to a negative power", op[2], self.text) from None
        return base

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "id":
            order = 0
            while self.peek()[1] == "'":
                self.take()
                order += 1
            if self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                if val in FUNCTIONS and not order:
                    return Func(val, arg)
                if val == "sqrt" and not order:
                    return sqrt(arg)
                if val in self.symbols:
                    return Sym(val, arg, order)
                raise ParseError(f"undeclared function symbol {val!r}", pos, self.text)
            if order:
                raise ParseError("derivative marker without an argument", pos, self.text)
            if val in FUNCTIONS or val == "sqrt":
                raise ParseError(f"function {val!r} needs an argument", pos, self.text)
            if self.variables is not None and val not in self.variables:
                raise ParseError(f"unknown variable {val!r}", pos, self.text)
            return Var(val)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos, self.text)


def parse(text: str, symbols: Iterable[str] = (), variables: Iterable[str] | None = None) -> Expr:
    """Parse infix text; uninterpreted symbols must be listed in ``symbols``.

    If ``variables`` is given, any other identifier is a ``ParseError``.
    """
    if not isinstance(text, str):
        raise TypeError("parse expects a string")
    p = _Parser(text, frozenset(symbols), None if variables is None else frozenset(variables))
    e = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", pos, text)
    return e
