"""Small dense symbolic matrices (lists of lists of ``Expr``)."""

from __future__ import annotations

import logging

from . import symexpr as sx
from .errors import LinearSolveFailure

log = logging.getLogger(__name__)

# Cramer/adjugate up to this size; fraction-free elimination beyond.
CRAMER_MAX = 4


def det(m):
    n = len(m)
    if n == 0:
        return sx.ONE
    if n <= CRAMER_MAX:
        return sx.canon(_det_cofactor(m))
    return _det_bareiss(m)


def _det_cofactor(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    terms = []
    for j in range(n):
        if sx.canon(m[0][j]) == sx.ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        sign = 1 if j % 2 == 0 else -1
        terms.append(sign * m[0][j] * _det_cofactor(minor))
    return sx.add(*terms)


def _det_bareiss(m):
    a = [[sx.canon(x) for x in row] for row in m]
    n = len(a)
    sign = 1
    prev = sx.ONE
    for k in range(n - 1):
        if a[k][k] == sx.ZERO:
            swap = next((i for i in range(k + 1, n) if a[i][k] != sx.ZERO), None)
            if swap is None:
                return sx.ZERO
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = sx.canon((a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev)
        prev = a[k][k]
    return sx.canon(sign * a[n - 1][n - 1])


def solve(a, b, name="system"):
    """Solve ``a x = b`` symbolically; raises ``LinearSolveFailure`` if singular."""
    n = len(a)
    if any(len(row) != n for row in a) or len(b) != n:
        raise LinearSolveFailure(f"{name}: non-square or mismatched system")
    if n <= CRAMER_MAX:
        d = det(a)
        if d == sx.ZERO:
            raise LinearSolveFailure(f"{name}: determinant is identically zero")
        out = []
        for j in range(n):
            aj = [row[:j] + [b[i]] + row[j + 1:] for i, row in enumerate(a)]
            out.append(sx.canon(sx.div(det(aj), d)))
        return out
    log.info("%s: %dx%d solve switches from Cramer to symbolic elimination", name, n, n)
    return _solve_elimination(a, b, name)


def _solve_elimination(a, b, name):
    n = len(a)
    aug = [[sx.canon(x) for x in row] + [sx.canon(b[i])] for i, row in enumerate(a)]
    for k in range(n):
        piv = next((i for i in range(k, n) if aug[i][k] != sx.ZERO), None)
        if piv is None:
            raise LinearSolveFailure(f"{name}: matrix is singular (column {k})")
        aug[k], aug[piv] = aug[piv], aug[k]
        p = aug[k][k]
        for i in range(n):
            if i == k or aug[i][k] == sx.ZERO:
                continue
            f = sx.canon(aug[i][k] / p)
            aug[i] = [sx.canon(aug[i][j] - f * aug[k][j]) for j in range(n + 1)]
    return [sx.canon(aug[i][n] / aug[i][i]) for i in range(n)]


def matvec(a, x):
    return [sx.add(*(a[i][j] * x[j] for j in range(len(x)))) for i in range(len(a))]


def transpose(a):
    return [list(col) for col in zip(*a)]
