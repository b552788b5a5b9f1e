"""Exact linear algebra over rational and symbolic scalars.

The invariance lab decides equalities like ``beta^(1,S) == beta^(2,S)``
exactly, so its linear systems are solved over ``fractions.Fraction`` (or
sympy expressions when instances carry irrational entries) instead of
float64.  Matrices are plain nested lists; numpy is only used on the float
side of the package.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


class SingularMatrixError(ValueError):
    """A submatrix that must be invertible is exactly singular."""

    def __init__(self, message, environment=None):
        super().__init__(message)
        self.environment = environment


def is_zero(x) -> bool:
    """Exact zero test that also understands sympy expressions.

    A symbolic value whose 15-digit numeric evaluation is clearly away from
    zero cannot be zero, so only near-zero candidates pay for the exact
    simplification; the zero verdict itself is always symbolic.
    """
    if isinstance(x, (int, Fraction)):
        return x == 0
    simplify = getattr(x, "simplify", None)
    if simplify is not None:
        try:
            approx = abs(complex(x.evalf(15)))
        except (TypeError, ValueError):
            approx = 0.0
        if approx > 1e-9:
            return False
        return bool(simplify() == 0)
    return x == 0


def exact_solve(matrix: Sequence[Sequence], rhs: Sequence) -> list:
    """Solve ``matrix @ x = rhs`` exactly by Gaussian elimination.

    Entries may be ints, Fractions, or sympy expressions; the result uses
    whatever scalar type closure the inputs generate.  Raises
    `SingularMatrixError` when no nonzero pivot exists.
    """
    m = len(matrix)
    if m == 0:
        return []
    a = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(m):
        pivot_row = next((r for r in range(col, m) if not is_zero(a[r][col])), None)
        if pivot_row is None:
            raise SingularMatrixError("exactly singular matrix")
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
        pivot = a[col][col]
        for r in range(col + 1, m):
            if is_zero(a[r][col]):
                continue
            factor = a[r][col] / pivot
            for c in range(col, m + 1):
                a[r][c] = a[r][c] - factor * a[col][c]
    x = [None] * m
    for r in range(m - 1, -1, -1):
        acc = a[r][m]
        for c in range(r + 1, m):
            acc = acc - a[r][c] * x[c]
        x[r] = acc / a[r][r]
    return x


def int_bareiss_solve(matrix: list[list[int]], rhs: list[int]) -> list[Fraction]:
    """Solve an integer system exactly, keeping the O(m^3) bulk in int ops.

    Fraction-free (Bareiss) forward elimination with arbitrary-precision
    ints; only the O(m^2) back substitution touches Fractions.  This is the
    kernel behind full-scan separation diagnostics, where millions of small
    exact solves would drown in Fraction overhead.
    """
    m = len(matrix)
    if m == 0:
        return []
    a = [list(matrix[i]) + [rhs[i]] for i in range(m)]
    prev = 1
    for col in range(m):
        if a[col][col] == 0:
            pivot_row = next((r for r in range(col + 1, m) if a[r][col] != 0), None)
            if pivot_row is None:
                raise SingularMatrixError("exactly singular matrix")
            a[col], a[pivot_row] = a[pivot_row], a[col]
        pivot = a[col][col]
        for r in range(col + 1, m):
            arc = a[r][col]
            row_r = a[r]
            row_c = a[col]
            for c in range(col + 1, m + 1):
                row_r[c] = (pivot * row_r[c] - arc * row_c[c]) // prev
            row_r[col] = 0
        prev = pivot
    x = [Fraction(0)] * m
    for r in range(m - 1, -1, -1):
        acc = Fraction(a[r][m])
        for c in range(r + 1, m):
            acc -= a[r][c] * x[c]
        x[r] = acc / a[r][r]
    return x


def exact_quadratic_form(matrix: list[list[int]], rhs: list[int]) -> Fraction:
    """Return ``rhs' @ matrix^-1 @ rhs`` exactly for an integer system."""
    x = int_bareiss_solve(matrix, rhs)
    return sum((Fraction(b) * xi for b, xi in zip(rhs, x)), Fraction(0))


def submatrix(matrix, idx):
    return [[matrix[i][j] for j in idx] for i in idx]


def subvector(vec, idx):
    return [vec[i] for i in idx]
