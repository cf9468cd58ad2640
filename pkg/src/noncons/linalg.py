"""Small dense linear solves over generic scalars.

The mass-matrix solve runs on plain floats inside the integrator and on
Taylor jets during order reduction, so it cannot be delegated to LAPACK.
For the sizes involved here (a handful of coordinates) pure Python is also
faster than a numpy round trip.
"""

from __future__ import annotations

from typing import Sequence

from .autodiff import ops
from .errors import ConditionNumberExceeded, SingularMassMatrix

PIVOT_TOL = 1e-12
CONDITION_CAP = 1e12


def _mag(x) -> float:
    return abs(float(ops.primal(x)))


def lu_factor(a: Sequence[Sequence], pivot_tol: float = PIVOT_TOL):
    """LU factorization with partial pivoting (Doolittle, row swaps).

    Returns ``(lu, perm)``. Raises :class:`SingularMassMatrix` when a pivot
    falls below ``pivot_tol * ||A||_inf``.
    """
    n = len(a)
    lu = [list(row) for row in a]
    perm = list(range(n))
    norm = max((sum(_mag(x) for x in row) for row in lu), default=0.0)
    threshold = pivot_tol * norm
    for k in range(n):
        p = max(range(k, n), key=lambda i: _mag(lu[i][k]))
        if _mag(lu[p][k]) <= threshold or norm == 0.0:
            raise SingularMassMatrix(
                f"pivot {k} magnitude {_mag(lu[p][k]):.3e} below {threshold:.3e}"
            )
        if p != k:
            lu[k], lu[p] = lu[p], lu[k]
            perm[k], perm[p] = perm[p], perm[k]
        pivot = lu[k][k]
        for i in range(k + 1, n):
            f = lu[i][k] / pivot
            lu[i][k] = f
            for j in range(k + 1, n):
                lu[i][j] = lu[i][j] - f * lu[k][j]
    return lu, perm


def lu_solve(lu, perm, b: Sequence) -> list:
    n = len(lu)
    y = [b[perm[i]] for i in range(n)]
    for i in range(n):
        for j in range(i):
            y[i] = y[i] - lu[i][j] * y[j]
    for i in reversed(range(n)):
        for j in range(i + 1, n):
            y[i] = y[i] - lu[i][j] * y[j]
        y[i] = y[i] / lu[i][i]
    return y


def condition_estimate(a, lu, perm) -> float:
    """Infinity-norm condition number computed from the explicit inverse."""
    n = len(a)
    if n == 1:
        return 1.0
    inv_cols = []
    for j in range(n):
        e = [1.0 if i == j else 0.0 for i in range(n)]
        inv_cols.append(lu_solve(lu, perm, e))
    inv_norm = max(sum(_mag(inv_cols[j][i]) for j in range(n)) for i in range(n))
    a_norm = max(sum(_mag(x) for x in row) for row in a)
    return a_norm * inv_norm


def solve(a, b, check_condition: bool = False, cap: float = CONDITION_CAP) -> list:
    """Solve ``a x = b``; entries may be any scalar type with a float primal."""
    if len(a) == 1:
        pivot = a[0][0]
        if _mag(pivot) == 0.0:
            raise SingularMassMatrix("1x1 mass matrix is zero")
        return [b[0] / pivot]
    lu, perm = lu_factor(a)
    if check_condition:
        cond = condition_estimate(a, lu, perm)
        if cond > cap:
            raise ConditionNumberExceeded(f"condition number {cond:.3e} exceeds {cap:.1e}")
    return lu_solve(lu, perm, b)
