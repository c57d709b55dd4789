"""Linear programs in equality form: a dense two-phase simplex with Bland's
rule for small instances and a HiGHS route for grid-scale ones."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import Infeasible, NoConvergence

PIVOT_CAP = 1_000_000
DENSE_MAX_VARIABLES = 600


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    value: float
    pivots: int
    method: str


def _pivot(tab, basis, row, col):
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _bland_phase(tab, basis, n_cols, tol, pivots):
    """Minimise the objective held in the last tableau row."""
    m = tab.shape[0] - 1
    while True:
        reduced = tab[-1, :n_cols]
        cand = np.nonzero(reduced < -tol)[0]
        if cand.size == 0:
            return pivots
        col = int(cand[0])
        column = tab[:m, col]
        pos = np.nonzero(column > tol)[0]
        if pos.size == 0:
            raise Infeasible("linear program is unbounded")
        ratios = tab[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(tab, basis, row, col)
        pivots += 1
        if pivots > PIVOT_CAP:
            raise NoConvergence(f"simplex exceeded {PIVOT_CAP} pivots")


def dense_simplex(c, A_eq, b_eq, tol: float = 1e-10) -> LpResult:
    """``min c'x`` s.t. ``A_eq x = b_eq``, ``x >= 0`` (two-phase, Bland's rule)."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    # phase 1 tableau: [A | I | b], objective row = sum of artificials
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    pivots = _bland_phase(tab, basis, n + m, tol, 0)
    if -tab[-1, -1] > 1e-9 * max(1.0, b.sum()):
        raise Infeasible(f"equality constraints are infeasible (phase-1 residual {-tab[-1, -1]:.3g})")
    # drive artificials out; rows where that is impossible are redundant
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cols = np.nonzero(np.abs(tab[r, :n]) > tol)[0]
            if cols.size:
                _pivot(tab, basis, r, int(cols[0]))
                pivots += 1
                keep.append(r)
        else:
            keep.append(r)
    rows = np.array(keep, dtype=int)
    tab2 = np.zeros((rows.size + 1, n + 1))
    tab2[:-1, :n] = tab[rows, :n]
    tab2[:-1, -1] = tab[rows, -1]
    basis = basis[rows]
    tab2[-1, :n] = c
    for r, j in enumerate(basis):
        tab2[-1] -= c[j] * tab2[r]
    pivots = _bland_phase(tab2, basis, n, tol, pivots)
    x = np.zeros(n)
    x[basis] = tab2[:-1, -1]
    x = np.clip(x, 0.0, None)
    return LpResult(x, float(c @ x), pivots, "dense-bland")


def highs_solve(c, A_eq, b_eq) -> LpResult:
    A_eq = sparse.csr_matrix(A_eq)
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if res.status == 2:
        # presolve can misjudge rows whose right side sits below its tolerances
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds",
                      options={"presolve": False})
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status != 0:
        raise NoConvergence(res.message)
    x = np.clip(res.x, 0.0, None)
    return LpResult(x, float(c @ x), int(getattr(res, "nit", 0)), "highs-ds")


def solve_lp(c, A_eq, b_eq, method: str = "auto") -> LpResult:
    if method == "auto":
        method = "dense" if len(c) <= DENSE_MAX_VARIABLES else "highs"
    if method == "dense":
        A = A_eq.toarray() if sparse.issparse(A_eq) else A_eq
        return dense_simplex(c, A, b_eq)
    if method == "highs":
        return highs_solve(c, A_eq, b_eq)
    raise ValueError(f"unknown LP method {method!r}")
