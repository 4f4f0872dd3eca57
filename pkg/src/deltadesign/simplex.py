"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems are given as ``min c.x  s.t.  A x = b,  lower <= x <= upper`` with
possibly infinite bounds and converted to standard form internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument, SolverFailure

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class LpProblem:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        p = c.size
        A = np.asarray(self.eq_matrix, dtype=float).reshape(-1, p)
        b = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        lo = np.broadcast_to(np.asarray(self.var_lower, dtype=float), (p,)).copy()
        hi = np.broadcast_to(np.asarray(self.var_upper, dtype=float), (p,)).copy()
        if b.size != A.shape[0]:
            raise InvalidArgument("eq_rhs length does not match eq_matrix rows")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("objective coefficients must be finite")
        if np.any(lo > hi):
            raise InvalidArgument("variable bounds must satisfy lower <= upper")
        for name, val in (("objective", c), ("eq_matrix", A), ("eq_rhs", b),
                          ("var_lower", lo), ("var_upper", hi)):
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0


def _pivot(T, row, col):
    T[row] /= T[row, col]
    others = np.flatnonzero(T[:, col])
    others = others[others != row]
    T[others] -= np.outer(T[others, col], T[row])


def _run(T, basis, ncols, tol, max_iter, counter):
    """Bland-rule simplex on tableau ``T`` whose last row is the reduced-cost row.

    Only the first ``ncols`` columns may enter.  Returns False if unbounded.
    """
    m = T.shape[0] - 1
    while True:
        cost = T[-1, :ncols]
        entering = np.flatnonzero(cost < -tol)
        if entering.size == 0:
            return True
        col = int(entering[0])
        column = T[:m, col]
        pos = column > tol
        if not pos.any():
            return False
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * (1.0 + abs(best)))
        row = int(ties[np.argmin([basis[t] for t in ties])])
        _pivot(T, row, col)
        basis[row] = col
        counter[0] += 1
        if counter[0] > max_iter:
            raise SolverFailure("simplex iteration cap reached", {"iterations": counter[0]})


def solve_standard(c, A, b, tol: float = 1e-9, max_iter: int = 100_000):
    """``min c.y  s.t.  A y = b, y >= 0`` by the two-phase tableau method."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    m, p = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase 1 tableau: [A | I | b], cost row = -sum of rows for the artificials
    T = np.zeros((m + 1, p + m + 1))
    T[:m, :p] = A
    T[:m, p:p + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :p] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(p, p + m))
    counter = [0]
    _run(T, basis, p + m, tol, max_iter, counter)
    scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
    if -T[-1, -1] > tol * scale:
        return LpSolution(INFEASIBLE, iterations=counter[0])
    # drive artificial variables out of the basis, dropping redundant rows
    keep = []
    for row in range(m):
        if basis[row] >= p:
            nz = np.flatnonzero(np.abs(T[row, :p]) > tol)
            if nz.size:
                _pivot(T, row, int(nz[0]))
                basis[row] = int(nz[0])
                keep.append(row)
        else:
            keep.append(row)
    T2 = np.zeros((len(keep) + 1, p + 1))
    T2[:-1, :p] = T[keep, :p]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]
    T2[-1, :p] = c
    for row, var in enumerate(basis):
        if T2[-1, var] != 0.0:
            T2[-1] -= T2[-1, var] * T2[row]
    if not _run(T2, basis, p, tol, max_iter, counter):
        return LpSolution(UNBOUNDED, iterations=counter[0])
    y = np.zeros(p)
    for row, var in enumerate(basis):
        y[var] = T2[row, -1]
    y = np.maximum(y, 0.0)
    return LpSolution(OPTIMAL, y, float(c @ y), counter[0])


def simplex_solve(lp: LpProblem, tol: float = 1e-9) -> LpSolution:
    """Solve a bounded-variable LP via standard form and two-phase simplex."""
    c, A, b = lp.objective, lp.eq_matrix, lp.eq_rhs
    lo, hi = lp.var_lower, lp.var_upper
    p = c.size
    # x = shift + T y, y >= 0
    cols, shift = [], np.zeros(p)
    extra_rows = []  # (y column, bound value) rows  y + s = width
    for j in range(p):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    Tmap = np.zeros((p, ny))
    for k, (j, s) in enumerate(cols):
        Tmap[j, k] = s
    nslack = len(extra_rows)
    A_std = np.zeros((A.shape[0] + nslack, ny + nslack))
    A_std[:A.shape[0], :ny] = A @ Tmap
    b_std = np.concatenate([b - A @ shift, [w for _, w in extra_rows]])
    for k, (col, _) in enumerate(extra_rows):
        A_std[A.shape[0] + k, col] = 1.0
        A_std[A.shape[0] + k, ny + k] = 1.0
    c_std = np.concatenate([c @ Tmap, np.zeros(nslack)])
    sol = solve_standard(c_std, A_std, b_std, tol=tol)
    if sol.status != OPTIMAL:
        return sol
    x = shift + Tmap @ sol.x[:ny]
    return LpSolution(OPTIMAL, x, float(c @ x), sol.iterations)
