"""Bounded-variable least squares by an active-set method.

Minimises ``||A x - b||^2`` subject to ``lower <= x <= upper`` where bounds may
be infinite.  The free subproblem is re-solved from scratch at every step
(minimum-norm least squares, so rank-deficient ``A`` is fine); problems here
have at most a dozen columns, so robustness matters more than speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SolverFailure

FREE, AT_LOWER, AT_UPPER = "free", "at-lower", "at-upper"


@dataclass(frozen=True)
class BvlsSolution:
    x: np.ndarray
    residual_norm_sq: float
    active_set: tuple
    iterations: int


def kkt_tolerance(A, b) -> float:
    return 1e-10 * (1.0 + float(np.max(np.abs(A.T @ b), initial=0.0)))


def bvls(A, b, lower, upper, max_iter: int | None = None, tol: float | None = None,
         x0=None, active0=None) -> BvlsSolution:
    """Solve the box-constrained linear least-squares problem.

    Parameters
    ----------
    A : (n, p) array
    b : (n,) array
    lower, upper : (p,) arrays, entries may be -inf / +inf
    max_iter : cap on outer (variable-release) iterations, default ``10 * p``
    tol : Kuhn-Tucker tolerance on the gradient, default ``1e-10 (1 + |A^T b|_inf)``
    x0, active0 : optional warm start (a point, clipped into the box, and the
        statuses of a previous solution of a nearby problem)

    Raises
    ------
    SolverFailure
        if the iteration cap is reached before the Kuhn-Tucker conditions hold.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise InvalidArgument(f"incompatible shapes A{A.shape}, b{b.shape}")
    p = A.shape[1]
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (p,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (p,))
    if np.any(lower > upper) or np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        raise InvalidArgument("bounds must satisfy lower <= upper")
    if max_iter is None:
        max_iter = 10 * max(p, 1)
    if tol is None:
        tol = kkt_tolerance(A, b)

    fixed = lower == upper
    # -1 at lower, +1 at upper, 0 free
    state = np.zeros(p, dtype=int)
    if x0 is None:
        x = np.clip(np.zeros(p), lower, upper)
    else:
        x = np.clip(np.asarray(x0, dtype=float), lower, upper)
        if active0 is not None:
            for j, s in enumerate(active0):
                if s == AT_LOWER and np.isfinite(lower[j]):
                    x[j], state[j] = lower[j], -1
                elif s == AT_UPPER and np.isfinite(upper[j]):
                    x[j], state[j] = upper[j], 1
    state[fixed] = -1

    def solve_free():
        nonlocal x
        for _ in range(p + 1):
            free = np.flatnonzero(state == 0)
            if free.size == 0:
                return
            r = b - A @ x
            d = np.linalg.lstsq(A[:, free], r, rcond=None)[0]
            xf = x[free]
            target = xf + d
            lo, hi = lower[free], upper[free]
            low_hit = (d < 0) & (target < lo)
            up_hit = (d > 0) & (target > hi)
            if not (low_hit.any() or up_hit.any()):
                x[free] = target
                return
            alpha = np.full(free.size, np.inf)
            alpha[low_hit] = (lo[low_hit] - xf[low_hit]) / d[low_hit]
            alpha[up_hit] = (hi[up_hit] - xf[up_hit]) / d[up_hit]
            a = float(np.clip(np.min(alpha), 0.0, 1.0))
            x[free] = np.clip(xf + a * d, lo, hi)
            # every variable whose step length equals the minimum lands on its bound
            hit = alpha <= a + 1e-14 * (1.0 + a)
            for k in np.flatnonzero(hit & low_hit):
                x[free[k]] = lo[k]
                state[free[k]] = -1
            for k in np.flatnonzero(hit & up_hit):
                x[free[k]] = hi[k]
                state[free[k]] = 1
        raise SolverFailure("bvls: free-subproblem loop did not settle",
                            {"x": x.copy(), "state": state.copy()})

    iterations = 0
    blocked: set = set()
    while True:
        solve_free()
        w = A.T @ (b - A @ x)
        release = ((state == -1) & (w > tol)) | ((state == 1) & (w < -tol))
        release &= ~fixed
        for j in blocked:
            release[j] = False
        if not release.any():
            break
        iterations += 1
        if iterations > max_iter:
            raise SolverFailure(
                f"bvls: no convergence after {max_iter} iterations",
                {"x": x.copy(), "gradient": -w, "state": state.copy(), "tol": tol})
        j = int(np.argmax(np.where(release, np.abs(w), -1.0)))
        before = x.copy()
        state[j] = 0
        solve_free()
        if state[j] != 0 and x[j] == before[j] and np.array_equal(x, before):
            # released variable bounced straight back: numerically optimal in that direction
            blocked.add(j)
        else:
            blocked.clear()

    g = A.T @ (A @ x - b)
    status = []
    for j in range(p):
        if fixed[j]:
            status.append(AT_LOWER if g[j] >= 0 else AT_UPPER)
        else:
            status.append(FREE if state[j] == 0 else (AT_LOWER if state[j] < 0 else AT_UPPER))
    res = A @ x - b
    return BvlsSolution(x, float(res @ res), tuple(status), iterations)
