"""The linearised distance criterion and its confidence-box restrictions.

With ``u = theta - theta_nominal`` the linearised squared distance of a design
is ``||G u + d||^2`` where ``G`` stacks ``(grad eta0, -grad eta1)`` rows and
``d`` holds the nominal mean differences.  Restricting ``u`` to the dilated
unit box gives ``delta_r``; internally the columns are scaled by the unit
half-widths so the box is simply ``[-r, r]^p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bvls import BvlsSolution, bvls
from .errors import InvalidArgument
from .linearization import LinearizedPair, PointTable
from .models import DiscriminationProblem, ExactDesign


@dataclass(frozen=True)
class ConfidenceBox:
    r: float
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def dilate(cls, problem: DiscriminationProblem, r: float) -> "ConfidenceBox":
        r = check_radius(r)
        theta, h = problem.theta, problem.halfwidth
        if math.isinf(r):
            return cls(r, np.full_like(theta, -np.inf), np.full_like(theta, np.inf))
        return cls(r, theta - r * h, theta + r * h)


def check_radius(r) -> float:
    r = float(r)
    if math.isnan(r) or r < 0:
        raise InvalidArgument(f"confidence radius must be in [0, inf], got {r}")
    return r


def delta_given_theta(lp: LinearizedPair, theta0, theta1) -> float:
    theta0 = np.asarray(theta0, dtype=float)
    theta1 = np.asarray(theta1, dtype=float)
    m = lp.F0.shape[1]
    if theta0.shape != (m,) or theta1.shape != (lp.F1.shape[1],):
        raise InvalidArgument("parameter vectors do not match the linearised models")
    return float(np.linalg.norm(lp.a0 + lp.F0 @ theta0 - (lp.a1 + lp.F1 @ theta1)))


def delta_unrestricted(lp: LinearizedPair) -> float:
    """Residual norm of regressing ``a0 - a1`` on ``[-F0, F1]``.

    Uses pivoted QR (LAPACK ``gelsy``), so rank deficiency is handled.
    """
    A = np.hstack([-lp.F0, lp.F1])
    z = lp.a0 - lp.a1
    if A.shape[0] == 0:
        return 0.0
    coef = scipy.linalg.lstsq(A, z, lapack_driver="gelsy")[0]
    return float(np.linalg.norm(z - A @ coef))


def _solve_box(A, z, r, warm=None) -> BvlsSolution:
    p = A.shape[1]
    bound = np.full(p, r)
    x0, active0 = warm if warm is not None else (None, None)
    # residual is A v + z, i.e. least squares of -z on A
    return bvls(A, -z, -bound, bound, x0=x0, active0=active0)


def delta_sq_counts(table: PointTable, counts: np.ndarray, r: float, warm=None) -> float:
    """Squared ``delta_r`` of the design given as a count vector over the space.

    ``warm`` is an optional ``(x, active_set)`` pair from a nearby design.
    """
    A, z = table.compressed(counts)
    if r == 0.0:
        return float(z @ z)
    if math.isinf(r):
        if A.shape[0] == 0:
            return 0.0
        coef = np.linalg.lstsq(A, -z, rcond=None)[0]
        res = A @ coef + z
        return float(res @ res)
    return _solve_box(A, z, r, warm).residual_norm_sq


def box_solution(table: PointTable, counts: np.ndarray, r: float):
    """Minimiser (scaled coordinates ``v``, ``u = h * v``), squared value and
    active set (``None`` unless a box solve ran)."""
    A, z = table.compressed(counts)
    active = None
    if math.isinf(r):
        v = np.linalg.lstsq(A, -z, rcond=None)[0]
    elif r == 0.0:
        v = np.zeros(A.shape[1])
    else:
        sol = _solve_box(A, z, r)
        v, active = sol.x, sol.active_set
    res = A @ v + z
    return v, float(res @ res), active


def delta_r(problem: DiscriminationProblem, design: ExactDesign, r: float,
            table: PointTable | None = None) -> float:
    """``delta_r`` of an exact design: the linearised distance minimised over the r-box."""
    r = check_radius(r)
    table = table if table is not None else PointTable(problem)
    return math.sqrt(max(delta_sq_counts(table, design.count_vector(len(table)), r), 0.0))


def delta_r_bvls(problem: DiscriminationProblem, design: ExactDesign, r: float) -> BvlsSolution:
    """``delta_r`` through BVLS on the unscaled parameters, infinite bounds allowed.

    Kept as an independent path: it works on ``theta`` itself with
    ``A = [-F0, F1]`` and observations ``a0 - a1``.
    """
    from .linearization import linearize

    lp = linearize(problem, design)
    box = ConfidenceBox.dilate(problem, r)
    A = np.hstack([-lp.F0, lp.F1])
    return bvls(A, lp.a0 - lp.a1, box.lower, box.upper)
