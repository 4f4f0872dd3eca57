"""Linearisation of the rival models at their nominal values.

For a design the pair is summarised either by the matrices ``F0, F1`` and
offsets ``a0, a1`` or by the quadratic form ``(M, b, c)`` in the deviation
``theta - theta_nominal``.  Everything is a finite sum over design points, so
per-point quantities are computed once on the whole design space and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericDomainError
from .models import DiscriminationProblem, ExactDesign


@dataclass(frozen=True)
class LinearizedPair:
    F0: np.ndarray
    F1: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    theta_nom: np.ndarray

    @property
    def diff_matrix(self) -> np.ndarray:
        """Regressors of the response difference model, ``[F0, -F1]``."""
        return np.hstack([self.F0, -self.F1])

    @property
    def delta_eta(self) -> np.ndarray:
        m = self.F0.shape[1]
        return (self.a0 + self.F0 @ self.theta_nom[:m]) - (self.a1 + self.F1 @ self.theta_nom[m:])


@dataclass(frozen=True)
class QuadraticForm:
    M: np.ndarray
    b: np.ndarray
    c: float

    def evaluate(self, theta, theta_nom) -> float:
        d = np.asarray(theta, dtype=float) - theta_nom
        return float(d @ self.M @ d + 2.0 * self.b @ d + self.c)

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return QuadraticForm(self.M + other.M, self.b + other.b, self.c + other.c)


def _checked(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericDomainError(f"non-finite {what} at the nominal parameters")
    return arr


def linearize(problem: DiscriminationProblem, design: ExactDesign) -> LinearizedPair:
    X = design.points(problem.space)
    F0 = _checked(problem.model0.gradient(problem.theta0, X), "gradient of model0")
    F1 = _checked(problem.model1.gradient(problem.theta1, X), "gradient of model1")
    eta0 = _checked(problem.model0.mean(problem.theta0, X), "mean of model0")
    eta1 = _checked(problem.model1.mean(problem.theta1, X), "mean of model1")
    return LinearizedPair(F0, F1, eta0 - F0 @ problem.theta0, eta1 - F1 @ problem.theta1,
                          problem.theta.copy())


class PointTable:
    """Per-point linearisation data over the whole design space.

    ``rows[x]`` is ``(grad eta0, -grad eta1)`` at the nominal values and
    ``delta[x]`` the nominal mean difference.  Every design criterion is a
    count-weighted sum over these.
    """

    def __init__(self, problem: DiscriminationProblem):
        X = problem.space.points
        g0 = _checked(problem.model0.gradient(problem.theta0, X), "gradient of model0")
        g1 = _checked(problem.model1.gradient(problem.theta1, X), "gradient of model1")
        e0 = _checked(problem.model0.mean(problem.theta0, X), "mean of model0")
        e1 = _checked(problem.model1.mean(problem.theta1, X), "mean of model1")
        self.problem = problem
        self.rows = np.hstack([g0, -g1])
        self.delta = e0 - e1
        self.halfwidth = problem.halfwidth
        # columns scaled by the unit half-widths so the confidence box is [-r, r]^p
        self.scaled_rows = self.rows * self.halfwidth

    def __len__(self):
        return self.rows.shape[0]

    def compressed(self, counts: np.ndarray, scaled: bool = True):
        """Weighted distinct rows ``(A, z)`` with ``||A v + z||^2`` the design's distance."""
        idx = np.flatnonzero(counts)
        w = np.sqrt(counts[idx].astype(float))
        rows = self.scaled_rows if scaled else self.rows
        return rows[idx] * w[:, None], self.delta[idx] * w


def quadratic_components(problem: DiscriminationProblem, design: ExactDesign,
                         table: PointTable | None = None) -> QuadraticForm:
    table = table or PointTable(problem)
    if table.problem is not problem:
        raise InvalidArgument("point table belongs to a different problem")
    counts = design.count_vector(len(table)).astype(float)
    G = table.rows
    M = G.T @ (G * counts[:, None])
    b = G.T @ (counts * table.delta)
    c = float(np.sum(counts * table.delta**2))
    return QuadraticForm(0.5 * (M + M.T), b, c)
