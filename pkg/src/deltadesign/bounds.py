"""Upper confidence bounds for the dilation radius r.

Two routes: the geometric iteration driven by the precomputed optimum
``o(inf)``, and a linear program over the all-points design whose optimum is
a radius beyond which every design has zero criterion value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .criterion import check_radius, delta_given_theta, delta_sq_counts
from .errors import InvalidArgument, SolverFailure
from .linearization import PointTable, linearize
from .models import DesignSpace, DiscriminationProblem, ExactDesign, RegressionModel
from .search import SearchConfig, kl_exchange
from .simplex import OPTIMAL, LpProblem, simplex_solve

ITERATIVE, LP = "iterative", "lp"


@dataclass
class BoundResult:
    r_star: Optional[float]
    method: str
    certificate: Optional[np.ndarray] = None
    iterations: int = 0
    design: Optional[ExactDesign] = None
    note: str = ""
    trace: list = field(default_factory=list)


def all_points_design(space: DesignSpace) -> ExactDesign:
    return ExactDesign({i: 1 for i in range(len(space))})


# ---------------------------------------------------------------------------
# iterative bound

def bound_iterative(problem: DiscriminationProblem, n: int, o_inf: float, r_ini: float, q: float,
                    search: SearchConfig | None = None, tol: float = 1e-14,
                    growth_guard: float = 1e12) -> BoundResult:
    """Grow r geometrically until re-optimised designs reach ``o_inf``.

    Between re-optimisations the incumbent design is fixed and its
    ``delta_r`` is non-increasing in r, so the first step ``r q^k`` at which it
    drops to ``o_inf`` is located by bracketing and bisection over ``k``
    instead of stepping one factor of ``q`` at a time.  ``iterations`` counts
    optimal-design computations.
    """
    if not r_ini > 0:
        raise InvalidArgument("r_ini must be positive")
    if not q > 1:
        raise InvalidArgument("q must exceed 1")
    if o_inf < 0:
        raise InvalidArgument("o_inf must be nonnegative")
    search = search or SearchConfig(n=n, r=r_ini)
    table = PointTable(problem)
    N = len(table)
    threshold = o_inf + tol * (1.0 + o_inf)
    r_limit = growth_guard * r_ini

    def optimise(r, previous):
        cfg = SearchConfig(n=n, r=r, restarts=search.restarts, seed=search.seed,
                           max_passes=search.max_passes, improvement_tol=search.improvement_tol)
        return kl_exchange(problem, cfg, table, extra_starts=[previous] if previous else [])

    def value(design, r):
        return math.sqrt(max(delta_sq_counts(table, design.count_vector(N), r), 0.0))

    r = float(r_ini)
    result = optimise(r, None)
    computations = 1
    trace = [(r, result.value)]
    design = result.design
    while result.value > threshold:
        # smallest k >= 1 with value(design, r q^k) <= threshold
        lo, hi = 0, 1
        while value(design, r * q**hi) > threshold:
            lo, hi = hi, 2 * hi
            if r * q**hi > r_limit:
                raise SolverFailure(
                    "bound iteration exceeded the growth guard; o(inf) looks unreachable",
                    {"r": r * q**hi, "o_inf": o_inf, "computations": computations})
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if value(design, r * q**mid) > threshold:
                lo = mid
            else:
                hi = mid
        r = r * q**hi
        result = optimise(r, design)
        computations += 1
        design = result.design
        trace.append((r, result.value))
    return BoundResult(r, ITERATIVE, iterations=computations, design=design, trace=trace)


# ---------------------------------------------------------------------------
# LP bound

def _equality_projection(B, d, rank_tol=1e-10, residual_tol=1e-9):
    """Solution set of ``B v = -d`` as ``v_p + N w``; ``None`` if inconsistent."""
    U, s, Vt = np.linalg.svd(B, full_matrices=True)
    rank = int(np.sum(s > rank_tol * (s[0] if s.size else 0.0))) if s.size else 0
    coef = U[:, :rank].T @ (-d)
    v_p = Vt[:rank].T @ (coef / s[:rank])
    res = B @ v_p + d
    scale = 1.0 + np.abs(d) + np.abs(B).sum(axis=1) * np.max(np.abs(v_p), initial=0.0)
    if np.any(np.abs(res) > residual_tol * scale):
        return None
    return v_p, Vt[rank:].T


def bound_lp(problem: DiscriminationProblem) -> BoundResult:
    """Smallest r for which both dilated boxes hold parameters whose
    linearised mean surfaces coincide on every design point.

    The equality system is eliminated first (SVD), leaving an LP in ``r`` and
    the null-space coordinates only.
    """
    table = PointTable(problem)
    B, d = table.scaled_rows, table.delta
    proj = _equality_projection(B, d)
    if proj is None:
        return BoundResult(None, LP, note="linearised mean surfaces cannot coincide on the "
                                          "design space: no vanishing bound")
    v_p, null = proj
    p, k = null.shape
    # variables: r, w (k, free), s_plus (p), s_minus (p)
    nvar = 1 + k + 2 * p
    A = np.zeros((2 * p, nvar))
    rhs = np.concatenate([-v_p, v_p])
    A[:p, 0] = -1.0
    A[:p, 1:1 + k] = null
    A[:p, 1 + k:1 + k + p] = np.eye(p)
    A[p:, 0] = -1.0
    A[p:, 1:1 + k] = -null
    A[p:, 1 + k + p:] = np.eye(p)
    lower = np.concatenate([[0.0], np.full(k, -np.inf), np.zeros(2 * p)])
    upper = np.full(nvar, np.inf)
    cost = np.zeros(nvar)
    cost[0] = 1.0
    sol = simplex_solve(LpProblem(cost, A, rhs, lower, upper))
    if sol.status != OPTIMAL:
        return BoundResult(None, LP, iterations=sol.iterations, note=f"LP {sol.status}")
    v = v_p + null @ sol.x[1:1 + k]
    r_star = float(max(sol.x[0], np.max(np.abs(v))))
    theta = problem.theta + problem.halfwidth * v
    return BoundResult(r_star, LP, certificate=theta, iterations=sol.iterations,
                       design=all_points_design(problem.space))


def replay_certificate(problem: DiscriminationProblem, result: BoundResult) -> float:
    """Linearised distance on the all-points design at the LP certificate."""
    m = problem.m
    lp = linearize(problem, all_points_design(problem.space))
    return delta_given_theta(lp, result.certificate[:m], result.certificate[m:])


# ---------------------------------------------------------------------------
# conditionally linear models

def conditionally_linear_point(model: RegressionModel, theta_nom, halfwidth, space: DesignSpace,
                               fixed_coords: Sequence[int], tol: float = 1e-8):
    """Point with the non-fixed coordinates zeroed, if it zeroes the linearisation.

    Returns ``(theta_hat, r)`` with ``r`` the smallest dilation containing
    ``theta_hat``, or ``None`` when the model is not linear in the free
    coordinates.
    """
    theta_nom = np.asarray(theta_nom, dtype=float)
    fixed = set(int(j) for j in fixed_coords)
    if any(j < 0 or j >= model.param_dim for j in fixed):
        raise InvalidArgument("fixed coordinate index out of range")
    theta_hat = np.array([theta_nom[j] if j in fixed else 0.0 for j in range(model.param_dim)])
    X = space.points
    F = model.gradient(theta_nom, X)
    eta = model.mean(theta_nom, X)
    lin = eta + F @ (theta_hat - theta_nom)
    scale = 1.0 + np.abs(eta) + np.abs(F) @ np.abs(theta_nom)
    if not np.all(np.isfinite(lin)) or np.any(np.abs(lin) > tol * scale):
        return None
    r = float(np.max(np.abs(theta_hat - theta_nom) / np.asarray(halfwidth, dtype=float)))
    return theta_hat, r


def conditionally_linear_certificate(problem: DiscriminationProblem,
                                     fixed_coords0: Sequence[int] | None = None,
                                     fixed_coords1: Sequence[int] | None = None):
    """Feasible LP point built from conditional linearity of both models.

    By default the fixed coordinates are those a model does not declare as
    linear.  Returns a ``BoundResult`` (method ``lp``, not minimal) or ``None``.
    """
    def default_fixed(model):
        if model.linear_coords is None:
            return None
        return [j for j in range(model.param_dim) if j not in model.linear_coords]

    f0 = default_fixed(problem.model0) if fixed_coords0 is None else fixed_coords0
    f1 = default_fixed(problem.model1) if fixed_coords1 is None else fixed_coords1
    if f0 is None or f1 is None:
        return None
    c0 = conditionally_linear_point(problem.model0, problem.theta0, problem.halfwidth0,
                                    problem.space, f0)
    c1 = conditionally_linear_point(problem.model1, problem.theta1, problem.halfwidth1,
                                    problem.space, f1)
    if c0 is None or c1 is None:
        return None
    return BoundResult(max(c0[1], c1[1]), LP, certificate=np.concatenate([c0[0], c1[0]]),
                       note="conditional-linearity construction (feasible, not necessarily minimal)",
                       design=all_points_design(problem.space))


def format_bound_report(result: BoundResult, problem: DiscriminationProblem | None = None) -> str:
    lines = [f"method: {result.method}",
             "r_star: " + ("none" if result.r_star is None else repr(result.r_star)),
             f"iterations: {result.iterations}"]
    if result.certificate is not None:
        lines.append("certificate: " + " ".join(repr(float(v)) for v in result.certificate))
    if result.trace:
        lines.append("trace: " + "; ".join(f"r={r!r} value={v!r}" for r, v in result.trace))
    if result.note:
        lines.append(f"note: {result.note}")
    if problem is not None and result.method == LP and result.certificate is not None:
        lines.append(f"certificate_replay: {replay_certificate(problem, result)!r}")
    return "\n".join(lines) + "\n"
