"""Search for delta_r-optimal exact designs.

``kl_exchange`` is a KL-type exchange heuristic: each pass tries every swap
of one support point against one candidate point and takes the best
improving swap.  A swap ``D -> D - x_i + x_j`` is only evaluated exactly when
a cheap upper bound allows improvement: with ``v`` the minimiser for the
reduced design ``D - x_i``,

    delta_r^2(D - x_i + x_j) <= delta_r^2(D - x_i) + (g_j . v + d_j)^2,

which is vectorised over all ``j`` at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np

from .criterion import box_solution, check_radius, delta_sq_counts
from .errors import GuardExceeded, InvalidArgument, SolverFailure
from .linearization import PointTable
from .models import DiscriminationProblem, ExactDesign

ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class SearchConfig:
    n: int
    r: float
    restarts: int = 8
    seed: int = 0
    max_passes: int = 200
    improvement_tol: float = 1e-12

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidArgument("design size n must be at least 1")
        if int(self.restarts) < 1:
            raise InvalidArgument("restarts must be at least 1")
        check_radius(self.r)


@dataclass
class SearchResult:
    design: ExactDesign
    value: float
    restarts_log: list = field(default_factory=list)
    evaluations: int = 0


class _Evaluator:
    def __init__(self, table: PointTable, r: float):
        self.table = table
        self.r = r
        self.evaluations = 0

    def value_sq(self, counts, warm=None) -> float:
        self.evaluations += 1
        return delta_sq_counts(self.table, counts, self.r, warm)

    def reduced(self, counts):
        """Minimiser and squared value of a (possibly empty) design."""
        self.evaluations += 1
        if not counts.any():
            return np.zeros(self.table.rows.shape[1]), 0.0, None
        return box_solution(self.table, counts, self.r)


def _local_search(ev: _Evaluator, counts: np.ndarray, max_passes: int, rel_tol: float):
    table = ev.table
    value = ev.value_sq(counts)
    for _ in range(max_passes):
        best = value
        best_pair = None
        for i in np.flatnonzero(counts):
            reduced = counts.copy()
            reduced[i] -= 1
            v, base, active = ev.reduced(reduced)
            warm = (v, active) if active is not None else None
            upper = base + (table.scaled_rows @ v + table.delta) ** 2
            upper[i] = -np.inf
            # candidates that could beat the incumbent, strongest bound first
            cand = np.flatnonzero(upper >= best * (1.0 - 1e-12))
            for j in cand[np.argsort(-upper[cand], kind="stable")]:
                if upper[j] < best * (1.0 - 1e-12):
                    break
                trial = reduced.copy()
                trial[j] += 1
                val = ev.value_sq(trial, warm)
                pair = (int(i), int(j))
                if val > best or (val == best and best_pair is not None and pair < best_pair):
                    best, best_pair = val, pair
        if best_pair is None or best <= value + rel_tol * (1.0 + value):
            return counts, value
        i, j = best_pair
        counts = counts.copy()
        counts[i] -= 1
        counts[j] += 1
        value = best
    return counts, value


def initial_designs(table: PointTable, n: int, restarts: int, seed: int) -> list:
    """Restart seeds: all mass at the largest nominal difference, an evenly
    spread design, then seeded random multisets."""
    N = len(table)
    out = []
    top = np.zeros(N, dtype=int)
    top[int(np.argmax(np.abs(table.delta)))] = n
    out.append(top)
    if restarts >= 2:
        if N <= n:
            spread = round_approximate({i: 1.0 / N for i in range(N)}, n).count_vector(N)
        else:
            spread = np.zeros(N, dtype=int)
            np.add.at(spread, np.round(np.linspace(0, N - 1, n)).astype(int), 1)
        out.append(spread)
    rng = np.random.default_rng(seed)
    while len(out) < restarts:
        c = np.zeros(N, dtype=int)
        np.add.at(c, rng.integers(0, N, size=n), 1)
        out.append(c)
    return out


def kl_exchange(problem: DiscriminationProblem, config: SearchConfig,
                table: PointTable | None = None,
                extra_starts: Sequence[ExactDesign] = ()) -> SearchResult:
    """Best design over restarts of the exchange heuristic.

    ``extra_starts`` are additional starting designs tried after the
    configured restarts (used by sweeps and the confidence-bound iteration).
    """
    table = table if table is not None else PointTable(problem)
    N, n, r = len(table), int(config.n), check_radius(config.r)
    ev = _Evaluator(table, r)
    starts = initial_designs(table, n, int(config.restarts), int(config.seed))
    for d in extra_starts:
        if d.n != n:
            raise InvalidArgument(f"start design has {d.n} points, expected {n}")
        starts.append(d.count_vector(N))
    best_counts, best_val, log = None, -np.inf, []
    for start in starts:
        counts, val = _local_search(ev, start, int(config.max_passes), config.improvement_tol)
        log.append(math.sqrt(max(val, 0.0)))
        if val > best_val:
            best_counts, best_val = counts, val
    return SearchResult(ExactDesign.from_count_vector(best_counts), math.sqrt(max(best_val, 0.0)),
                        log, ev.evaluations)


def enumerate_optimal(problem: DiscriminationProblem, n: int, r: float,
                      table: PointTable | None = None) -> SearchResult:
    """Exact optimum by scanning every n-point multiset of the design space."""
    table = table if table is not None else PointTable(problem)
    N = len(table)
    if n < 1:
        raise InvalidArgument("design size n must be at least 1")
    total = math.comb(N + n - 1, n)
    if total > ENUMERATION_LIMIT:
        raise GuardExceeded(f"{total} designs exceed the enumeration limit {ENUMERATION_LIMIT}",
                            count=total)
    r = check_radius(r)
    ev = _Evaluator(table, r)
    best, best_combo = -np.inf, None
    counts = np.zeros(N, dtype=int)
    for combo in combinations_with_replacement(range(N), n):
        counts[:] = 0
        np.add.at(counts, list(combo), 1)
        val = ev.value_sq(counts)
        if val > best:
            best, best_combo = val, combo
    return SearchResult(ExactDesign.from_indices(best_combo), math.sqrt(max(best, 0.0)),
                        [math.sqrt(max(best, 0.0))], ev.evaluations)


def sweep_r(problem: DiscriminationProblem, n: int, r_list: Iterable[float],
            restarts: int = 8, seed: int = 0, table: PointTable | None = None) -> list:
    """Optimal designs for each radius in ascending ``r_list``.

    Designs found at larger radii are fed back as starts for smaller ones, so
    the reported optimal values are non-increasing in r.
    """
    radii = [check_radius(r) for r in r_list]
    if not radii:
        raise InvalidArgument("r_list must not be empty")
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise InvalidArgument("r_list must be sorted ascending")
    table = table if table is not None else PointTable(problem)
    results = []
    for r in radii:
        cfg = SearchConfig(n=n, r=r, restarts=restarts, seed=seed)
        prev = [results[-1].design] if results else []
        results.append(kl_exchange(problem, cfg, table, extra_starts=prev))
    N = len(table)
    for k in range(len(radii) - 2, -1, -1):
        r = radii[k]
        for later in results[k + 1:]:
            val = math.sqrt(max(delta_sq_counts(table, later.design.count_vector(N), r), 0.0))
            if val > results[k].value:
                cfg = SearchConfig(n=n, r=r, restarts=1, seed=seed)
                better = kl_exchange(problem, cfg, table, extra_starts=[later.design])
                if better.value > results[k].value:
                    better.evaluations += results[k].evaluations
                    results[k] = better
    values = [res.value for res in results]
    for a, b in zip(values, values[1:]):
        if b > a * (1.0 + 1e-9) + 1e-12:
            raise SolverFailure("sweep produced optimal values increasing in r",
                                {"radii": radii, "values": values})
    return list(zip(radii, results))


def round_approximate(weights, n: int) -> ExactDesign:
    """Efficient rounding of an approximate design to ``n`` observations.

    ``weights`` maps design-space index to weight.  Start from
    ``ceil((n - l/2) w_i)`` and repair the total by the apportionment rule:
    increment a point with smallest ``n_i / w_i``, decrement one with largest
    ``(n_i - 1) / w_i``.  Ties go to the lowest point index.
    """
    items = sorted((int(i), float(w)) for i, w in dict(weights).items() if w > 0)
    if not items:
        raise InvalidArgument("weights have empty support")
    if any(w < 0 for w in dict(weights).values()):
        raise InvalidArgument("weights must be nonnegative")
    total_w = sum(w for _, w in items)
    if abs(total_w - 1.0) > 1e-9:
        raise InvalidArgument(f"weights must sum to 1, got {total_w}")
    l = len(items)
    if l > n:
        raise InvalidArgument(f"support of {l} points does not fit in {n} observations")
    idx = [i for i, _ in items]
    w = np.array([wt for _, wt in items])
    counts = np.maximum(np.ceil((n - l / 2.0) * w - 1e-12).astype(int), 1)
    while counts.sum() < n:
        k = int(np.argmin(counts / w))
        counts[k] += 1
    while counts.sum() > n:
        score = np.where(counts > 1, (counts - 1) / w, -np.inf)
        k = int(np.argmax(score))
        counts[k] -= 1
    return ExactDesign(dict(zip(idx, counts.tolist())))
