"""Monte-Carlo evaluation of discrimination designs by the likelihood ratio.

Each replicate draws a true parameter, simulates observations on the design,
fits both rival models by least squares and picks the one with the smaller
residual sum of squares.  Replicate ``i`` under true model ``k`` uses its own
random stream derived from ``(seed, k, i)``, so results do not depend on
chunking or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgument
from .fitting import FitConfig, fit_batch, start_points
from .models import DiscriminationProblem, ExactDesign, RegressionModel
from .special import chi2_cdf

NORMAL, LOGNORMAL = "normal-additive", "lognormal-multiplicative-rescaled"


@dataclass(frozen=True)
class ErrorModel:
    kind: str = NORMAL
    sigma: float = 1.0
    inflation: float = 1.0

    def __post_init__(self):
        if self.kind not in (NORMAL, LOGNORMAL):
            raise InvalidArgument(f"unknown error kind {self.kind!r}")
        if not (self.sigma > 0 and self.inflation > 0):
            raise InvalidArgument("sigma and inflation must be positive")

    @property
    def sd(self) -> float:
        return self.sigma * self.inflation

    def describe(self) -> str:
        text = f"{self.kind}, sd = {self.inflation:g} x {self.sigma:g}"
        if self.kind == LOGNORMAL:
            text += " (per-point log-sd s with s^2 = ln(1 + (sd/mean)^2), mean-preserving shift -s^2/2)"
        return text


@dataclass(frozen=True)
class SimConfig:
    N: int = 10_000
    seed: int = 0
    perturbation_c: float = 0.0
    error: ErrorModel = ErrorModel()
    fit: FitConfig = FitConfig()
    chunk: int = 2_000
    workers: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgument("N must be at least 1")
        if self.perturbation_c < 0:
            raise InvalidArgument("perturbation_c must be nonnegative")


@dataclass
class SimReport:
    hits0: int
    hits1: int
    N: int
    seed: int
    error: str
    fit_failures: tuple = (0, 0)
    ties: tuple = (0, 0)
    quality_violations: int = 0
    correct: tuple = field(default=(None, None), repr=False)
    sse: tuple = field(default=(None, None), repr=False)

    def rate(self, k: int, failures_as_misses: bool = False) -> float:
        hits = (self.hits0, self.hits1)[k]
        denom = self.N if failures_as_misses else self.N - self.fit_failures[k]
        return hits / denom if denom else float("nan")


def simulate_observations(model: RegressionModel, theta_true, X, error: ErrorModel,
                          normals: np.ndarray) -> np.ndarray:
    """Observations from standard normal draws ``normals`` (same shape as the means)."""
    eta = model.mean(np.asarray(theta_true, dtype=float), np.asarray(X, dtype=float))
    sd = error.sd
    if error.kind == NORMAL:
        return eta + sd * normals
    if np.any(eta <= 0):
        raise InvalidArgument("lognormal errors need strictly positive means")
    s2 = np.log1p((sd / eta) ** 2)
    return eta * np.exp(np.sqrt(s2) * normals - 0.5 * s2)


def decide(sse0: float, sse1: float) -> int:
    """Likelihood-ratio decision: 0 if model 0 fits at least as well."""
    return 0 if sse0 <= sse1 else 1


def correct_decision_lower_bound(delta_value: float, n: int, sigma: float) -> float:
    """``P[chi2_n <= delta^2 / (4 sigma^2)]``."""
    if delta_value < 0:
        raise InvalidArgument("delta_value must be nonnegative")
    if math.isinf(delta_value):
        return 1.0
    return chi2_cdf(delta_value**2 / (4.0 * sigma**2), n)


def _replicate_draws(seed, stream, first, count, m, n, starts_needed):
    th = np.empty((count, m))
    z = np.empty((count, n))
    su = np.empty((count, 2, starts_needed, m))
    for t in range(count):
        g = np.random.default_rng(np.random.SeedSequence([seed, stream, first + t]))
        th[t] = g.random(m)
        z[t] = g.standard_normal(n)
        su[t] = g.random((2, starts_needed, m))
    return th, z, su


def _run_chunk(problem, X, k, stream, first, count, sim: SimConfig):
    models = (problem.model0, problem.model1)
    centers = (problem.theta0, problem.theta1)
    widths = (problem.halfwidth0, problem.halfwidth1)
    m, n = problem.m, X.shape[0]
    u, z, su = _replicate_draws(sim.seed, stream, first, count, m, n, sim.fit.multistart - 1)
    true = models[k]
    theta_true = centers[k] + sim.perturbation_c * widths[k] * (2.0 * u - 1.0)
    theta_true = np.clip(theta_true, true.lower, true.upper)
    Y = simulate_observations(true, theta_true, X, sim.error, z)
    sse = [None, None]
    ok = [None, None]
    # start draws: slot 0 for the true model's fit, slot 1 for the rival's
    for j, slot in ((k, 0), (1 - k, 1)):
        starts = start_points(centers[j], widths[j], models[j], sim.fit, su[:, slot])
        _, sse[j], ok[j] = fit_batch(models[j], X, Y, starts, sim.fit)
    valid = ok[0] & ok[1]
    decision = np.where(sse[0] <= sse[1], 0, 1)
    correct = valid & (decision == k)
    tie = valid & (sse[0] == sse[1])
    _, sse_true = _sse_at(true, theta_true, X, Y)
    violations = int(np.sum(ok[k] & (sse[k] > sse_true * (1 + 1e-9) + 1e-12)))
    return correct, ~valid, tie, violations, np.column_stack([sse[0], sse[1]])


def _sse_at(model, theta, X, Y):
    resid = model.mean(theta, X) - Y
    return resid, np.sum(resid**2, axis=-1)


def run_simulation(problem: DiscriminationProblem, design: ExactDesign, sim: SimConfig,
                   streams: Sequence[int] = (0, 1)) -> SimReport:
    """Hit counts for both true models.

    ``streams`` picks the random-stream label used for each true model; pass
    ``(1, 0)`` with a label-swapped problem to mirror a run exactly.
    """
    X = design.points(problem.space)
    chunks = [(first, min(sim.chunk, sim.N - first)) for first in range(0, sim.N, sim.chunk)]
    tasks = [(k, first, count) for k in (0, 1) for first, count in chunks]

    def work(task):
        k, first, count = task
        return _run_chunk(problem, X, k, streams[k], first, count, sim)

    if sim.workers > 1:
        with ThreadPoolExecutor(sim.workers) as pool:
            parts = list(pool.map(work, tasks))
    else:
        parts = [work(t) for t in tasks]
    correct, failed, ties, sse = [], [], [], []
    violations = 0
    for k in (0, 1):
        mine = [parts[i] for i, t in enumerate(tasks) if t[0] == k]
        correct.append(np.concatenate([p[0] for p in mine]))
        failed.append(int(sum(p[1].sum() for p in mine)))
        ties.append(int(sum(p[2].sum() for p in mine)))
        sse.append(np.vstack([p[4] for p in mine]))
        violations += sum(p[3] for p in mine)
    return SimReport(int(correct[0].sum()), int(correct[1].sum()), sim.N, sim.seed,
                     sim.error.describe(), tuple(failed), tuple(ties), violations,
                     tuple(correct), tuple(sse))


def batched_rates(report: SimReport, batch_size: int) -> tuple:
    """Per-batch hit rates from consecutive replicates, one array per true model."""
    if batch_size < 1 or report.N % batch_size:
        raise InvalidArgument("N must be a positive multiple of batch_size")
    return tuple(c.reshape(-1, batch_size).mean(axis=1) for c in report.correct)


def batch_hit_rates(problem: DiscriminationProblem, designs: Mapping[str, ExactDesign],
                    sim_grid: Sequence[tuple], base: SimConfig = SimConfig()) -> list:
    """Hit-rate table: one row per design, cells over ``(c, inflation)`` pairs.

    Every cell reuses ``base.seed``.  A cell whose simulation raises is
    marked failed instead of aborting the table.
    """
    if not designs:
        raise InvalidArgument("no designs given")
    rows = []
    for name, design in designs.items():
        cells = []
        for c, k in sim_grid:
            cfg = replace(base, perturbation_c=float(c), error=replace(base.error, inflation=float(k)))
            try:
                rep = run_simulation(problem, design, cfg)
                cells.append({"c": c, "inflation": k, "report": rep, "failed": False})
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                cells.append({"c": c, "inflation": k, "report": None, "failed": True,
                              "error": str(exc)})
        rows.append({"design": name, "cells": cells})
    return rows
