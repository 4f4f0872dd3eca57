"""Acceptance checks for the reference examples.

Each check prints one ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary).  Run standalone with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from deltadesign import (ErrorModel, ExactDesign, PointTable, SearchConfig, SimConfig,  # noqa: E402
                         batched_rates, bound_iterative, bound_lp, builtin_pair, bvls,
                         correct_decision_lower_bound, delta_given_theta, delta_r,
                         enumerate_optimal, get_model, kl_exchange, linearize,
                         quadratic_components, replay_certificate, run_simulation, sweep_r)
from deltadesign.criterion import delta_sq_counts  # noqa: E402
from deltadesign.models import ENZYME_SIGMA, ENZYME_THETA0, ENZYME_THETA1  # noqa: E402
from deltadesign.simplex import INFEASIBLE, OPTIMAL, solve_standard  # noqa: E402
from deltadesign.simulation import LOGNORMAL, NORMAL  # noqa: E402
from oracles import (bvls_bruteforce, central_difference, lp_vertex_enumeration,  # noqa: E402
                     random_counts, random_lp, tiny_problem)

# reference hit rates in percent, (model 0 true, model 1 true)
TABLE_RATES = {1.0: (97.59, 95.11), 5.0: (97.93, 97.03), 15.0: (96.50, 95.29)}


def record(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@lru_cache(maxsize=None)
def motivating_unrestricted():
    problem = builtin_pair("motivating")
    start = time.perf_counter()
    res = kl_exchange(problem, SearchConfig(n=6, r=math.inf))
    return res, time.perf_counter() - start


@lru_cache(maxsize=None)
def enzyme_design(n: int, r: float, restarts: int = 8) -> ExactDesign:
    problem = builtin_pair("enzyme")
    return kl_exchange(problem, SearchConfig(n=n, r=r, restarts=restarts, seed=0)).design


# ---------------------------------------------------------------------------

def test_motivating_unrestricted_optimum():
    res, elapsed = motivating_unrestricted()
    ok = abs(res.value**2 - 0.02614) <= 1e-4 and elapsed < 10
    assert record("motivating o(inf)", ok,
                  f"o(inf)^2 = {res.value**2:.6f} (o = {res.value:.6f}), target 0.02614 +- 1e-4, "
                  f"{elapsed:.1f} s (limit 10 s)")


def test_iterative_confidence_bound():
    o_inf = motivating_unrestricted()[0].value
    start = time.perf_counter()
    res = bound_iterative(builtin_pair("motivating"), 6, o_inf, 0.3, 1 + 1e-6)
    elapsed = time.perf_counter() - start
    ok = abs(res.r_star - 0.6787) <= 0.005 and res.iterations <= 10 and elapsed < 60
    assert record("iterative bound", ok,
                  f"r* = {res.r_star:.6f} (target 0.6787 +- 0.005) after {res.iterations} "
                  f"design computations (limit 10), {elapsed:.1f} s (limit 60 s)")


def test_sweep_structure():
    problem = builtin_pair("motivating")
    radii = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    out = sweep_r(problem, 6, radii)
    sizes = [len(res.design.support) for _, res in out]
    values = [res.value for _, res in out]
    first = out[0][1].design
    at_two = first.counts == {problem.space.index_of([2.0]): 6}
    progression = sizes[0] == 1 and 2 in sizes and sizes[-1] == 3 and sizes == sorted(sizes)
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    ok = at_two and progression and decreasing
    assert record("r-sweep structure", ok,
                  f"support sizes {sizes}, all mass at x=2 for r=0.01: {at_two}, "
                  f"values strictly decreasing: {decreasing}")


def test_enzyme_lp_bound():
    problem = builtin_pair("enzyme")
    start = time.perf_counter()
    res = bound_lp(problem)
    elapsed = time.perf_counter() - start
    replay = replay_certificate(problem, res)
    ok = res.r_star is not None and abs(res.r_star - 64.02) <= 0.5 and replay <= 1e-8 \
        and elapsed < 30
    assert record("enzyme LP bound", ok,
                  f"r* = {res.r_star:.4f} (target 64.02 +- 0.5), certificate replay {replay:.2e} "
                  f"(limit 1e-8), {elapsed:.2f} s (limit 30 s)")


def test_hit_rate_band():
    problem = builtin_pair("enzyme")
    start = time.perf_counter()
    sim = SimConfig(N=10_000, seed=1, error=ErrorModel(NORMAL, ENZYME_SIGMA, 2.0))
    parts, ok = [], True
    for r, (ref0, ref1) in TABLE_RATES.items():
        rep = run_simulation(problem, enzyme_design(6, r), sim)
        got0, got1 = 100 * rep.rate(0), 100 * rep.rate(1)
        inside = abs(got0 - ref0) <= 1.5 and abs(got1 - ref1) <= 1.5
        ok &= inside
        parts.append(f"r={r:g}: ({got0:.2f}, {got1:.2f}) vs ({ref0}, {ref1})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 15 * 60
    assert record("hit-rate band", ok, "; ".join(parts) + f"; {elapsed:.0f} s (limit 900 s)")


# ---------------------------------------------------------------------------
# property suite

def _homogeneity(rng):
    for case in range(200):
        problem = builtin_pair("enzyme", grid=(7, 9)) if case % 2 else tiny_problem(rng, 8)
        table = PointTable(problem)
        counts = random_counts(rng, len(table), int(rng.integers(1, 8)))
        r = float(rng.choice([0.0, 0.3, 1.0, 5.0, math.inf]))
        s = int(rng.integers(2, 6))
        base, rep = delta_sq_counts(table, counts, r), delta_sq_counts(table, s * counts, r)
        if abs(rep - s * base) > 1e-10 * max(abs(s * base), 1e-300) + 1e-14:
            return False
    return True


def _monotone_convex(rng):
    problem = builtin_pair("enzyme")
    table = PointTable(problem)
    grid = np.linspace(0.0, 10.0, 50)
    for _ in range(20):
        counts = random_counts(rng, len(table), int(rng.integers(2, 10)))
        vals = np.array([delta_sq_counts(table, counts, r) for r in grid])
        scale = 1.0 + vals[0]
        if np.any(np.diff(vals) > 1e-10 * scale):
            return False
        if np.any(vals[:-2] + vals[2:] - 2 * vals[1:-1] < -1e-8 * scale):
            return False
    return True


def _bvls_oracle(rng):
    for _ in range(200):
        A = rng.standard_normal((6, 4))
        b = rng.standard_normal(6) * rng.uniform(0.5, 4)
        lo, hi = -np.ones(4), np.ones(4)
        if abs(bvls(A, b, lo, hi).residual_norm_sq - bvls_bruteforce(A, b, lo, hi)[0]) > 1e-8:
            return False
    return True


def _exchange_vs_enumeration(rng):
    for _ in range(30):
        size, n = int(rng.integers(2, 7)), int(rng.integers(1, 5))
        problem = tiny_problem(rng, size)
        r = float(rng.choice([0.05, 0.3, 1.0, 3.0, math.inf]))
        ex = kl_exchange(problem, SearchConfig(n=n, r=r, restarts=4, seed=int(rng.integers(1000))))
        en = enumerate_optimal(problem, n, r)
        if abs(ex.value - en.value) > 1e-9 * (1 + en.value):
            return False
    return True


def _simplex_oracle(rng):
    for case in range(50):
        c, A, b = random_lp(rng, case)
        ref, sol = lp_vertex_enumeration(c, A, b), solve_standard(c, A, b)
        if ref is None:
            if sol.status != INFEASIBLE:
                return False
        elif sol.status != OPTIMAL or abs(sol.objective - ref) > 1e-8 * (1 + abs(ref)):
            return False
    return True


def _quadratic_identity(rng):
    for name in ("motivating", "enzyme"):
        problem = builtin_pair(name)
        m = problem.m
        for _ in range(40):
            counts = random_counts(rng, len(problem.space), int(rng.integers(1, 13)))
            d = ExactDesign.from_count_vector(counts)
            lp, q = linearize(problem, d), quadratic_components(problem, d)
            theta = problem.theta + problem.halfwidth * rng.uniform(-3, 3, 2 * m)
            direct = delta_given_theta(lp, theta[:m], theta[m:]) ** 2
            if abs(q.evaluate(theta, problem.theta) - direct) > 1e-9 * (1 + direct):
                return False
    return True


def _gradients(rng):
    samplers = {
        "linear": (lambda: rng.uniform(-3, 3, 1), lambda: rng.uniform(-2, 2, (1, 1))),
        "quadratic": (lambda: rng.uniform(-3, 3, 1), lambda: rng.uniform(-2, 2, (1, 1))),
        "exponential": (lambda: rng.uniform(-2, 2, 1), lambda: rng.uniform(0.5, 2, (1, 1))),
        "competitive": (lambda: np.asarray(ENZYME_THETA0) * rng.uniform(0.5, 1.5, 3),
                        lambda: np.array([[rng.uniform(0, 30), rng.uniform(0, 40)]])),
        "noncompetitive": (lambda: np.asarray(ENZYME_THETA1) * rng.uniform(0.5, 1.5, 3),
                           lambda: np.array([[rng.uniform(0, 30), rng.uniform(0, 40)]])),
    }
    for name, (draw_theta, draw_x) in samplers.items():
        model = get_model(name)
        for _ in range(100):
            theta, X = draw_theta(), draw_x()
            an = model.gradient(theta, X)
            fd = central_difference(model, theta, X)
            if np.max(np.abs(an - fd) / np.maximum(np.abs(an), 1.0)) >= 1e-5:
                return False
    return True


def test_property_suite():
    checks = [("homogeneity", _homogeneity), ("monotone+convex in r", _monotone_convex),
              ("bvls vs enumeration", _bvls_oracle), ("exchange vs enumeration",
                                                      _exchange_vs_enumeration),
              ("simplex vs vertices", _simplex_oracle), ("quadratic-form identity",
                                                         _quadratic_identity),
              ("gradients vs differences", _gradients)]
    results = []
    for i, (name, fn) in enumerate(checks):
        results.append((name, fn(np.random.default_rng(1000 + i))))
    ok = all(v for _, v in results)
    assert record("property suite", ok,
                  ", ".join(f"{name} {'ok' if v else 'FAILED'}" for name, v in results))


# ---------------------------------------------------------------------------

def test_lower_bound_consistency():
    enzyme, motivating = builtin_pair("enzyme"), builtin_pair("motivating")
    configs = [
        ("enzyme r=1, 1 sd", enzyme, enzyme_design(6, 1.0), 1.0, ENZYME_SIGMA),
        ("enzyme r=1, 2 sd", enzyme, enzyme_design(6, 1.0), 1.0, 2 * ENZYME_SIGMA),
        ("enzyme r=5, 1.5 sd", enzyme, enzyme_design(6, 5.0), 5.0, 1.5 * ENZYME_SIGMA),
        ("motivating r=inf", motivating, motivating_unrestricted()[0].design, math.inf, 0.03),
        ("motivating r=0.3", motivating,
         kl_exchange(motivating, SearchConfig(n=6, r=0.3)).design, 0.3, 0.1),
    ]
    N, ok, parts = 2000, True, []
    for label, problem, design, r, sigma in configs:
        bound = correct_decision_lower_bound(delta_r(problem, design, r), design.n, sigma)
        rep = run_simulation(problem, design, SimConfig(N=N, seed=3,
                                                        error=ErrorModel(NORMAL, sigma, 1.0)))
        worst = min(rep.rate(0), rep.rate(1))
        se = max(math.sqrt(bound * (1 - bound) / N), math.sqrt(worst * (1 - worst) / N))
        ok &= worst >= bound - 3 * se
        parts.append(f"{label}: min rate {worst:.4f} >= bound {bound:.4f} - 3se")
    assert record("chi-square lower bound", ok, "; ".join(parts))


def test_lognormal_batches():
    problem = builtin_pair("enzyme")
    sim = SimConfig(N=2000, seed=5, error=ErrorModel(LOGNORMAL, ENZYME_SIGMA, 5.0))
    ok, parts = True, []
    for r in (1.0, 5.0):
        rep = run_simulation(problem, enzyme_design(60, r, restarts=2), sim)
        for k, rates in enumerate(batched_rates(rep, 100)):
            inside = bool(np.all((rates >= 0.5) & (rates <= 1.0)))
            med = float(np.median(rates))
            ok &= inside and med > 0.9
            parts.append(f"r={r:g} model {k} true: median {med:.3f}, range "
                         f"[{rates.min():.2f}, {rates.max():.2f}]")
    assert record("lognormal batches (n=60, 5 sd)", ok, "; ".join(parts))


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
