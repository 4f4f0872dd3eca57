"""Command-line front end.

Commands: ``optimize``, ``bound``, ``sweep``, ``simulate`` and ``eval``.
Every command reads an optional JSON config (``--config``); flags given on
the command line override its keys.  Exit status is 0 on success, 2 for
configuration or parse errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .bounds import (ITERATIVE, LP, BoundResult, bound_iterative, bound_lp,
                     conditionally_linear_certificate, format_bound_report)
from .criterion import delta_r
from .errors import GuardExceeded, InvalidArgument, NotFound, NumericDomainError, SolverFailure
from .fitting import FitConfig
from .linearization import PointTable
from .models import ENZYME_SIGMA
from .search import SearchConfig, enumerate_optimal, kl_exchange, sweep_r
from .simulation import LOGNORMAL, NORMAL, ErrorModel, SimConfig, batched_rates, run_simulation
from .special import chi2_cdf

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ERROR_KINDS = {"normal": NORMAL, "lognormal": LOGNORMAL, NORMAL: NORMAL, LOGNORMAL: LOGNORMAL}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InvalidArgument(f"{self.prog}: {message}")


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [io.parse_radius(v) for v in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    return [io.parse_radius(p) for p in parts]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--problem", help="built-in problem name (motivating, enzyme)")
    common.add_argument("--grid", help="enzyme grid resolution, e.g. 31,41")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--restarts", type=int, help="exchange-search restarts")
    common.add_argument("--threads", type=int, help="worker threads for simulations")

    parser = _Parser(prog="deltadesign", description="Robust model-discrimination designs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", parents=[common], help="delta_r-optimal exact design")
    p.add_argument("--n", type=int)
    p.add_argument("--r", help="confidence radius, a number or inf")
    p.add_argument("--method", choices=["kl", "enumerate"])

    p = sub.add_parser("bound", parents=[common], help="upper confidence bound r*")
    p.add_argument("--method", choices=[ITERATIVE, LP, "conditional"])
    p.add_argument("--n", type=int)
    p.add_argument("--r-ini", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--o-inf", type=float, help="precomputed o(inf) (delta scale)")

    p = sub.add_parser("sweep", parents=[common], help="optimal designs over a list of radii")
    p.add_argument("--n", type=int)
    p.add_argument("--r-list", help="comma-separated ascending radii")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo hit rates")
    p.add_argument("--n", type=int)
    p.add_argument("--design-rs", help="radii of delta_r-optimal designs to simulate")
    p.add_argument("--designs-file", help="CSV of designs (coordinates, count, design)")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--c-list", help="comma-separated parameter perturbation factors")
    p.add_argument("--inflation", help="comma-separated error sd multipliers")
    p.add_argument("--error", choices=sorted(ERROR_KINDS))
    p.add_argument("--sigma", type=float)
    p.add_argument("--multistart", type=int)
    p.add_argument("--batch-size", type=int, help="also write per-batch hit rates")
    p.add_argument("--log", action="store_true", help="write a per-replicate log")

    p = sub.add_parser("eval", parents=[common], help="delta_r of given designs")
    p.add_argument("--designs-file")
    p.add_argument("--r", help="confidence radius, a number or inf")
    p.add_argument("--sigma", type=float, help="also report the chi-square lower bound")
    return parser


def _settings(args) -> tuple:
    """Merge config file and flags; returns ``(settings, base_dir)``."""
    cfg, base = {}, Path(".")
    if args.config:
        cfg = io.load_config(args.config)
        base = Path(args.config).resolve().parent
    flat = dict(cfg)
    for section in ("search", "bound", "sim"):
        sec = cfg.get(section) or {}
        if not isinstance(sec, dict):
            raise InvalidArgument(f"config key {section!r} must be an object")
        flat.update(sec)
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            flat[key] = value
    if isinstance(flat.get("grid"), str):
        flat["grid"] = [int(g) for g in flat["grid"].split(",")]
    if "problem" not in flat:
        raise InvalidArgument("no problem given: use --problem or a config file")
    return flat, base


def _require(s, key, flag):
    if s.get(key) is None:
        raise InvalidArgument(f"missing required option {flag}")
    return s[key]


def _out_dir(s) -> Path:
    out = Path(s.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _r_tag(r: float) -> str:
    return "inf" if math.isinf(r) else format(r, "g")


def _report(lines) -> str:
    return "\n".join(f"{k}: {v}" for k, v in lines) + "\n"


def cmd_optimize(s, base) -> int:
    problem = io.problem_from_config(s, base)
    n = int(_require(s, "n", "--n"))
    r = io.parse_radius(s.get("r", "inf"))
    seed, restarts = int(s.get("seed", 0)), int(s.get("restarts", 8))
    if s.get("method", "kl") == "enumerate":
        res = enumerate_optimal(problem, n, r)
    else:
        res = kl_exchange(problem, SearchConfig(n=n, r=r, restarts=restarts, seed=seed))
    out = _out_dir(s)
    io.write_design_csv(out / "design.csv", problem.space, res.design)
    meta = {"problem": problem.name, "n": n, "r": r, "value": res.value,
            "value_sq": res.value**2, "seed": seed, "restarts": restarts,
            "restart_values": res.restarts_log, "evaluations": res.evaluations}
    io.write_json(out / "design.json", meta)
    text = _report([("problem", problem.name), ("n", n), ("r", _r_tag(r)),
                    ("value", repr(res.value)), ("value_sq", repr(res.value**2)),
                    ("support_size", len(res.design.support)),
                    ("design", "; ".join(f"{tuple(problem.space.points[i].tolist())} x {c}"
                                         for i, c in res.design.counts.items()))])
    (out / "optimize_report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_bound(s, base) -> int:
    problem = io.problem_from_config(s, base)
    method = s.get("method", LP)
    if method == ITERATIVE:
        n = int(_require(s, "n", "--n"))
        seed, restarts = int(s.get("seed", 0)), int(s.get("restarts", 8))
        o_inf = s.get("o_inf")
        if o_inf is None:
            o_inf = kl_exchange(problem, SearchConfig(n=n, r=math.inf, restarts=restarts,
                                                      seed=seed)).value
        r_ini = float(s.get("r_ini", 0.3))
        search = SearchConfig(n=n, r=r_ini, restarts=restarts, seed=seed)
        result = bound_iterative(problem, n, float(o_inf), r_ini, float(s.get("q", 2.0)), search)
        result.note = (result.note + " " if result.note else "") + f"o_inf={float(o_inf)!r}"
    elif method == LP:
        result = bound_lp(problem)
    elif method == "conditional":
        result = conditionally_linear_certificate(problem)
        if result is None:
            result = BoundResult(None, LP, note="models do not declare conditionally linear "
                                                "coordinates that zero the linearisation")
    else:
        raise InvalidArgument(f"unknown bound method {method!r}")
    text = f"problem: {problem.name}\n" + format_bound_report(result, problem)
    out = _out_dir(s)
    (out / "bound_report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_sweep(s, base) -> int:
    problem = io.problem_from_config(s, base)
    n = int(_require(s, "n", "--n"))
    radii = _float_list(_require(s, "r_list", "--r-list"))
    if not radii:
        raise InvalidArgument("empty r list")
    seed, restarts = int(s.get("seed", 0)), int(s.get("restarts", 8))
    results = sweep_r(problem, n, radii, restarts=restarts, seed=seed)
    out = _out_dir(s)
    rows = []
    for r, res in results:
        name = f"design_r{_r_tag(r)}.csv"
        io.write_design_csv(out / name, problem.space, res.design)
        rows.append([r, res.value, res.value**2, len(res.design.support), name])
    io.write_rows_csv(out / "sweep.csv", ["r", "value", "value_sq", "support_size", "file"], rows)
    # re-read what was written and check the values column
    with open(out / "sweep.csv", newline="") as fh:
        written = [float(row["value"]) for row in csv.DictReader(fh)]
    for a, b in zip(written, written[1:]):
        if b > a * (1.0 + 1e-9) + 1e-12:
            raise SolverFailure("sweep values increase in r", {"values": written})
    for r, v, v2, k, name in rows:
        print(f"r={_r_tag(r)} value={v!r} value_sq={v2!r} support={k} file={name}")
    return EXIT_OK


def _sim_base(s, problem) -> SimConfig:
    kind = ERROR_KINDS.get(s.get("error", "normal"))
    if kind is None:
        raise InvalidArgument(f"unknown error kind {s.get('error')!r}")
    sigma = s.get("sigma")
    if sigma is None:
        sigma = ENZYME_SIGMA if problem.name == "enzyme" else 1.0
    fit = FitConfig(multistart=int(s.get("multistart", 5)))
    return SimConfig(N=int(s.get("N", 10_000)), seed=int(s.get("seed", 0)),
                     error=ErrorModel(kind, float(sigma), 1.0), fit=fit,
                     workers=int(s.get("threads", 1)))


def _collect_designs(s, problem, base):
    designs = {}
    if s.get("designs_file"):
        space, loaded = io.read_designs_csv(base / s["designs_file"], problem.space)
        problem = problem.with_space(space)
        designs.update(loaded)
    if s.get("design_rs") is not None:
        n = int(_require(s, "n", "--n"))
        seed, restarts = int(s.get("seed", 0)), int(s.get("restarts", 8))
        table = PointTable(problem)
        for r in _float_list(s["design_rs"]):
            cfg = SearchConfig(n=n, r=r, restarts=restarts, seed=seed)
            designs[f"delta_r{_r_tag(r)}"] = kl_exchange(problem, cfg, table).design
    if not designs:
        raise InvalidArgument("no designs: give --design-rs and/or --designs-file")
    return problem, designs


def cmd_simulate(s, base) -> int:
    problem = io.problem_from_config(s, base)
    problem, designs = _collect_designs(s, problem, base)
    sim = _sim_base(s, problem)
    c_list = _float_list(s.get("c_list", "0"))
    inflations = _float_list(s.get("inflation", "1"))
    batch = s.get("batch_size")
    out = _out_dir(s)

    design_rows = []
    for name, d in designs.items():
        for i, c in d.counts.items():
            design_rows.append([name] + list(problem.space.points[i]) + [c])
    io.write_rows_csv(out / "designs.csv", ["design"] + io.coordinate_names(problem.space)
                      + ["count"], design_rows)

    rows, batch_rows, log_rows = [], [], []
    for name, d in designs.items():
        for c in c_list:
            for k in inflations:
                cfg = replace(sim, perturbation_c=c, error=replace(sim.error, inflation=k))
                rep = run_simulation(problem, d, cfg)
                for m in (0, 1):
                    rows.append([name, c, k, m, rep.N, (rep.hits0, rep.hits1)[m],
                                 rep.fit_failures[m], rep.ties[m], rep.rate(m),
                                 rep.rate(m, failures_as_misses=True), cfg.seed, cfg.error.kind])
                    if s.get("log"):
                        for t in range(rep.N):
                            sse0, sse1 = rep.sse[m][t]
                            log_rows.append([name, c, k, m, t, sse0, sse1,
                                             int(rep.correct[m][t])])
                if batch:
                    for m, rates in enumerate(batched_rates(rep, int(batch))):
                        for b, v in enumerate(rates):
                            batch_rows.append([name, c, k, m, b, v])
                print(f"{name} c={c:g} k={k:g}: hit rates {100 * rep.rate(0):.2f}% "
                      f"(model 0 true), {100 * rep.rate(1):.2f}% (model 1 true), "
                      f"fit failures {rep.fit_failures}")
    io.write_rows_csv(out / "hit_rates.csv",
                      ["design", "c", "inflation", "true_model", "N", "hits", "fit_failures",
                       "ties", "rate", "rate_failures_as_misses", "seed", "error"], rows)
    if batch:
        io.write_rows_csv(out / "batches.csv",
                          ["design", "c", "inflation", "true_model", "batch", "rate"], batch_rows)
    if s.get("log"):
        io.write_rows_csv(out / "replicates.csv",
                          ["design", "c", "inflation", "true_model", "replicate", "sse0", "sse1",
                           "correct"], log_rows)
    return EXIT_OK


def cmd_eval(s, base) -> int:
    problem = io.problem_from_config(s, base)
    space, designs = io.read_designs_csv(base / _require(s, "designs_file", "--designs-file"),
                                         problem.space)
    problem = problem.with_space(space)
    r = io.parse_radius(s.get("r", "inf"))
    rows = []
    for name, d in designs.items():
        v = delta_r(problem, d, r)
        row = [name, d.n, r, v, v * v]
        line = f"{name}: n={d.n} r={_r_tag(r)} value={v!r} value_sq={v * v!r}"
        if s.get("sigma") is not None:
            bound = chi2_cdf(v * v / (4.0 * float(s["sigma"]) ** 2), d.n)
            row.append(bound)
            line += f" lower_bound={bound!r}"
        rows.append(row)
        print(line)
    header = ["design", "n", "r", "value", "value_sq"]
    if s.get("sigma") is not None:
        header.append("lower_bound")
    io.write_rows_csv(_out_dir(s) / "eval.csv", header, rows)
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "bound": cmd_bound, "sweep": cmd_sweep,
            "simulate": cmd_simulate, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings, base = _settings(args)
        return COMMANDS[args.command](settings, base)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (SolverFailure, NumericDomainError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgument, NotFound, GuardExceeded, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, InvalidArgument) and "missing required" in str(exc):
            parser.print_usage(sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
