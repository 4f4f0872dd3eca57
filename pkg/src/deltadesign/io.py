"""Reading and writing problem configs, design CSVs, reports and hit-rate tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, NotFound
from .models import (DesignSpace, DiscriminationProblem, ExactDesign, builtin_pair,
                     get_model)


def fmt(v) -> str:
    """Round-trip float formatting: shortest repr, never more than 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def parse_radius(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        return float(t)
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse radius {text!r}") from exc


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise NotFound(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidArgument("config root must be a JSON object")
    return cfg


def _space_from_spec(spec, base_dir: Path) -> DesignSpace:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise InvalidArgument('space must be one of {"points": ...}, {"grid": ...}, {"csv": ...}')
    (kind, value), = spec.items()
    if kind == "points":
        return DesignSpace(np.asarray(value, dtype=float))
    if kind == "grid":
        axes = [np.linspace(float(a), float(b), int(k)) for a, b, k in value]
        return DesignSpace.grid(*axes)
    if kind == "csv":
        path = base_dir / value
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except OSError as exc:
            raise NotFound(f"design space file {path} not found") from exc
        return DesignSpace(data)
    raise InvalidArgument(f"unknown space kind {kind!r}")


def problem_from_config(cfg: dict, base_dir=".") -> DiscriminationProblem:
    """Build the discrimination problem named or defined in a config mapping."""
    spec = cfg.get("problem")
    if spec is None:
        raise InvalidArgument("no problem given")
    base_dir = Path(base_dir)
    if isinstance(spec, str):
        options = {}
        if cfg.get("grid") is not None:
            options["grid"] = tuple(int(g) for g in cfg["grid"])
        problem = builtin_pair(spec, **options)
        if cfg.get("space") is not None:
            problem = problem.with_space(_space_from_spec(cfg["space"], base_dir))
        return problem
    if not isinstance(spec, dict):
        raise InvalidArgument("problem must be a built-in name or an object")
    try:
        return DiscriminationProblem(
            get_model(spec["model0"]), get_model(spec["model1"]),
            _space_from_spec(spec["space"], base_dir),
            spec["theta0"], spec["theta1"], spec["halfwidth0"], spec["halfwidth1"],
            name=spec.get("name", "custom"))
    except KeyError as exc:
        raise InvalidArgument(f"problem definition lacks key {exc}") from exc


def coordinate_names(space: DesignSpace) -> list:
    return [f"x{j + 1}" for j in range(space.dim)]


def write_design_csv(path, space: DesignSpace, design: ExactDesign) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(coordinate_names(space) + ["count"])
        for i, c in design.counts.items():
            w.writerow([fmt(v) for v in space.points[i]] + [c])


def write_json(path, payload: dict) -> None:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    def clean(o):
        if isinstance(o, float) and math.isinf(o):
            return "inf" if o > 0 else "-inf"
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    with open(path, "w") as fh:
        json.dump(clean(payload), fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def read_designs_csv(path, space: DesignSpace):
    """Designs from a CSV with coordinate columns, ``count`` and optional ``design``.

    Points missing from ``space`` are appended to it.  Returns
    ``(space, {name: ExactDesign})`` preserving file order of names.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise NotFound(f"design file {path} not found") from exc
    if not rows:
        raise InvalidArgument(f"design file {path} has no rows")
    coords = [k for k in rows[0] if k not in ("count", "design")]
    if len(coords) != space.dim:
        raise InvalidArgument(f"design file has {len(coords)} coordinate columns, "
                              f"the design space needs {space.dim}")
    try:
        pts = np.array([[float(row[k]) for k in coords] for row in rows])
        counts = [int(row.get("count") or 1) for row in rows]
    except ValueError as exc:
        raise InvalidArgument(f"bad number in {path}: {exc}") from exc
    names = [row.get("design") or Path(path).stem for row in rows]
    space = space.with_points(pts)
    designs: dict = {}
    for name, p, c in zip(names, pts, counts):
        designs.setdefault(name, {})
        i = space.index_of(p)
        designs[name][i] = designs[name].get(i, 0) + c
    return space, {name: ExactDesign(c) for name, c in designs.items()}


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
