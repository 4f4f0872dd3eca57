"""Regression models, design spaces, exact designs and discrimination problems.

Mean and gradient callbacks are vectorised: ``mean(theta, X)`` takes
``theta`` of shape ``(m,)`` or ``(B, m)`` and design points ``X`` of shape
``(n, d)`` and returns shape ``(n,)`` or ``(B, n)``; ``gradient`` returns
``(n, m)`` or ``(B, n, m)``.
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, NotFound, NumericDomainError

MeanFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DesignSpace:
    """Finite, ordered set of candidate design points."""

    points: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InvalidArgument("design space must be a non-empty (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("design space points must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidArgument("design space contains duplicate points")
        if self.labels is not None and len(self.labels) != pts.shape[0]:
            raise InvalidArgument("labels must match the number of points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @classmethod
    def grid(cls, *axes: Sequence[float]) -> "DesignSpace":
        """Cartesian grid; the first axis varies slowest."""
        mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
        return cls(np.column_stack([m.ravel() for m in mesh]))

    def index_of(self, point, tol: float = 1e-9) -> int:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.dim,):
            raise InvalidArgument(f"point has dimension {p.size}, space has {self.dim}")
        dist = np.max(np.abs(self.points - p), axis=1)
        i = int(np.argmin(dist))
        if dist[i] > tol * (1.0 + np.max(np.abs(p))):
            raise NotFound(f"point {p.tolist()} is not in the design space")
        return i

    def with_points(self, extra) -> "DesignSpace":
        """Return a space extended by the points of ``extra`` not already present."""
        extra = np.atleast_2d(np.asarray(extra, dtype=float))
        new = []
        for p in extra:
            try:
                self.index_of(p)
            except NotFound:
                if not any(np.array_equal(p, q) for q in new):
                    new.append(p)
        if not new:
            return self
        return DesignSpace(np.vstack([self.points, np.array(new)]))


@dataclass(frozen=True)
class RegressionModel:
    """A mean function over a parameter box, with its parameter gradient."""

    name: str
    param_dim: int
    lower: np.ndarray
    upper: np.ndarray
    mean: MeanFn
    gradient: MeanFn
    linear_coords: Optional[tuple] = None
    numeric_gradient: bool = False

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.param_dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.param_dim,)).copy()
        if np.any(lo >= hi):
            raise InvalidArgument(f"{self.name}: empty parameter box")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, theta, strict: bool = False) -> bool:
        theta = np.asarray(theta, dtype=float)
        if strict:
            return bool(np.all(theta > self.lower) and np.all(theta < self.upper))
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


def finite_difference_gradient(mean: MeanFn, param_dim: int, rel_step: float = 1e-6) -> MeanFn:
    """Central-difference gradient for a vectorised mean function."""

    def gradient(theta, X):
        theta = np.asarray(theta, dtype=float)
        cols = []
        for j in range(param_dim):
            h = rel_step * (1.0 + np.abs(theta[..., j]))
            step = np.zeros(theta.shape)
            step[..., j] = h
            diff = mean(theta + step, X) - mean(theta - step, X)
            cols.append(diff / (2.0 * np.asarray(h)[..., None]))
        return np.stack(cols, axis=-1)

    return gradient


def custom_model(name, param_dim, lower, upper, mean, gradient=None, linear_coords=None):
    """Wrap user callbacks as a model; a missing gradient is differenced numerically."""
    numeric = gradient is None
    if numeric:
        gradient = finite_difference_gradient(mean, param_dim)
    return RegressionModel(name, param_dim, lower, upper, mean, gradient,
                           linear_coords=linear_coords, numeric_gradient=numeric)


# ---------------------------------------------------------------------------
# built-in models

def _col(theta, j):
    return np.asarray(theta, dtype=float)[..., j:j + 1]


def _linear_mean(theta, X):
    return _col(theta, 0) * X[:, 0]


def _linear_grad(theta, X):
    theta = np.asarray(theta, dtype=float)
    return np.broadcast_to(X[:, :1], theta.shape[:-1] + (X.shape[0], 1)).copy()


def _quadratic_mean(theta, X):
    return _col(theta, 0) * X[:, 0] ** 2


def _quadratic_grad(theta, X):
    theta = np.asarray(theta, dtype=float)
    return np.broadcast_to(X[:, :1] ** 2, theta.shape[:-1] + (X.shape[0], 1)).copy()


def _exp_mean(theta, X):
    return np.exp(_col(theta, 0) * X[:, 0])


def _exp_grad(theta, X):
    return (X[:, 0] * np.exp(_col(theta, 0) * X[:, 0]))[..., None]


def _competitive_mean(theta, X):
    t1, t2, t3 = _col(theta, 0), _col(theta, 1), _col(theta, 2)
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="raise", invalid="raise"):
        return t1 * x1 / (t2 * (1.0 + x2 / t3) + x1)


def _competitive_grad(theta, X):
    t1, t2, t3 = _col(theta, 0), _col(theta, 1), _col(theta, 2)
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="raise", invalid="raise"):
        inhib = 1.0 + x2 / t3
        den = t2 * inhib + x1
        d1 = x1 / den
        d2 = -t1 * x1 * inhib / den**2
        d3 = t1 * x1 * t2 * x2 / (t3**2 * den**2)
    return np.stack([d1, d2, d3], axis=-1)


def _noncompetitive_mean(theta, X):
    t1, t2, t3 = _col(theta, 0), _col(theta, 1), _col(theta, 2)
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="raise", invalid="raise"):
        return t1 * x1 / ((t2 + x1) * (1.0 + x2 / t3))


def _noncompetitive_grad(theta, X):
    t1, t2, t3 = _col(theta, 0), _col(theta, 1), _col(theta, 2)
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="raise", invalid="raise"):
        inhib = 1.0 + x2 / t3
        sat = t2 + x1
        d1 = x1 / (sat * inhib)
        eta = t1 * d1
        d2 = -eta / sat
        d3 = eta * x2 / (t3**2 * inhib)
    return np.stack([d1, d2, d3], axis=-1)


# Strictly positive enzyme parameters; the open lower end is represented by a tiny bound.
_POS = 1e-8

_REGISTRY: dict = {}


def register_model(name: str, factory: Callable[[], RegressionModel]) -> None:
    _REGISTRY[name] = factory


def get_model(name: str) -> RegressionModel:
    """Look up a registered model, or import one given as ``module:attribute``."""
    if name in _REGISTRY:
        return _REGISTRY[name]()
    if ":" in name:
        mod_name, _, attr = name.partition(":")
        try:
            obj = getattr(importlib.import_module(mod_name), attr)
        except (ImportError, AttributeError) as exc:
            raise NotFound(f"cannot import model {name!r}: {exc}") from exc
        model = obj() if callable(obj) and not isinstance(obj, RegressionModel) else obj
        if not isinstance(model, RegressionModel):
            raise InvalidArgument(f"{name!r} did not produce a RegressionModel")
        return model
    raise NotFound(f"unknown model {name!r}; known: {sorted(_REGISTRY)}")


def model_names():
    return sorted(_REGISTRY)


register_model("linear", lambda: RegressionModel(
    "linear", 1, -np.inf, np.inf, _linear_mean, _linear_grad, linear_coords=(0,)))
register_model("quadratic", lambda: RegressionModel(
    "quadratic", 1, -np.inf, np.inf, _quadratic_mean, _quadratic_grad, linear_coords=(0,)))
register_model("exponential", lambda: RegressionModel(
    "exponential", 1, -np.inf, np.inf, _exp_mean, _exp_grad))
register_model("competitive", lambda: RegressionModel(
    "competitive", 3, [_POS, _POS, _POS], [np.inf, 60.0, 30.0],
    _competitive_mean, _competitive_grad, linear_coords=(0,)))
register_model("noncompetitive", lambda: RegressionModel(
    "noncompetitive", 3, [_POS, _POS, _POS], [np.inf, 60.0, 30.0],
    _noncompetitive_mean, _noncompetitive_grad, linear_coords=(0,)))


def encompassing_mean(theta, lam: float, x) -> float:
    """Mean of the encompassing inhibition model.

    ``lam = 1`` gives competitive and ``lam = 0`` noncompetitive inhibition.
    """
    t1, t2, t3 = (float(v) for v in theta)
    x1, x2 = (float(v) for v in x)
    if t3 == 0.0:
        raise NumericDomainError("theta3 must be nonzero")
    den = t2 * (1.0 + x2 / t3) + x1 * (1.0 + (1.0 - lam) * x2 / t3)
    if den == 0.0:
        raise NumericDomainError("encompassing model denominator is zero")
    return t1 * x1 / den


# ---------------------------------------------------------------------------
# designs

@dataclass(frozen=True)
class ExactDesign:
    """An exact design stored as design-space index -> replication count."""

    counts: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        items = {}
        for i, c in dict(self.counts).items():
            i, c = int(i), int(c)
            if c < 0 or i < 0:
                raise InvalidArgument("design indices and counts must be nonnegative")
            if c:
                items[i] = items.get(i, 0) + c
        if not items:
            raise InvalidArgument("a design needs at least one observation")
        object.__setattr__(self, "counts", dict(sorted(items.items())))

    @property
    def n(self) -> int:
        return sum(self.counts.values())

    @property
    def support(self) -> list:
        return list(self.counts)

    @classmethod
    def from_indices(cls, indices) -> "ExactDesign":
        out: dict = {}
        for i in indices:
            out[int(i)] = out.get(int(i), 0) + 1
        return cls(out)

    @classmethod
    def from_count_vector(cls, vec) -> "ExactDesign":
        vec = np.asarray(vec)
        return cls({int(i): int(vec[i]) for i in np.flatnonzero(vec)})

    def indices(self) -> np.ndarray:
        """Expanded point indices: ascending, replications contiguous."""
        return np.repeat(np.array(list(self.counts), dtype=int),
                         np.array(list(self.counts.values()), dtype=int))

    def count_vector(self, size: int) -> np.ndarray:
        self.validate(size)
        v = np.zeros(size, dtype=int)
        for i, c in self.counts.items():
            v[i] = c
        return v

    def validate(self, size: int) -> None:
        bad = [i for i in self.counts if i >= size]
        if bad:
            raise InvalidArgument(f"design indices {bad} outside a space of {size} points")

    def replicate(self, s: int) -> "ExactDesign":
        return ExactDesign({i: s * c for i, c in self.counts.items()})

    def __add__(self, other: "ExactDesign") -> "ExactDesign":
        merged = dict(self.counts)
        for i, c in other.counts.items():
            merged[i] = merged.get(i, 0) + c
        return ExactDesign(merged)

    def points(self, space: DesignSpace) -> np.ndarray:
        self.validate(len(space))
        return space.points[self.indices()]


def mean_vector(model: RegressionModel, theta, design: ExactDesign, space: DesignSpace) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] != (model.param_dim,):
        raise InvalidArgument(
            f"{model.name} expects {model.param_dim} parameters, got shape {theta.shape}")
    return model.mean(theta, design.points(space))


@dataclass(frozen=True)
class DiscriminationProblem:
    """A pair of rival models with nominal values and unit confidence boxes.

    ``require_discriminable=False`` admits pairs whose nominal mean surfaces
    coincide everywhere on the space (degenerate checks only).
    """

    model0: RegressionModel
    model1: RegressionModel
    space: DesignSpace
    theta0: np.ndarray
    theta1: np.ndarray
    halfwidth0: np.ndarray
    halfwidth1: np.ndarray
    name: str = "custom"
    require_discriminable: bool = True

    def __post_init__(self):
        m = self.model0.param_dim
        if self.model1.param_dim != m:
            raise InvalidArgument("both models must have the same number of parameters")
        for attr in ("theta0", "theta1", "halfwidth0", "halfwidth1"):
            v = np.array(getattr(self, attr), dtype=float).reshape(-1)
            if v.shape != (m,):
                raise InvalidArgument(f"{attr} must have length {m}")
            v.setflags(write=False)
            object.__setattr__(self, attr, v)
        if np.any(self.halfwidth0 <= 0) or np.any(self.halfwidth1 <= 0):
            raise InvalidArgument("confidence half-widths must be positive")
        if not self.model0.contains(self.theta0, strict=True):
            raise InvalidArgument("theta0 must lie strictly inside the parameter box of model0")
        if not self.model1.contains(self.theta1, strict=True):
            raise InvalidArgument("theta1 must lie strictly inside the parameter box of model1")
        diff = self.model0.mean(self.theta0, self.space.points) - \
            self.model1.mean(self.theta1, self.space.points)
        if not np.all(np.isfinite(diff)):
            raise NumericDomainError("model means are not finite on the design space")
        if self.require_discriminable and np.max(np.abs(diff)) <= 0.0:
            raise InvalidArgument("nominal values are not discriminable on the design space")

    @property
    def m(self) -> int:
        return self.model0.param_dim

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.theta0, self.theta1])

    @property
    def halfwidth(self) -> np.ndarray:
        return np.concatenate([self.halfwidth0, self.halfwidth1])

    def swapped(self) -> "DiscriminationProblem":
        return DiscriminationProblem(self.model1, self.model0, self.space, self.theta1,
                                     self.theta0, self.halfwidth1, self.halfwidth0,
                                     name=self.name + "-swapped",
                                     require_discriminable=self.require_discriminable)

    def with_space(self, space: DesignSpace) -> "DiscriminationProblem":
        return DiscriminationProblem(self.model0, self.model1, space, self.theta0, self.theta1,
                                     self.halfwidth0, self.halfwidth1, name=self.name,
                                     require_discriminable=self.require_discriminable)


ENZYME_THETA0 = (7.298, 4.386, 2.582)
ENZYME_SE0 = (0.114, 0.233, 0.145)
ENZYME_THETA1 = (8.696, 8.066, 12.057)
ENZYME_SE1 = (0.222, 0.488, 0.671)
ENZYME_SIGMA = 0.1526


def enzyme_space(steps1: int = 31, steps2: int = 41) -> DesignSpace:
    """Grid over substrate [0, 30] x inhibitor [0, 40]."""
    return DesignSpace.grid(np.linspace(0.0, 30.0, steps1), np.linspace(0.0, 40.0, steps2))


def builtin_pair(name: str, **options) -> DiscriminationProblem:
    """Built-in discrimination problems: ``motivating`` and ``enzyme``.

    ``enzyme`` accepts ``grid=(steps1, steps2)`` to change the discretisation.
    """
    if name == "motivating":
        space = DesignSpace(np.round(np.linspace(1.0, 2.0, 101), 2))
        return DiscriminationProblem(get_model("linear"), get_model("exponential"), space,
                                     [math.e], [1.0], [1.0], [1.0], name="motivating")
    if name == "enzyme":
        steps = options.get("grid", (31, 41))
        return DiscriminationProblem(get_model("competitive"), get_model("noncompetitive"),
                                     enzyme_space(*steps), ENZYME_THETA0, ENZYME_THETA1,
                                     ENZYME_SE0, ENZYME_SE1, name="enzyme")
    raise NotFound(f"unknown built-in problem {name!r}; choose 'motivating' or 'enzyme'")
