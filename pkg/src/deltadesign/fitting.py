"""Box-constrained nonlinear least squares, vectorised over many datasets.

A damped Gauss-Newton (Levenberg-Marquardt) iteration runs on a whole stack
of problems at once; each has its own damping factor and convergence flag.
Coordinates sitting on a bound with the gradient pushing outwards are frozen
for the step, and trial points are clamped into the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitFailure, InvalidArgument
from .models import RegressionModel


@dataclass(frozen=True)
class FitConfig:
    multistart: int = 5
    max_iter: int = 200
    gtol: float = 1e-8
    lam0: float = 1e-3
    start_radius: float = 5.0

    def __post_init__(self):
        if self.multistart < 1 or self.max_iter < 1:
            raise InvalidArgument("multistart and max_iter must be positive")


def _evaluate(model, theta, X, Y):
    with np.errstate(all="ignore"):
        try:
            resid = model.mean(theta, X) - Y
        except FloatingPointError:
            resid = np.full(Y.shape, np.inf)
        sse = np.sum(resid**2, axis=-1)
    sse[~np.isfinite(sse)] = np.inf
    return resid, sse


def levenberg_marquardt(model: RegressionModel, X, Y, theta0, config: FitConfig = FitConfig()):
    """Fit every row of ``Y`` from the matching row of ``theta0``.

    Returns ``(theta, sse, converged)`` with leading dimension ``P``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    lo, hi = model.lower, model.upper
    theta = np.clip(np.array(theta0, dtype=float, copy=True), lo, hi)
    P, m = theta.shape
    if Y.shape[0] != P:
        raise InvalidArgument("one starting point per dataset is required")
    lam = np.full(P, config.lam0)
    resid, sse = _evaluate(model, theta, X, Y)
    converged = np.zeros(P, dtype=bool)
    done = ~np.isfinite(sse)
    eye = np.eye(m)
    for _ in range(config.max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        th, r = theta[act], resid[act]
        with np.errstate(all="ignore"):
            J = model.gradient(th, X)
        g = np.einsum("pnm,pn->pm", J, r)
        frozen = ((th <= lo) & (g > 0)) | ((th >= hi) & (g < 0))
        pg = np.where(frozen, 0.0, g)
        ok = np.max(np.abs(pg), axis=1) < config.gtol * (1.0 + sse[act])
        converged[act[ok]] = True
        done[act[ok]] = True
        keep = ~ok & np.all(np.isfinite(J), axis=(1, 2))
        done[act[~ok & ~keep]] = True
        act, J, pg, frozen, th = act[keep], J[keep], pg[keep], frozen[keep], th[keep]
        if act.size == 0:
            continue
        H = np.einsum("pni,pnj->pij", J, J)
        diag = np.einsum("pii->pi", H)
        floor = 1e-12 * np.max(diag, axis=1, keepdims=True) + 1e-300
        D = np.maximum(diag, floor)
        A = H + (lam[act][:, None] * D)[:, :, None] * eye
        # frozen coordinates get an identity row/column and a zero step
        fz = frozen[:, :, None] | frozen[:, None, :]
        A = np.where(fz, 0.0, A) + frozen[:, :, None] * eye
        try:
            step = -np.linalg.solve(A, pg[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = -np.einsum("pij,pj->pi", np.linalg.pinv(A), pg)
        trial = np.clip(th + step, lo, hi)
        t_resid, t_sse = _evaluate(model, trial, X, Y[act])
        better = t_sse < sse[act]
        acc = act[better]
        theta[acc] = trial[better]
        resid[acc] = t_resid[better]
        sse[acc] = t_sse[better]
        lam[acc] = np.maximum(lam[acc] / 10.0, 1e-15)
        rej = act[~better]
        lam[rej] *= 10.0
        # no descent even under huge damping: numerically stationary
        stalled = rej[lam[rej] > 1e16]
        converged[stalled] = True
        done[stalled] = True
    return theta, sse, converged


def start_points(center, halfwidth, model: RegressionModel, config: FitConfig, uniforms):
    """Multistart points: the center, then uniform draws in the dilated box.

    ``uniforms`` has shape ``(..., multistart - 1, m)`` with entries in [0, 1).
    """
    center = np.asarray(center, dtype=float)
    span = config.start_radius * np.asarray(halfwidth, dtype=float)
    draws = center + span * (2.0 * np.asarray(uniforms) - 1.0)
    lead = np.broadcast_to(center, draws.shape[:-2] + (1, center.size))
    pts = np.concatenate([lead, draws], axis=-2)
    return np.clip(pts, model.lower, model.upper)


def fit_batch(model: RegressionModel, X, Y, starts, config: FitConfig = FitConfig()):
    """Best-of-multistart fits for a stack of datasets.

    ``Y`` is ``(B, n)`` and ``starts`` ``(B, S, m)``.  Returns
    ``(theta_hat, sse, ok)``; ``ok`` is False where no start converged.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    starts = np.asarray(starts, dtype=float)
    B, S, m = starts.shape
    theta, sse, conv = levenberg_marquardt(model, X, np.repeat(Y, S, axis=0),
                                           starts.reshape(B * S, m), config)
    theta, sse, conv = theta.reshape(B, S, m), sse.reshape(B, S), conv.reshape(B, S)
    masked = np.where(conv, sse, np.inf)
    best = np.argmin(masked, axis=1)
    rows = np.arange(B)
    return theta[rows, best], masked[rows, best], conv.any(axis=1)


def fit_mle(model: RegressionModel, X, y, start, halfwidth=None,
            config: FitConfig = FitConfig(), rng: np.random.Generator | None = None):
    """Least-squares (normal-error ML) fit of a single dataset.

    Starts at ``start`` plus ``multistart - 1`` uniform draws in
    ``start +- start_radius * halfwidth``.  Returns ``(theta_hat, sse)``.
    """
    start = np.asarray(start, dtype=float)
    halfwidth = np.ones_like(start) if halfwidth is None else halfwidth
    rng = rng if rng is not None else np.random.default_rng(0)
    u = rng.random((config.multistart - 1, start.size))
    starts = start_points(start, halfwidth, model, config, u)[None]
    theta, sse, ok = fit_batch(model, X, np.asarray(y, dtype=float)[None], starts, config)
    if not ok[0]:
        raise FitFailure("no multistart run converged", {"sse": float(sse[0])})
    return theta[0], float(sse[0])
