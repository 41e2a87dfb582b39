from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from ..gp import GPModel, ObservationSet, Posterior
from .space import SearchSpace


def ucb(post: Posterior, delta: float) -> float:
    """Upper confidence bound: mean + delta * posterior std."""
    return post.mean + delta * math.sqrt(max(post.variance, 0.0))


def _ucb_batch(model: GPModel, U: np.ndarray, delta: float) -> np.ndarray:
    mean, var = model.predict(U)
    return mean + delta * np.sqrt(var)


def maximize_acquisition(
    model: GPModel,
    data: ObservationSet,
    space: SearchSpace,
    delta: float = 2.0,
    restarts: int = 20,
    rng: np.random.Generator | None = None,
    maxiter: int = 200,
) -> np.ndarray:
    """Argmax of UCB over the normalised unit box.

    L-BFGS-B ascent from ``restarts`` uniform starts plus the best observed
    point.  Returns a normalised point; ties go to the first start that found
    the value.
    """
    rng = np.random.default_rng() if rng is None else rng
    d = space.d
    starts = [data.X[int(np.argmax(data.raw_y))]] if data.n else []
    starts += list(rng.random((restarts, d)))

    def neg(u):
        return -float(_ucb_batch(model, u[None, :], delta)[0])

    best_u, best_val = None, -math.inf
    bounds = [(0.0, 1.0)] * d
    for u0 in starts:
        u0 = np.clip(u0, 0.0, 1.0)
        start_val = -neg(u0)
        cand, val = u0, start_val
        try:
            res = minimize(neg, u0, method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter})
            if np.all(np.isfinite(res.x)) and -res.fun > start_val:
                cand, val = np.clip(res.x, 0.0, 1.0), -float(res.fun)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            pass
        if val > best_val:
            best_u, best_val = cand, val
    return np.asarray(best_u, dtype=float)
