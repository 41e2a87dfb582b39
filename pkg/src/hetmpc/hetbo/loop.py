"""Sequential Bayesian optimisation of a noisy black-box reward."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ..gp import ObservationSet
from .acquisition import maximize_acquisition
from .baselines import cma_es, random_search
from .evaluate import Evaluator, Objective, make_streams
from .space import SearchSpace
from .surrogate import HETERO, Surrogate, fit_surrogate
from .trace import METHODS, TraceRow, TuningTrace


@dataclass
class BOSettings:
    batch: int = 150
    delta: float = 2.0
    degree: int = 10
    mle_restarts: int = 10
    acq_restarts: int = 20
    refit_every: int = 0  # 0 = hyper-parameters fixed after the initial design
    maxiter: int = 200

    def to_dict(self) -> dict:
        return asdict(self)


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n stratified points in [0, 1]^d, one per row/column stratum in every dimension."""
    u = (rng.random((n, d)) + np.arange(n)[:, None]) / n
    for k in range(d):
        u[:, k] = u[rng.permutation(n), k]
    return u


def tune(
    objective: Objective,
    space: SearchSpace,
    budget: int,
    method: str = HETERO,
    settings: BOSettings | None = None,
    rng: np.random.Generator | int | None = None,
    surrogate: Surrogate | None = None,
    callback: Callable[[TraceRow], None] | None = None,
) -> TuningTrace:
    """Maximise ``objective(x, rng)`` over ``space``.

    The BO methods evaluate a Latin-hypercube design of ``settings.batch``
    points, fit the surrogate hyper-parameters once on it (unless
    ``surrogate`` is given), then run ``budget`` UCB iterations.  The
    baselines get the same total number of evaluations, the first
    ``settings.batch`` of which are labelled as the initial phase.
    """
    settings = settings or BOSettings()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if budget < 0 or settings.batch < 1:
        raise ValueError("budget must be >= 0 and batch >= 1")
    streams = make_streams(rng)
    if method == "cma-es":
        return cma_es(objective, space, settings.batch + budget, streams, n_init=settings.batch,
                      callback=callback)
    if method == "random":
        return random_search(objective, space, settings.batch + budget, streams,
                             n_init=settings.batch, callback=callback)

    trace = TuningTrace(method, space.names)
    evaluate = Evaluator(objective, space, trace, streams["objective"], callback)
    U0 = latin_hypercube(settings.batch, space.d, np.random.default_rng(streams["design"]))
    for u in U0:
        evaluate(u, "init", 0)
    data = ObservationSet.from_arrays(U0, trace.rewards)
    trace.start_index = int(np.argmin(trace.rewards))

    fit_rng = np.random.default_rng(streams["fit"])
    acq_rng = np.random.default_rng(streams["acq"])
    if surrogate is None:
        surrogate = fit_surrogate(data, method, settings.degree, settings.mle_restarts,
                                  fit_rng, settings.maxiter)
    model = surrogate.model().condition(data)
    trace.info["fits"] = [{"iteration": 0, "y_mean": data.y_mean, "y_std": data.y_std,
                           **surrogate.to_dict()}]

    for it in range(1, budget + 1):
        u = maximize_acquisition(model, data, space, settings.delta, settings.acq_restarts,
                                 acq_rng, settings.maxiter)
        y = evaluate(u, "iter", it)
        data.add(u, y)
        if settings.refit_every and it % settings.refit_every == 0:
            data.restandardize()
            surrogate = fit_surrogate(data, method, settings.degree, settings.mle_restarts,
                                      fit_rng, settings.maxiter)
            model = surrogate.model()
            trace.info["fits"].append({"iteration": it, "y_mean": data.y_mean,
                                       "y_std": data.y_std, **surrogate.to_dict()})
        model.condition(data)
    return trace
