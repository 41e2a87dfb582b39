"""Non-BO baselines: CMA-ES and uniform random search."""

from __future__ import annotations

import logging
import math

import numpy as np

from .evaluate import Evaluator, make_streams
from .space import SearchSpace
from .trace import TuningTrace

log = logging.getLogger(__name__)

MAX_RESAMPLE = 100


def _setup(objective, space, rng, method, callback):
    streams = rng if isinstance(rng, dict) else make_streams(rng)
    trace = TuningTrace(method, space.names)
    evaluate = Evaluator(objective, space, trace, streams["objective"], callback)
    return trace, evaluate, np.random.default_rng(streams["design"])


def _phase(i: int, n_init: int) -> tuple[str, int]:
    return ("init", 0) if i < n_init else ("iter", i - n_init + 1)


def random_search(objective, space: SearchSpace, budget: int, rng=None, n_init: int = 0,
                  callback=None) -> TuningTrace:
    """``budget`` uniform samples in the box."""
    trace, evaluate, gen = _setup(objective, space, rng, "random", callback)
    for i in range(budget):
        evaluate(gen.random(space.d), *_phase(i, n_init))
    if n_init:
        trace.start_index = int(np.argmin(trace.rewards[:n_init]))
    return trace


def population_size(d: int) -> int:
    return 4 + int(math.floor(3 * math.log(d)))


def cma_es(objective, space: SearchSpace, budget: int, rng=None, n_init: int = 0,
           sigma0: float = 0.3, callback=None) -> TuningTrace:
    """(mu_w, lambda)-CMA-ES maximising the objective, run in the normalised box.

    Starts at the box centre with step size ``sigma0`` (fraction of each
    range).  Out-of-box samples are redrawn.  A generation cut short by the
    budget is evaluated but not used for an update.
    """
    trace, evaluate, gen = _setup(objective, space, rng, "cma-es", callback)
    d = space.d
    lam = population_size(d)
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / float(w @ w)
    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    cs = (mueff + 2) / (d + mueff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + cs
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))

    def fresh(center):
        return np.array(center, dtype=float), sigma0, np.eye(d), np.zeros(d), np.zeros(d)

    mean, sigma, C, pc, ps = fresh(np.full(d, 0.5))
    best_u, best_y = mean.copy(), -math.inf
    n_eval, generation = 0, 0
    trace.info["restarts"] = 0
    while n_eval < budget:
        evals, vecs = np.linalg.eigh(C)
        D = np.sqrt(np.maximum(evals, 1e-300))
        B = vecs
        cand = np.empty((lam, d))
        for k in range(lam):
            for _ in range(MAX_RESAMPLE):
                u = mean + sigma * (B @ (D * gen.standard_normal(d)))
                if np.all((u >= 0) & (u <= 1)):
                    break
            cand[k] = np.clip(u, 0.0, 1.0)
        n_now = min(lam, budget - n_eval)
        fit = np.empty(n_now)
        for k in range(n_now):
            fit[k] = evaluate(cand[k], *_phase(n_eval, n_init))
            n_eval += 1
            if fit[k] > best_y:
                best_y, best_u = fit[k], cand[k].copy()
        if n_now < lam:
            break
        generation += 1
        order = np.argsort(-fit, kind="stable")[:mu]
        old = mean
        mean = w @ cand[order]
        y_w = (mean - old) / sigma
        invsqrt = B @ np.diag(1 / D) @ B.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (invsqrt @ y_w)
        hsig = float(np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * generation)) / chi_n
                     < 1.4 + 2 / (d + 1))
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_w
        ar = (cand[order] - old) / sigma
        C = ((1 - c1 - cmu) * C + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
             + cmu * (ar.T * w) @ ar)
        C = np.triu(C) + np.triu(C, 1).T
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))
        ev = np.linalg.eigvalsh(C)
        degenerate = (
            not np.all(np.isfinite(C)) or not math.isfinite(sigma) or ev.min() <= 0
            or ev.max() / ev.min() > 1e14 or sigma * math.sqrt(ev.max()) < 1e-12
        )
        if degenerate:
            log.info("CMA-ES covariance degenerate at generation %d; restarting", generation)
            trace.info["restarts"] += 1
            mean, sigma, C, pc, ps = fresh(best_u)
            generation = 0
    if n_init:
        trace.start_index = int(np.argmin(trace.rewards[:n_init]))
    return trace
