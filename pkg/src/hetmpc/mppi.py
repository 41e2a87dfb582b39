"""Model predictive path integral control over a randomised internal model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distparams import GammaSpec, sample_matrix
from .env import DynamicsDivergence, Task


class NoValidRollout(FloatingPointError):
    """Every rollout of a planning step diverged."""


@dataclass(frozen=True)
class MppiConfig:
    temperature: float
    noise_std: float
    horizon: int = 20
    rollouts: int = 400

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not self.noise_std > 0:
            raise ValueError(f"noise_std must be > 0, got {self.noise_std}")
        if self.horizon < 1 or self.rollouts < 1:
            raise ValueError("horizon and rollouts must be >= 1")


@dataclass
class RolloutBatch:
    perturbations: np.ndarray  # (M, T)
    costs: np.ndarray  # (M,)
    weights: np.ndarray  # (M,)
    params: np.ndarray  # (M, P) sampled model parameters


def trajectory_cost(states: Sequence, cost_fn: Callable, actions: Sequence | None = None) -> float:
    """Terminal cost of the last state plus running cost of the others.

    ``cost_fn(state, action)`` is used for both; ``actions[i]`` is the action
    that produced ``states[i]`` (zeros when omitted).
    """
    states = [np.asarray(s, dtype=float) for s in states]
    if not states:
        raise ValueError("trajectory has no states")
    if actions is None:
        actions = [0.0] * len(states)
    if any(not np.all(np.isfinite(s)) for s in states):
        raise DynamicsDivergence("trajectory contains non-finite states")
    running = math.fsum(cost_fn(s, a) for s, a in zip(states[:-1], actions[:-1]))
    return cost_fn(states[-1], actions[-1]) + running


def compute_weights(costs, perturbations, plan, config: MppiConfig) -> np.ndarray:
    """Normalised importance weights of the rollouts.

    exponent_j = -(C_j + (lambda / sigma^2) * sum_i a_i * (a_i + eps_ij)) / lambda,
    softmaxed with the max exponent subtracted first.
    """
    costs = np.asarray(costs, dtype=float)
    eps = np.atleast_2d(np.asarray(perturbations, dtype=float))
    plan = np.asarray(plan, dtype=float)
    if eps.shape != (costs.size, plan.size):
        raise ValueError(f"perturbations shape {eps.shape} != ({costs.size}, {plan.size})")
    finite = np.isfinite(costs)
    if not finite.any():
        raise NoValidRollout("all rollout costs are infinite")
    lam = config.temperature
    control = (lam / config.noise_std**2) * ((plan + eps) @ plan)
    exponent = np.full(costs.shape, -np.inf)
    exponent[finite] = -(costs[finite] + control[finite]) / lam
    exponent -= exponent[finite].max()
    w = np.exp(exponent)
    return w / w.sum()


def plan_step(
    plan: np.ndarray,
    state: np.ndarray,
    model_dist: Sequence[GammaSpec],
    config: MppiConfig,
    task: Task,
    rng: np.random.Generator,
    perturbations: np.ndarray | None = None,
) -> tuple[float, np.ndarray, RolloutBatch]:
    """One MPPI iteration from ``state``.

    Returns the clipped action to execute, the updated plan shifted left by one
    step with a zero appended, and the rollout batch.  ``perturbations`` can be
    supplied to bypass sampling of the action noise.
    """
    plan = np.asarray(plan, dtype=float)
    if plan.shape != (config.horizon,):
        raise ValueError(f"plan length {plan.shape} != horizon {config.horizon}")
    if perturbations is None:
        eps = config.noise_std * rng.standard_normal((config.rollouts, config.horizon))
    else:
        eps = np.asarray(perturbations, dtype=float).reshape(config.rollouts, config.horizon)
    params = sample_matrix(model_dist, task.param_names, config.rollouts, rng)
    costs = task.rollout_costs(state, plan + eps, params)
    w = compute_weights(costs, eps, plan, config)
    updated = plan + w @ eps
    action = task.clip(updated[0])
    shifted = np.empty_like(updated)
    shifted[:-1] = updated[1:]
    shifted[-1] = 0.0
    return action, shifted, RolloutBatch(eps, costs, w, params)


@dataclass
class MppiController:
    """Receding-horizon MPPI controller; one instance per episode thread."""

    task: Task
    config: MppiConfig
    plan: np.ndarray = field(init=False)

    def __post_init__(self):
        self.reset()

    def reset(self) -> None:
        self.plan = np.zeros(self.config.horizon)

    def act(self, state, params_dist, rng) -> float:
        action, self.plan, _ = plan_step(self.plan, state, params_dist, self.config, self.task, rng)
        return action


class ZeroController:
    """Applies no actuation; reference policy for sanity checks."""

    def reset(self) -> None:
        pass

    def act(self, state, params_dist, rng) -> float:
        return 0.0
