"""Parameterised pendulum and cartpole dynamics, dense rewards and episode execution.

Both tasks integrate their equations of motion with fixed-step RK4.  The
numerical kernels are compiled with numba so that the MPPI controller can
roll out hundreds of trajectories per control step on a single core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np
from numba import njit

GRAVITY = 9.81
DT = 0.05
# RK4 sub-steps per control interval; keeps undamped energy drift below 1e-6
# over 200 control steps.
SUBSTEPS = 4


class DynamicsDivergence(FloatingPointError):
    """Raised when a state or action stops being finite."""


class EpisodeFailure(RuntimeError):
    """An episode aborted because the true dynamics diverged."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(f"episode diverged at step {step}" + (f": {message}" if message else ""))


@njit(cache=True)
def wrap_angle(theta):
    """Map an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Pendulum: state (theta, omega), theta measured from upright.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pendulum_accel(theta, torque, mass, length):
    return GRAVITY / length * math.sin(theta) + torque / (mass * length * length)


@njit(cache=True)
def _pendulum_rk4(theta, omega, torque, mass, length, dt, substeps):
    h = dt / substeps
    for _ in range(substeps):
        k1t = omega
        k1w = _pendulum_accel(theta, torque, mass, length)
        k2t = omega + 0.5 * h * k1w
        k2w = _pendulum_accel(theta + 0.5 * h * k1t, torque, mass, length)
        k3t = omega + 0.5 * h * k2w
        k3w = _pendulum_accel(theta + 0.5 * h * k2t, torque, mass, length)
        k4t = omega + h * k3w
        k4w = _pendulum_accel(theta + h * k3t, torque, mass, length)
        theta = theta + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        omega = omega + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    return theta, omega


@njit(cache=True)
def _pendulum_reward(theta, omega, torque):
    th = wrap_angle(theta)
    return -(th * th + 0.1 * omega * omega + 0.001 * torque * torque)


@njit(cache=True)
def _pendulum_rollouts(state, actions, params, dt, substeps, bound):
    n_roll, horizon = actions.shape
    costs = np.empty(n_roll)
    for j in range(n_roll):
        theta = state[0]
        omega = state[1]
        mass = params[j, 0]
        length = params[j, 1]
        total = 0.0
        for i in range(horizon):
            a = min(max(actions[j, i], -bound), bound)
            theta, omega = _pendulum_rk4(theta, omega, a, mass, length, dt, substeps)
            total -= _pendulum_reward(theta, omega, a)
        costs[j] = total if math.isfinite(total) else np.inf
    return costs


# ---------------------------------------------------------------------------
# Cartpole: state (x, x_dot, theta, theta_dot), theta measured from upright,
# pole length is the distance from pivot to the pole's centre of mass.
# ---------------------------------------------------------------------------

CART_MASS = 1.0
TRACK_BOUND = 2.4
OFF_TRACK_PENALTY = 100.0


@njit(cache=True)
def _cartpole_accel(theta, theta_dot, force, pole_mass, pole_length):
    total_mass = CART_MASS + pole_mass
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    temp = (force + pole_mass * pole_length * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        pole_length * (4.0 / 3.0 - pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - pole_mass * pole_length * theta_acc * cos_t / total_mass
    return x_acc, theta_acc


@njit(cache=True)
def _cartpole_rk4(x, xd, th, thd, force, pole_mass, pole_length, dt, substeps):
    h = dt / substeps
    for _ in range(substeps):
        a1, b1 = _cartpole_accel(th, thd, force, pole_mass, pole_length)
        x2, xd2, th2, thd2 = x + 0.5 * h * xd, xd + 0.5 * h * a1, th + 0.5 * h * thd, thd + 0.5 * h * b1
        a2, b2 = _cartpole_accel(th2, thd2, force, pole_mass, pole_length)
        x3, xd3, th3, thd3 = x + 0.5 * h * xd2, xd + 0.5 * h * a2, th + 0.5 * h * thd2, thd + 0.5 * h * b2
        a3, b3 = _cartpole_accel(th3, thd3, force, pole_mass, pole_length)
        x4, xd4, th4, thd4 = x + h * xd3, xd + h * a3, th + h * thd3, thd + h * b3
        a4, b4 = _cartpole_accel(th4, thd4, force, pole_mass, pole_length)
        x = x + h / 6.0 * (xd + 2.0 * xd2 + 2.0 * xd3 + xd4)
        th = th + h / 6.0 * (thd + 2.0 * thd2 + 2.0 * thd3 + thd4)
        xd = xd + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        thd = thd + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return x, xd, th, thd


@njit(cache=True)
def _cartpole_reward(x, xd, th, thd, force):
    t = wrap_angle(th)
    r = -(x * x + t * t + 0.01 * xd * xd + 0.01 * thd * thd + 0.001 * force * force)
    if abs(x) > TRACK_BOUND:
        r -= OFF_TRACK_PENALTY
    return r


@njit(cache=True)
def _cartpole_rollouts(state, actions, params, dt, substeps, bound):
    n_roll, horizon = actions.shape
    costs = np.empty(n_roll)
    for j in range(n_roll):
        x, xd, th, thd = state[0], state[1], state[2], state[3]
        pole_mass = params[j, 0]
        pole_length = params[j, 1]
        total = 0.0
        for i in range(horizon):
            f = min(max(actions[j, i], -bound), bound)
            x, xd, th, thd = _cartpole_rk4(x, xd, th, thd, f, pole_mass, pole_length, dt, substeps)
            total -= _cartpole_reward(x, xd, th, thd, f)
        costs[j] = total if math.isfinite(total) else np.inf
    return costs


# ---------------------------------------------------------------------------
# Task objects
# ---------------------------------------------------------------------------


def _check_finite(state, action) -> None:
    if not (np.all(np.isfinite(state)) and math.isfinite(action)):
        raise DynamicsDivergence(f"non-finite input: state={state!r}, action={action!r}")


@dataclass(frozen=True)
class Task:
    """Common surface of a simulated control task."""

    name: str = ""
    state_dim: int = 0
    param_names: tuple[str, ...] = ()
    action_bound: float = 1.0
    dt: float = DT
    substeps: int = SUBSTEPS
    true_params: Mapping[str, float] = field(default_factory=dict)

    def param_vector(self, params: Mapping[str, float]) -> np.ndarray:
        """Order a name->value mapping by ``param_names`` and validate positivity."""
        try:
            vec = np.array([float(params[n]) for n in self.param_names])
        except KeyError as exc:
            raise ValueError(f"{self.name}: missing physical parameter {exc.args[0]!r}") from None
        if not np.all(vec > 0) or not np.all(np.isfinite(vec)):
            raise ValueError(f"{self.name}: physical parameters must be positive, got {dict(params)}")
        return vec

    def clip(self, action: float) -> float:
        return min(max(float(action), -self.action_bound), self.action_bound)

    def step(self, state, action, params) -> np.ndarray:
        raise NotImplementedError

    def reward(self, state, action) -> float:
        raise NotImplementedError

    def rollout_costs(self, state, actions, params) -> np.ndarray:
        """Cost of each action sequence in ``actions`` (M x T) under per-row ``params`` (M x P).

        Actions are clipped to the actuator bound.  The cost of a sequence is
        the summed negative reward of the visited states, terminal state
        included; a rollout that diverges costs ``inf``.
        """
        raise NotImplementedError

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def observe(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float)


@dataclass(frozen=True)
class Pendulum(Task):
    name: str = "pendulum"
    state_dim: int = 2
    param_names: tuple[str, ...] = ("mass", "length")
    action_bound: float = 2.0
    true_params: Mapping[str, float] = field(default_factory=lambda: {"mass": 1.0, "length": 1.0})

    def step(self, state, action, params) -> np.ndarray:
        p = self.param_vector(params)
        _check_finite(state, action)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        a = self.clip(action)
        th, om = _pendulum_rk4(float(state[0]), float(state[1]), a, p[0], p[1], self.dt, self.substeps)
        return np.array([th, om])

    def reward(self, state, action) -> float:
        return float(_pendulum_reward(float(state[0]), float(state[1]), float(action)))

    def rollout_costs(self, state, actions, params) -> np.ndarray:
        return _pendulum_rollouts(
            np.asarray(state, dtype=float), np.ascontiguousarray(actions, dtype=float),
            np.ascontiguousarray(params, dtype=float), self.dt, self.substeps, self.action_bound,
        )

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([math.pi, 0.0])

    def observe(self, state) -> np.ndarray:
        return np.array([wrap_angle(float(state[0])), float(state[1])])

    def energy(self, state, params) -> float:
        """Total mechanical energy with the pivot as the height reference."""
        m, l = self.param_vector(params)
        return 0.5 * m * l * l * state[1] ** 2 + m * GRAVITY * l * math.cos(state[0])


@dataclass(frozen=True)
class CartPole(Task):
    name: str = "cartpole"
    state_dim: int = 4
    param_names: tuple[str, ...] = ("mass", "length")
    action_bound: float = 10.0
    true_params: Mapping[str, float] = field(default_factory=lambda: {"mass": 1.0, "length": 1.0})

    def step(self, state, action, params) -> np.ndarray:
        p = self.param_vector(params)
        _check_finite(state, action)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        f = self.clip(action)
        s = [float(v) for v in state]
        return np.array(_cartpole_rk4(s[0], s[1], s[2], s[3], f, p[0], p[1], self.dt, self.substeps))

    def reward(self, state, action) -> float:
        s = [float(v) for v in state]
        return float(_cartpole_reward(s[0], s[1], s[2], s[3], float(action)))

    def rollout_costs(self, state, actions, params) -> np.ndarray:
        return _cartpole_rollouts(
            np.asarray(state, dtype=float), np.ascontiguousarray(actions, dtype=float),
            np.ascontiguousarray(params, dtype=float), self.dt, self.substeps, self.action_bound,
        )

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-0.05, 0.05, size=4)


TASKS = {"pendulum": Pendulum, "cartpole": CartPole}


def make_task(name: str) -> Task:
    try:
        return TASKS[name]()
    except KeyError:
        raise ValueError(f"unknown task {name!r}; expected one of {sorted(TASKS)}") from None


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------


class Controller(Protocol):
    def reset(self) -> None: ...

    def act(self, state: np.ndarray, params_dist: Sequence, rng: np.random.Generator) -> float: ...


@dataclass
class EpisodeResult:
    cumulative_reward: float
    per_step_rewards: np.ndarray
    final_state: np.ndarray
    seed: int


def run_episode(
    task: Task,
    controller: Controller,
    params_dist: Sequence,
    true_params: Mapping[str, float] | None = None,
    n_s: int = 200,
    seed: int = 0,
) -> EpisodeResult:
    """Run ``n_s`` closed-loop steps of ``controller`` on the true dynamics.

    The controller plans against its randomised internal model built from
    ``params_dist``; only the executed action touches ``true_params``.
    The reward of step t is evaluated at the pre-transition state with the
    executed action.
    """
    if n_s < 1:
        raise ValueError("n_s must be at least 1")
    true_params = task.true_params if true_params is None else true_params
    rng = np.random.default_rng(seed)
    controller.reset()
    state = task.initial_state(rng)
    rewards = np.empty(n_s)
    for t in range(n_s):
        obs = task.observe(state)
        try:
            action = task.clip(controller.act(obs, params_dist, rng))
            rewards[t] = task.reward(obs, action)
            state = task.step(obs, action, true_params)
        except DynamicsDivergence as exc:
            raise EpisodeFailure(t, str(exc)) from exc
        if not np.all(np.isfinite(state)):
            raise EpisodeFailure(t, "true dynamics produced a non-finite state")
    return EpisodeResult(
        cumulative_reward=float(math.fsum(rewards)),
        per_step_rewards=rewards,
        final_state=task.observe(state),
        seed=seed,
    )
