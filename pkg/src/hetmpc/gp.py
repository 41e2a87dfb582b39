"""Gaussian-process regression with input-dependent diagonal observation noise.

Targets are standardised and the prior mean is zero.  The kernel is the
squared exponential with one lengthscale per input dimension::

    k(x, x') = s2 * exp(-0.5 * sum_d ((x_d - x'_d) / l_d)^2)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
DUPLICATE_TOL = 1e-10
LOG2PI = math.log(2.0 * math.pi)

# Box bounds on the natural scale for MLE (inputs in [0, 1], targets standardised).
LENGTHSCALE_BOUNDS = (1e-2, 10.0)
SIGNAL_STD_BOUNDS = (1e-2, 10.0)
NOISE_STD_BOUNDS = (1e-4, 10.0)


class IllConditionedError(np.linalg.LinAlgError):
    """Covariance could not be factorised even with the largest jitter."""


@dataclass(frozen=True)
class KernelParams:
    signal_var: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if not self.signal_var > 0 or not np.all(ls > 0):
            raise ValueError("kernel parameters must be strictly positive")

    def to_dict(self) -> dict:
        return {"signal_var": self.signal_var, "lengthscales": self.lengthscales.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(float(d["signal_var"]), np.asarray(d["lengthscales"], dtype=float))

    def __eq__(self, other):
        return (
            isinstance(other, KernelParams)
            and self.signal_var == other.signal_var
            and np.array_equal(self.lengthscales, other.lengthscales)
        )


def kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float)) / params.lengthscales
    B = np.atleast_2d(np.asarray(B, dtype=float)) / params.lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return params.signal_var * np.exp(-0.5 * np.maximum(sq, 0.0))


def kernel(x, x2, params: KernelParams) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError("points must have the same dimension")
    r = (x - x2) / params.lengthscales
    return float(params.signal_var * math.exp(-0.5 * float(r @ r)))


def cholesky_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K, adding diagonal jitter 0, 1e-10, 1e-9, ... 1e-4 as needed."""
    jitter = 0.0
    eye = np.eye(K.shape[0])
    while True:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise IllConditionedError("covariance is not positive definite after jitter 1e-4") from None


@dataclass
class ObservationSet:
    """Evaluated points (normalised to the unit box) and raw rewards.

    ``y`` is the standardised view using the stored ``y_mean``/``y_std``,
    which only change when :meth:`restandardize` is called.
    """

    X: np.ndarray
    raw_y: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        raw = np.asarray(self.raw_y, dtype=float).ravel()
        self.X = np.empty((0, X.shape[1]))
        self.raw_y = np.empty(0)
        for x, y in zip(X, raw):
            self.add(x, y)

    @classmethod
    def from_arrays(cls, X, raw_y, standardize: bool = True) -> "ObservationSet":
        data = cls(X, raw_y)
        if standardize:
            data.restandardize()
        return data

    @property
    def n(self) -> int:
        return self.raw_y.size

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def y(self) -> np.ndarray:
        return (self.raw_y - self.y_mean) / self.y_std

    def restandardize(self) -> None:
        self.y_mean = float(self.raw_y.mean()) if self.n else 0.0
        std = float(self.raw_y.std()) if self.n > 1 else 0.0
        self.y_std = std if std > 0 else 1.0

    def add(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float).copy()
        if self.n:
            k = 0
            while np.min(np.linalg.norm(self.X - x, axis=1)) < DUPLICATE_TOL:
                # deterministic nudge along the first coordinate, staying in the box
                k += 1
                step = 1e-9 * k
                x[0] = x[0] + step if x[0] + step <= 1.0 else x[0] - step
        self.X = np.vstack([self.X, x])
        self.raw_y = np.append(self.raw_y, float(y))

    def to_raw(self, values) -> np.ndarray:
        return np.asarray(values) * self.y_std + self.y_mean


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float


@dataclass
class GPModel:
    """Fitted kernel plus a noise-std function, conditioned on an ObservationSet.

    ``noise_std`` maps an (n, d) array of normalised inputs to per-point
    observation-noise standard deviations (standardised target units).
    """

    kernel_params: KernelParams
    noise_std: Callable[[np.ndarray], np.ndarray]
    _X: np.ndarray = field(init=False, repr=False, default=None)
    _L: np.ndarray = field(init=False, repr=False, default=None)
    _alpha: np.ndarray = field(init=False, repr=False, default=None)
    jitter: float = field(init=False, default=0.0)

    def condition(self, data: ObservationSet) -> "GPModel":
        if data.n < 1:
            raise ValueError("cannot condition on an empty ObservationSet")
        noise_var = np.asarray(self.noise_std(data.X), dtype=float) ** 2
        K = kernel_matrix(data.X, data.X, self.kernel_params) + np.diag(noise_var)
        self._L, self.jitter = cholesky_jitter(K)
        self._alpha = cho_solve((self._L, True), data.y)
        self._X = data.X.copy()
        return self

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent-function variance at each row of ``Xq``."""
        if self._L is None:
            raise RuntimeError("model has not been conditioned on data")
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        Ks = kernel_matrix(Xq, self._X, self.kernel_params)
        mean = Ks @ self._alpha
        v = solve_triangular(self._L, Ks.T, lower=True)
        var = self.kernel_params.signal_var - (v * v).sum(0)
        return mean, np.maximum(var, 0.0)


def posterior(model: GPModel, data: ObservationSet, x) -> Posterior:
    """Posterior at a single point; conditions ``model`` on ``data`` if needed."""
    if model._X is None or model._X.shape != data.X.shape or not np.array_equal(model._X, data.X):
        model.condition(data)
    m, v = model.predict(np.atleast_2d(x))
    return Posterior(float(m[0]), float(v[0]))


def log_marginal_likelihood(params: KernelParams, noise_diag, data: ObservationSet) -> float:
    """log N(y | 0, K + diag(noise_diag)) on the standardised targets."""
    if data.n < 1:
        raise ValueError("empty ObservationSet")
    noise_diag = np.asarray(noise_diag, dtype=float)
    if np.any(noise_diag < 0):
        raise ValueError("noise variances must be >= 0")
    K = kernel_matrix(data.X, data.X, params) + np.diag(noise_diag)
    L, _ = cholesky_jitter(K)
    y = data.y
    a = solve_triangular(L, y, lower=True)
    return float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * data.n * LOG2PI)


@dataclass
class KernelFit:
    params: KernelParams
    noise_scale: float  # homoscedastic noise std, or the heteroscedastic scale z
    lml: float
    degraded: bool = False


def _median_lengthscale(X: np.ndarray) -> float:
    if X.shape[0] < 2:
        return 0.5
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    med = float(np.median(d[np.triu_indices(X.shape[0], 1)]))
    return med if med > 0 else 0.5


def fit_kernel(
    data: ObservationSet,
    noise_var_fn: Callable[[float], np.ndarray] | None = None,
    noise_bounds: tuple[float, float] = NOISE_STD_BOUNDS,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    maxiter: int = 200,
    init_noise: float | None = None,
) -> KernelFit:
    """Maximise the log marginal likelihood over signal std, lengthscales and one noise scale.

    With ``noise_var_fn=None`` the noise scale is a homoscedastic noise std.
    Otherwise ``noise_var_fn(scale)`` returns the noise-variance diagonal for
    the training inputs (e.g. the heteroscedastic scale z).  Parameters are
    searched in log space by L-BFGS-B with finite-difference gradients from
    ``restarts`` starts; the first start is a data-driven default.
    """
    rng = np.random.default_rng() if rng is None else rng
    d = data.dim
    if noise_var_fn is None:
        n = data.n
        noise_var_fn = lambda s: np.full(n, s * s)  # noqa: E731

    bounds = np.log(
        np.array([SIGNAL_STD_BOUNDS, *([LENGTHSCALE_BOUNDS] * d), noise_bounds], dtype=float)
    )

    def unpack(theta):
        sig, ls, noise = np.exp(theta[0]), np.exp(theta[1 : 1 + d]), np.exp(theta[-1])
        return KernelParams(sig * sig, ls), noise

    def nlml(theta):
        params, noise = unpack(theta)
        try:
            val = -log_marginal_likelihood(params, noise_var_fn(noise), data)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            return 1e25
        return val if math.isfinite(val) else 1e25

    ls0 = float(np.clip(_median_lengthscale(data.X), *LENGTHSCALE_BOUNDS))
    if init_noise is None:
        init_noise = float(np.clip(0.3, *noise_bounds))
    default = np.log(np.array([1.0, *([ls0] * d), np.clip(init_noise, *noise_bounds)]))
    starts = [np.clip(default, bounds[:, 0], bounds[:, 1])]
    for _ in range(max(restarts, 1) - 1):
        starts.append(rng.uniform(bounds[:, 0], bounds[:, 1]))

    best = None
    for theta0 in starts:
        try:
            res = minimize(
                nlml, theta0, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": maxiter},
            )
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            continue
        if res.fun < 1e25 and (best is None or res.fun < best.fun):
            best = res

    if best is None:
        log.warning("all %d kernel-fit starts failed; using median heuristic", len(starts))
        params = KernelParams(1.0, np.full(d, ls0))
        noise = float(np.exp(default[-1]))
        try:
            lml = log_marginal_likelihood(params, noise_var_fn(noise), data)
        except np.linalg.LinAlgError:
            lml = -math.inf
        return KernelFit(params, noise, lml, degraded=True)
    params, noise = unpack(best.x)
    return KernelFit(params, float(noise), float(-best.fun))
