"""Two-stage parametric heteroscedastic noise model.

Stage one regresses the targets on a polynomial feature map to get a reward
trend.  Stage two regresses the absolute residuals of that trend with

    sigma_nu(x) = z * exp(beta . rho(x)) + zeta

where zeta is a noise floor.  The second stage is solved in log space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..gp import ObservationSet

log = logging.getLogger(__name__)

RIDGE = 1e-6
# Stage two regresses log-residuals, whose scatter is O(1); a firmer ridge keeps
# the degree-10 fit from chasing it.
NOISE_RIDGE = 1e-3
DEFAULT_DEGREE = 10
ZETA_FRACTION = 0.05
ZETA_MIN = 1e-6


def feature_map(x, degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Bias plus per-dimension monomials x_k^1..x_k^degree, no cross terms.

    Accepts a single point (d,) or a batch (n, d); length is 1 + d * degree.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    powers = X[:, :, None] ** np.arange(1, degree + 1)
    feats = np.hstack([np.ones((X.shape[0], 1)), powers.reshape(X.shape[0], -1)])
    return feats[0] if single else feats


def _ridge(Phi: np.ndarray, t: np.ndarray, penalty: float) -> np.ndarray:
    # Augmented least squares; the bias column is not penalised.
    m = Phi.shape[1]
    P = np.sqrt(penalty) * np.eye(m)[1:]
    A = np.vstack([Phi, P])
    b = np.concatenate([t, np.zeros(m - 1)])
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


@dataclass
class RewardTrendModel:
    alpha: np.ndarray
    degree: int = DEFAULT_DEGREE

    def __call__(self, X) -> np.ndarray:
        return feature_map(X, self.degree) @ self.alpha

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "degree": self.degree}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardTrendModel":
        return cls(np.asarray(d["alpha"], dtype=float), int(d["degree"]))


def fit_reward_trend(
    data: ObservationSet, degree: int = DEFAULT_DEGREE, penalty: float = RIDGE
) -> RewardTrendModel:
    """Ridge regression of the standardised targets on ``feature_map``."""
    if penalty <= 0:
        log.warning("zero ridge penalty requested; using %g", RIDGE)
        penalty = RIDGE
    Phi = feature_map(data.X, degree)
    return RewardTrendModel(_ridge(Phi, data.y, penalty), degree)


@dataclass
class NoiseModel:
    """sigma_nu(x) = z * exp(beta . rho(x)) + zeta, in standardised target units."""

    z: float
    beta: np.ndarray
    zeta: float
    degree: int = DEFAULT_DEGREE
    homoscedastic_fallback: bool = field(default=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.z < 0 or not self.zeta > 0:
            raise ValueError("noise model needs z >= 0 and zeta > 0")

    def std(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.z == 0.0:
            return np.full(X.shape[0], self.zeta)
        return self.z * np.exp(feature_map(X, self.degree) @ self.beta) + self.zeta

    def shape(self, X) -> np.ndarray:
        """exp(beta . rho(x)), the part of the noise std that z scales."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.exp(feature_map(X, self.degree) @ self.beta)

    def with_scale(self, z: float) -> "NoiseModel":
        return NoiseModel(float(z), self.beta.copy(), self.zeta, self.degree, self.homoscedastic_fallback)

    @classmethod
    def constant(cls, std: float, d: int, degree: int = DEFAULT_DEGREE) -> "NoiseModel":
        return cls(0.0, np.zeros(1 + d * degree), float(std), degree)

    def to_dict(self) -> dict:
        return {
            "z": self.z, "beta": self.beta.tolist(), "zeta": self.zeta,
            "degree": self.degree, "homoscedastic_fallback": self.homoscedastic_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(float(d["z"]), np.asarray(d["beta"], dtype=float), float(d["zeta"]),
                   int(d["degree"]), bool(d.get("homoscedastic_fallback", False)))


def fit_noise_model(
    data: ObservationSet, trend: RewardTrendModel, degree: int | None = None,
    penalty: float = NOISE_RIDGE,
) -> NoiseModel:
    """Fit the noise model to the absolute residuals of ``trend``.

    zeta = max(1e-6, 0.05 * median residual); then
    log(max(r - zeta, zeta)) = log z + beta . rho(x) by ridge least squares,
    the bias coefficient becoming log z.  Residuals below the floor are
    clipped to it so that near-zero residuals do not become huge negative
    outliers in log space.  With fewer than m + 1 points the model degrades
    to a constant std(r).
    """
    degree = trend.degree if degree is None else degree
    Phi = feature_map(data.X, degree)
    r = np.abs(data.y - trend(data.X))
    zeta = max(ZETA_MIN, ZETA_FRACTION * float(np.median(r)))
    if data.n < Phi.shape[1] + 1:
        log.warning("only %d points for %d noise features; homoscedastic fallback", data.n, Phi.shape[1])
        nm = NoiseModel.constant(max(float(np.std(r)), zeta), data.dim, degree)
        nm.homoscedastic_fallback = True
        return nm
    t = np.log(np.maximum(r - zeta, zeta))
    coef = _ridge(Phi, t, penalty)
    z = float(np.exp(coef[0]))
    beta = coef.copy()
    beta[0] = 0.0
    return NoiseModel(z, beta, zeta, degree)
