"""GP surrogate construction for the homoscedastic and heteroscedastic BO variants.

Both variants build the same :class:`~hetmpc.gp.GPModel`; they differ only
in the noise-std function feeding the covariance diagonal.  The
homoscedastic one is a :class:`NoiseModel` with ``z = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gp import GPModel, KernelParams, ObservationSet, fit_kernel
from .noise import NoiseModel, RewardTrendModel, fit_noise_model, fit_reward_trend

HETERO = "hetero-bo"
HOMO = "homo-bo"
# MLE search range for the heteroscedastic scale z, relative to its two-stage estimate.
Z_RANGE = 1e2


@dataclass
class Surrogate:
    kind: str
    kernel_params: KernelParams
    noise: NoiseModel
    trend: RewardTrendModel | None = None
    lml: float = float("nan")
    degraded: bool = False

    def model(self) -> GPModel:
        return GPModel(self.kernel_params, self.noise.std)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "kernel": self.kernel_params.to_dict(),
            "noise": self.noise.to_dict(),
            "trend": None if self.trend is None else self.trend.to_dict(),
            "lml": self.lml,
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Surrogate":
        return cls(
            d["kind"], KernelParams.from_dict(d["kernel"]), NoiseModel.from_dict(d["noise"]),
            None if d.get("trend") is None else RewardTrendModel.from_dict(d["trend"]),
            float(d.get("lml", float("nan"))), bool(d.get("degraded", False)),
        )


def fit_surrogate(
    data: ObservationSet,
    kind: str,
    degree: int = 10,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    maxiter: int = 200,
) -> Surrogate:
    """Fit kernel and noise hyper-parameters on ``data`` by maximum likelihood.

    Homoscedastic: (noise std, signal std, lengthscales).  Heteroscedastic:
    trend and noise shape by the two-stage regression, then (z, signal std,
    lengthscales) by MLE with the shape and floor held fixed.
    """
    if kind == HOMO:
        fit = fit_kernel(data, None, restarts=restarts, rng=rng, maxiter=maxiter)
        noise = NoiseModel.constant(fit.noise_scale, data.dim, degree)
        return Surrogate(HOMO, fit.params, noise, None, fit.lml, fit.degraded)
    if kind != HETERO:
        raise ValueError(f"unknown surrogate kind {kind!r}")

    trend = fit_reward_trend(data, degree)
    noise = fit_noise_model(data, trend, degree)
    if noise.homoscedastic_fallback:
        zeta = noise.zeta

        def var_fn(s):
            return np.full(data.n, s * s)

        fit = fit_kernel(data, var_fn, noise_bounds=(zeta * 1e-2, zeta * 1e2),
                         restarts=restarts, rng=rng, maxiter=maxiter, init_noise=zeta)
        noise = NoiseModel.constant(fit.noise_scale, data.dim, degree)
        noise.homoscedastic_fallback = True
        return Surrogate(HETERO, fit.params, noise, trend, fit.lml, fit.degraded)

    shape = noise.shape(data.X)
    zeta = noise.zeta

    def var_fn(z):
        return (z * shape + zeta) ** 2

    fit = fit_kernel(data, var_fn, noise_bounds=(noise.z / Z_RANGE, noise.z * Z_RANGE),
                     restarts=restarts, rng=rng, maxiter=maxiter, init_noise=noise.z)
    return Surrogate(HETERO, fit.params, noise.with_scale(fit.noise_scale), trend, fit.lml, fit.degraded)
