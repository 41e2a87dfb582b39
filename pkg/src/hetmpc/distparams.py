"""Gamma-distributed dynamics parameters in (mean, std) form."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-5


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class GammaSpec:
    """Distribution of one physical parameter, parameterised by its mean and std."""

    name: str
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise InvalidSpecError(f"{self.name}: mean must be finite and > 0, got {self.mu}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidSpecError(f"{self.name}: std must be finite and > 0, got {self.sigma}")

    def to_dict(self) -> dict:
        return {"name": self.name, "mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaSpec":
        return cls(name=str(d["name"]), mu=float(d["mu"]), sigma=float(d["sigma"]))


def to_shape_rate(spec: GammaSpec) -> tuple[float, float]:
    """Return (shape, rate) with shape = mu^2/sigma^2 and rate = mu/sigma^2.

    ``sigma`` is clamped from below at ``SIGMA_FLOOR``.
    """
    if not isinstance(spec, GammaSpec):
        raise InvalidSpecError(f"expected GammaSpec, got {type(spec).__name__}")
    var = max(spec.sigma, SIGMA_FLOOR) ** 2
    return spec.mu * spec.mu / var, spec.mu / var


def _marsaglia_tsang(shape: float, n: int, rng: np.random.Generator) -> np.ndarray:
    # requires shape >= 1
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        k = todo.size
        x = rng.standard_normal(k)
        v = 1.0 + c * x
        u = rng.random(k)
        ok = v > 0
        v3 = np.where(ok, v, 1.0) ** 3
        with np.errstate(divide="ignore"):
            accept = ok & (
                (u < 1.0 - 0.0331 * x**4)
                | (np.log(u) < 0.5 * x * x + d * (1.0 - v3 + np.log(v3)))
            )
        out[todo[accept]] = d * v3[accept]
        todo = todo[~accept]
    return out


def standard_gamma(shape: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` Gamma(shape, 1) variates by Marsaglia and Tsang's squeeze method."""
    if not shape > 0:
        raise InvalidSpecError(f"shape must be > 0, got {shape}")
    if shape >= 1.0:
        return _marsaglia_tsang(shape, n, rng)
    # Boost: X ~ Gamma(a+1), U^(1/a) X ~ Gamma(a).
    g = _marsaglia_tsang(shape + 1.0, n, rng)
    u = rng.random(n)
    return g * u ** (1.0 / shape)


def sample(spec: GammaSpec, rng: np.random.Generator, size: int | None = None):
    """One draw (``size=None``) or an array of ``size`` draws from ``spec``."""
    shape, rate = to_shape_rate(spec)
    n = 1 if size is None else int(size)
    draws = standard_gamma(shape, n, rng) / rate
    # Underflow to 0 is possible only for extreme shapes < 1; keep strict positivity.
    draws = np.maximum(draws, np.finfo(float).tiny)
    return float(draws[0]) if size is None else draws


def sample_matrix(specs, names, n: int, rng: np.random.Generator) -> np.ndarray:
    """An (n, len(names)) matrix of independent draws, column order given by ``names``."""
    by_name = {s.name: s for s in specs}
    missing = [nm for nm in names if nm not in by_name]
    if missing:
        raise InvalidSpecError(f"no distribution given for parameter(s) {missing}")
    return np.column_stack([sample(by_name[nm], rng, size=n) for nm in names])
