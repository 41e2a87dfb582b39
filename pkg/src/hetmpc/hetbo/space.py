from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..distparams import SIGMA_FLOOR


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class SearchSpace:
    """Box over the joint decision variable; points are normalised to [0, 1]^d."""

    dims: tuple[Dim, ...]

    def __post_init__(self):
        dims = tuple(d if isinstance(d, Dim) else Dim(*d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        for d in dims:
            if not d.lower < d.upper:
                raise ValueError(f"{d.name}: lower {d.lower} must be < upper {d.upper}")
            if (d.name.startswith("sigma") or d.name == "lambda") and d.lower < SIGMA_FLOOR:
                raise ValueError(f"{d.name}: lower bound must be >= {SIGMA_FLOOR}")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dims])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dims])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a dimension of the search space {self.names}") from None

    def normalize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def denormalize(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return self.lower + u * (self.upper - self.lower)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_dict(self) -> dict:
        return {d.name: [d.lower, d.upper] for d in self.dims}
