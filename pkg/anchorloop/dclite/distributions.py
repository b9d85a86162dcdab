from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Hashable, Mapping, Tuple, Union

import numpy as np
from scipy import stats

from ..errors import ProgramError

WEIGHT_TOL = 1e-9
SYMMETRY_TOL = 1e-12

Value = Union[int, float, str, Tuple[float, ...]]


class Distribution(ABC):
    tag: str = ""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> Value:
        ...

    @abstractmethod
    def density(self, value: Any) -> float:
        ...


@dataclass(frozen=True)
class Poisson(Distribution):
    lam: float
    tag = "poisson"

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ProgramError(f"poisson rate must be > 0, got {self.lam}")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.poisson(self.lam))

    def density(self, value: Any) -> float:
        if isinstance(value, str) or float(value) != int(value):
            return 0.0
        return float(stats.poisson.pmf(int(value), self.lam))


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float
    high: float
    tag = "uniform"

    def __post_init__(self) -> None:
        if not self.high > self.low:
            raise ProgramError(f"uniform needs high > low, got ({self.low}, {self.high})")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    def density(self, value: Any) -> float:
        return float(stats.uniform.pdf(float(value), loc=self.low, scale=self.high - self.low))


class Gaussian(Distribution):
    """
    Scalar or multivariate normal. `cov` may be a scalar (variance, isotropic for a
    vector mean) or a full matrix; a zero covariance is the noise-free limit and
    samples the mean exactly.
    """

    tag = "gaussian"

    def __init__(self, mean: Any, cov: Any) -> None:
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.scalar = np.ndim(mean) == 0
        dim = self.mean.size
        cov_arr = np.asarray(cov, dtype=float)
        if cov_arr.ndim == 0:
            cov_arr = float(cov_arr) * np.eye(dim)
        if cov_arr.shape != (dim, dim):
            raise ProgramError(f"gaussian covariance must be {dim}x{dim}, got shape {cov_arr.shape}")
        if not np.allclose(cov_arr, cov_arr.T, atol=SYMMETRY_TOL):
            raise ProgramError("gaussian covariance must be symmetric")
        eig = np.linalg.eigvalsh(cov_arr)
        if eig.min() < -SYMMETRY_TOL:
            raise ProgramError("gaussian covariance must be positive semi-definite")
        self.cov = cov_arr
        self.degenerate = bool(np.all(cov_arr == 0.0))
        self.singular = bool(eig.min() <= SYMMETRY_TOL)

    def sample(self, rng: np.random.Generator) -> Value:
        draw = self.sample_n(rng, 1)[0]
        if self.scalar:
            return float(draw[0])
        return tuple(float(v) for v in draw)

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, dim) draws."""
        if self.degenerate:
            return np.tile(self.mean, (n, 1))
        return rng.multivariate_normal(self.mean, self.cov, size=n, method="eigh")

    def logpdf(self, values: Any) -> np.ndarray:
        if self.singular:
            raise ProgramError("density is undefined for a singular gaussian")
        return np.atleast_1d(stats.multivariate_normal(self.mean, self.cov).logpdf(values))

    def density(self, value: Any) -> float:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.shape != self.mean.shape:
            raise ProgramError(f"gaussian value must have {self.mean.size} components")
        return float(np.exp(self.logpdf(arr)[0]))

    def __repr__(self) -> str:
        return f"Gaussian(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True)
class Finite(Distribution):
    weights: Tuple[Tuple[float, Hashable], ...]
    tag = "finite"

    def __post_init__(self) -> None:
        if not self.weights:
            raise ProgramError("finite distribution needs at least one outcome")
        probs = [p for p, _ in self.weights]
        if min(probs) < 0.0 or abs(math.fsum(probs) - 1.0) > WEIGHT_TOL:
            raise ProgramError("finite weights must be non-negative and sum to 1")

    def sample(self, rng: np.random.Generator) -> Value:
        cumulative = np.cumsum([p for p, _ in self.weights])
        index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
        return self.weights[min(index, len(self.weights) - 1)][1]  # type: ignore[return-value]

    def density(self, value: Any) -> float:
        return math.fsum(p for p, v in self.weights if v == value)


def make_distribution(tag: str, params: Mapping[str, Any]) -> Distribution:
    """Build a distribution from already-evaluated parameters."""
    try:
        if tag == "poisson":
            return Poisson(float(params["lam"]))
        if tag == "uniform":
            return Uniform(float(params["low"]), float(params["high"]))
        if tag == "gaussian":
            return Gaussian(params["mean"], params["cov"])
        if tag == "finite":
            pairs = tuple((float(p), _hashable(v)) for p, v in params["weights"])
            return Finite(pairs)
    except KeyError as exc:
        raise ProgramError(f"{tag} distribution is missing parameter {exc.args[0]!r}") from None
    raise ProgramError(f"unknown distribution tag '{tag}'")


def _hashable(value: Any) -> Hashable:
    if isinstance(value, (list, np.ndarray)):
        return tuple(value)
    return value


def density_at(distribution: Distribution, value: Any) -> float:
    return distribution.density(value)
