"""Laplace sampling and the truncated noise vector of the oblivious histogram"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

logger = logging.getLogger(__name__)

TRUNCATION_FACTOR = 10


class InvalidParameterException(ValueError):
    pass


class NoiseTapeExhausted(Exception):
    pass


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameterException(
                f"epsilon must be positive, got {self.epsilon}"
            )
        if not 0 <= self.delta < 1:
            raise InvalidParameterException(f"delta must be in [0, 1), got {self.delta}")

    def to_dict(self):
        return {"epsilon": self.epsilon, "delta": self.delta}


@dataclass(frozen=True)
class NoiseVector:
    values: List[int]
    truncated_flag: bool


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """Draws from Lap(scale) by inverting the CDF of one uniform double"""
    if not scale > 0:
        raise InvalidParameterException(f"Laplace scale must be positive, got {scale}")
    u = rng.random() - 0.5
    # u == -0.5 would map to -inf
    while u == -0.5:
        u = rng.random() - 0.5
    return -scale * math.copysign(1.0, u) * math.log1p(-2 * abs(u))


def sample_laplace_vector(scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    if not scale > 0:
        raise InvalidParameterException(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    u[u == -0.5] = 0.0
    return -scale * np.sign(u) * np.log1p(-2 * np.abs(u))


class LaplaceNoise:
    """Source of Laplace noise for the queries

    Counts every draw so the number of mechanisms a query applied can be
    checked. With `zero_noise` every draw is 0, which is NOT private and only
    meant for exact comparisons against an oracle.
    """

    def __init__(self, rng: np.random.Generator, *, zero_noise: bool = False):
        self.rng = rng
        self.zero_noise = zero_noise
        self.draws = 0

    def sample(self, scale: float) -> float:
        self.draws += 1
        if self.zero_noise:
            if not scale > 0:
                raise InvalidParameterException(
                    f"Laplace scale must be positive, got {scale}"
                )
            return 0.0
        return sample_laplace(scale, self.rng)

    def sample_vector(self, scale: float, size: int) -> np.ndarray:
        self.draws += size
        if self.zero_noise:
            if not scale > 0:
                raise InvalidParameterException(
                    f"Laplace scale must be positive, got {scale}"
                )
            return np.zeros(size)
        return sample_laplace_vector(scale, size, self.rng)


class ScriptedNoise(LaplaceNoise):
    """Replays a fixed tape of noise values, ignoring the requested scale"""

    def __init__(self, values: Iterable[float]):
        super().__init__(np.random.default_rng(0))
        self._tape = list(values)
        self._position = 0

    def sample(self, scale: float) -> float:
        if not scale > 0:
            raise InvalidParameterException(f"Laplace scale must be positive, got {scale}")
        if self._position >= len(self._tape):
            raise NoiseTapeExhausted(f"Tape of {len(self._tape)} values exhausted")
        value = self._tape[self._position]
        self._position += 1
        self.draws += 1
        return value

    def sample_vector(self, scale: float, size: int) -> np.ndarray:
        return np.array([self.sample(scale) for _ in range(size)], dtype=float)


def truncation_bound(n: int, epsilon: float) -> float:
    """10 ln(n) / epsilon, the largest noise magnitude kept by the histogram"""
    return TRUNCATION_FACTOR * math.log(n) / epsilon


def padding_constant(n: int, epsilon: float) -> int:
    """C = ceil(10 ln(n) / epsilon), fake records per type before noise"""
    return math.ceil(truncation_bound(n, epsilon))


def truncated_noise_vector(
    k: int, epsilon: float, n: int, noise: LaplaceNoise
) -> NoiseVector:
    """Draws k values from Lap(2/epsilon), zeroes all of them if any exceeds the
    truncation bound, then rounds each up to an integer."""
    if k < 1:
        raise InvalidParameterException(f"k must be at least 1, got {k}")
    if n < 2:
        raise InvalidParameterException(f"n must be at least 2, got {n}")
    if not epsilon > 0:
        raise InvalidParameterException(f"epsilon must be positive, got {epsilon}")

    draws = [float(x) for x in noise.sample_vector(2 / epsilon, k)]
    bound = truncation_bound(n, epsilon)

    truncated = any(abs(x) > bound for x in draws)
    if truncated:
        logger.info("Noise vector exceeded truncation bound %.3f, using zeros", bound)
        draws = [0.0] * k

    values = [math.ceil(x) for x in draws]
    assert all(-bound <= x <= math.ceil(bound) for x in values)
    return NoiseVector(values=values, truncated_flag=truncated)
