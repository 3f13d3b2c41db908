"""Performance-gap arithmetic, difficulty levels, and CI aggregation.

The interval aggregation deliberately uses the Student-t quantile with
three degrees of freedom no matter how many values are aggregated. Runs
are normally repeated over three seeds and the protocol keeps the same
multiplier when the seed count changes, so numbers stay comparable
across reports. This is a reporting convention, not general statistics
practice.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass


class InsufficientData(Exception):
    """Too few values to aggregate."""


class UnknownLevel(Exception):
    """Difficulty name outside the registry."""


# target success rates by difficulty name
LEVELS = {"hard": 0.25, "medium": 0.50, "easy": 0.75, "trivial": 0.90}


@dataclass(frozen=True)
class DifficultyLevel:
    name: str
    rho: float


@dataclass(frozen=True)
class GapRecord:
    rho: float
    rho_hat: float
    gap: float = None

    def __post_init__(self):
        expected = gap(self.rho, self.rho_hat)
        if self.gap is None:
            object.__setattr__(self, "gap", expected)
        elif abs(self.gap - expected) > 1e-12:
            raise ValueError("gap must equal |rho_hat - rho|")


def gap(rho: float, rho_hat: float) -> float:
    """Absolute difference between observed and target success rates."""
    for value in (rho, rho_hat):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"rates must lie in [0, 1], got {value}")
    return abs(rho_hat - rho)


def level_of(name: str) -> DifficultyLevel:
    key = name.strip().lower()
    if key not in LEVELS:
        known = ", ".join(sorted(LEVELS))
        raise UnknownLevel(f"unknown difficulty {name!r} (known: {known})")
    return DifficultyLevel(name=key, rho=LEVELS[key])


def _student3_cdf(x: float) -> float:
    # closed form for 3 degrees of freedom
    u = x / math.sqrt(3.0)
    return 0.5 + (math.atan(u) + u / (1.0 + u * u)) / math.pi


def student3_quantile(prob: float) -> float:
    """Inverse CDF of the 3-dof Student-t distribution for prob in [0.5, 1)."""
    if not 0.5 <= prob < 1.0:
        raise ValueError("prob must lie in [0.5, 1)")
    if prob == 0.5:
        return 0.0
    lo, hi = 0.0, 1.0
    while _student3_cdf(hi) < prob:
        hi *= 2.0
    for _ in range(100):
        mid = (lo + hi) / 2.0
        if _student3_cdf(mid) < prob:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def aggregate_ci(values: list[float], confidence: float = 0.95) -> tuple[float, float]:
    """Mean and half-width of a t-based confidence interval.

    half_width = t(1 - (1-confidence)/2, df=3) * stddev(ddof=1) / sqrt(n).
    The 3-dof quantile is fixed regardless of n (see module docstring).
    """
    if len(values) < 2:
        raise InsufficientData("need at least two values for an interval")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values)
    quantile = student3_quantile(1.0 - (1.0 - confidence) / 2.0)
    half_width = quantile * sd / math.sqrt(len(values))
    return mean, half_width
