"""Null-distribution estimation and the z-test violation decision.

The null distribution of "how far apart do two prediction sets for the
*same* input typically lie" is estimated from the pairwise distances
between repeated source predictions. A follow-up distance is flagged as
a violation when a z-test against that null reports significance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import MtrajError, PredictionSet
from .ot import wasserstein

# Below this the null distribution is treated as collapsed (deterministic SUT).
DEGENERATE_SIGMA = 1e-12
DEGENERATE_SLACK = 1e-9


class TooFewSets(MtrajError):
    pass


class EmptyInput(MtrajError):
    pass


@dataclass(frozen=True)
class VariationMeasures:
    """Mean and population standard deviation of pairwise distances."""

    mu: float
    sigma: float
    count: int


def pairwise_distances(sets: Sequence[PredictionSet]) -> list[float]:
    """All N(N-1)/2 pairwise Wasserstein distances, ordered by index pair."""
    n = len(sets)
    if n < 2:
        raise TooFewSets(f"need at least 2 prediction sets, got {n}")
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            out.append(wasserstein(sets[i], sets[j]))
    return out


def variation_measures(distances: Sequence[float]) -> VariationMeasures:
    """Arithmetic mean and population standard deviation (divide by count)."""
    if len(distances) == 0:
        raise EmptyInput("no distances given")
    n = len(distances)
    mu = sum(distances) / n
    var = sum((d - mu) ** 2 for d in distances) / n
    return VariationMeasures(mu=mu, sigma=math.sqrt(var), count=n)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def z_test(d: float, vm: VariationMeasures, two_sided: bool = False) -> float:
    """p-value of the follow-up distance ``d`` against the null (mu, sigma).

    One-sided upper tail by default: only distances larger than the null
    mean can be significant. With a collapsed null (sigma ~ 0) the test
    degenerates to an equality check: p = 0 if d exceeds mu, else p = 1.
    """
    if not math.isfinite(d):
        raise ValueError(f"distance must be finite, got {d}")
    if vm.sigma < DEGENERATE_SIGMA:
        if two_sided:
            return 0.0 if abs(d - vm.mu) > DEGENERATE_SLACK else 1.0
        return 0.0 if d > vm.mu + DEGENERATE_SLACK else 1.0
    z = (d - vm.mu) / vm.sigma
    if two_sided:
        return math.erfc(abs(z) / math.sqrt(2.0))
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def is_violation(p: float, threshold: float) -> bool:
    """Inclusive decision rule: a violation occurs when p <= threshold."""
    return p <= threshold
