"""Monte Carlo estimate records and exact, order-free aggregation.

Sums go through ``math.fsum``, which is correctly rounded, so an estimate does
not depend on the order in which trials arrive or on how they were split
between workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable


def digest(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj`` (sorted keys)."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass(frozen=True)
class EstimateWithError:
    estimate: float
    std_error: float
    trials: int
    reduction: str = "mean"

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.estimate - target) <= n_se * self.std_error


@dataclass(frozen=True)
class BallotEstimate:
    """A Monte Carlo probability with SE = sqrt(p(1 - p) / trials)."""

    probability: float
    std_error: float
    trials: int
    spec_digest: str = ""

    @classmethod
    def from_count(cls, successes: int, trials: int, spec_digest: str = "") -> "BallotEstimate":
        if trials < 1:
            raise ValueError("trials must be >= 1")
        p = successes / trials
        return cls(p, math.sqrt(p * (1 - p) / trials), trials, spec_digest)


def estimate_from_values(values: Iterable[float], reduction: str = "mean") -> EstimateWithError:
    """Sample mean with SE from the sample variance (``mean``), or a
    frequency with the binomial SE (``frequency``)."""
    xs = [float(v) for v in values]
    t = len(xs)
    if t == 0:
        raise ValueError("no trials to reduce")
    mean = math.fsum(xs) / t
    if reduction == "frequency":
        se = math.sqrt(max(mean * (1 - mean), 0.0) / t)
    elif reduction == "mean":
        var = math.fsum((x - mean) ** 2 for x in xs) / (t - 1) if t > 1 else 0.0
        se = math.sqrt(var / t)
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    return EstimateWithError(mean, se, t, reduction)


@dataclass
class Accumulator:
    """Per-trial values keyed by trial index; merging is plain union."""

    reduction: str = "mean"
    values: dict = field(default_factory=dict)

    def add(self, index: int, value: float) -> None:
        if index in self.values:
            raise ValueError(f"trial {index} recorded twice")
        self.values[index] = float(value)

    def merge(self, other: "Accumulator") -> "Accumulator":
        if other.reduction != self.reduction:
            raise ValueError("cannot merge accumulators with different reductions")
        out = Accumulator(self.reduction, dict(self.values))
        for i, v in other.values.items():
            out.add(i, v)
        return out

    def estimate(self) -> EstimateWithError:
        return estimate_from_values(self.values.values(), self.reduction)
