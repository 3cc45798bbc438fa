from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with a 3-standard-error confidence radius."""

    value: float
    radius: float
    samples: int

    @property
    def low(self) -> float:
        return self.value - self.radius

    @property
    def high(self) -> float:
        return self.value + self.radius

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high

    def to_dict(self) -> dict:
        return asdict(self)


def binomial_estimate(successes: int, trials: int, width: float = 3.0) -> Estimate:
    p = successes / trials
    return Estimate(p, width * math.sqrt(p * (1.0 - p) / trials), trials)


def mean_estimate(values, width: float = 3.0) -> Estimate:
    import numpy as np

    x = np.asarray(values, dtype=float)
    n = x.size
    se = x.std(ddof=1) / math.sqrt(n) if n > 1 else math.inf
    return Estimate(float(x.mean()), width * float(se), int(n))
