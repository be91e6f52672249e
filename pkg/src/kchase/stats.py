"""Small statistics helpers shared by the Monte Carlo checks and the harness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass
class MeanCI:
    mean: float
    low: float
    high: float
    n: int


def mean_ci(values, level: float = 0.99) -> MeanCI:
    """Two-sided Student-t interval for the mean."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    m = float(x.mean())
    if n == 1:
        return MeanCI(m, -math.inf, math.inf, 1)
    se = float(x.std(ddof=1)) / math.sqrt(n)
    q = float(stats.t.ppf(0.5 + level / 2, n - 1))
    return MeanCI(m, m - q * se, m + q * se, n)


def upper_slack(values, level: float = 0.99) -> float:
    """One-sided t slack: the mean exceeds this by chance with prob. 1 - level."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < 2:
        return math.inf
    return float(stats.t.ppf(level, n - 1)) * float(x.std(ddof=1)) / math.sqrt(n)


def mean_le_zero(values, level: float = 0.99, atol: float = 1e-9) -> bool:
    """Accept 'E[values] <= 0' unless the sample mean exceeds its one-sided slack."""
    x = np.asarray(values, dtype=float)
    return bool(x.mean() <= upper_slack(x, level) + atol)
