"""Coverage-time distributions fitted to four summary statistics.

Each measured row gives min, median, mean and max seconds in range of one
RSU. We use a median-pinned two-piece power distribution::

    lower half:  X = median - (median - min) * V**p,   V ~ U(0, 1)
    upper half:  X = median + (max - median) * W**q,   W ~ U(0, 1)

The median and the support are exact by construction. The mean is
``median + ((max - median)/(1 + q) - (median - min)/(1 + p)) / 2`` and is
hit exactly by choosing ``p = q`` when that has a positive solution, or
otherwise by holding one half uniform (exponent 1) and solving the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

# speed_mph -> (min, median, mean, max) seconds; "<0.1" is read as 0.05
COVERAGE_TABLE: Dict[int, Tuple[float, float, float, float]] = {
    85: (0.05, 1.0, 1.39, 5.0),
    75: (0.32, 1.0, 1.91, 5.0),
    65: (0.61, 2.0, 2.07, 6.0),
    55: (1.0, 3.0, 3.30, 8.0),
    35: (3.0, 6.0, 5.75, 10.0),
    25: (3.0, 6.0, 6.30, 12.0),
}


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class CoverageFit:
    lo: float
    median: float
    mean: float
    hi: float
    p: float
    q: float

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def model_mean(self) -> float:
        if self.degenerate:
            return self.lo
        a, b = self.median - self.lo, self.hi - self.median
        return self.median + 0.5 * (b / (1 + self.q) - a / (1 + self.p))

    def quantile(self, u):
        """Inverse CDF; ``u`` may be a scalar or array in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.degenerate:
            return np.full_like(u, self.lo)
        lower = u < 0.5
        v = np.where(lower, 1.0 - 2.0 * u, 0.0)
        w = np.where(lower, 0.0, 2.0 * u - 1.0)
        return np.where(lower,
                        self.median - (self.median - self.lo) * v ** self.p,
                        self.median + (self.hi - self.median) * w ** self.q)

    def sf(self, x):
        """P(X >= x)."""
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return np.where(x <= self.lo, 1.0, 0.0)
        a, b = self.median - self.lo, self.hi - self.median
        below = np.clip((self.median - x) / a if a > 0 else 0.0, 0.0, 1.0)
        above = np.clip((x - self.median) / b if b > 0 else 1.0, 0.0, 1.0)
        return np.where(x <= self.median,
                        0.5 + 0.5 * below ** (1.0 / self.p),
                        0.5 - 0.5 * above ** (1.0 / self.q))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.quantile(rng.random(size))


def fit_row(lo: float, median: float, mean: float, hi: float) -> CoverageFit:
    if not lo <= median <= hi or not lo <= mean <= hi:
        raise FitError(f"inconsistent summary ({lo}, {median}, {mean}, {hi})")
    if lo == hi:
        return CoverageFit(lo, median, mean, hi, 1.0, 1.0)
    a, b, d = median - lo, hi - median, 2.0 * (mean - median)
    # -a/(1+p) + b/(1+q) = d
    if d != 0 and (b - a) / d > 1:
        k = (b - a) / d - 1
        return CoverageFit(lo, median, mean, hi, k, k)
    if d == 0 and a == b:
        return CoverageFit(lo, median, mean, hi, 1.0, 1.0)
    if b > 0 and d + a / 2 > 0 and b / (d + a / 2) - 1 > 0:
        return CoverageFit(lo, median, mean, hi, 1.0, b / (d + a / 2) - 1)
    if a > 0 and b / 2 - d > 0 and a / (b / 2 - d) - 1 > 0:
        return CoverageFit(lo, median, mean, hi, a / (b / 2 - d) - 1, 1.0)
    raise FitError(f"no two-piece fit for ({lo}, {median}, {mean}, {hi})")


_FITS: Dict[int, CoverageFit] = {}


def coverage_fit(speed_mph: int) -> CoverageFit:
    if speed_mph not in COVERAGE_TABLE:
        raise KeyError(f"no coverage data for {speed_mph} mph")
    if speed_mph not in _FITS:
        _FITS[speed_mph] = fit_row(*COVERAGE_TABLE[speed_mph])
    return _FITS[speed_mph]


def sample_coverage(speed_mph: int, rng: np.random.Generator, size=None):
    out = coverage_fit(speed_mph).sample(rng, 1 if size is None else size)
    return float(out[0]) if size is None else out
