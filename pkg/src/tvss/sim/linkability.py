"""How long a vehicle keeps one PC when refreshes only happen at RSUs.

A trip passes an RSU every ``spacing / speed``. Each pass either yields a
fresh PC at a known offset into coverage or fails, in which case the old
PC stays in use. The linkability window is the time between consecutive
successful refreshes. With i.i.d. passes the gap count is geometric, so
the mean window is ``inter_rsu_time / p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .config import ScenarioConfig
from .coverage import coverage_fit
from .refresh import PassDraws, SchemeProfile, calibrated_profiles, completion_ms

CHUNK = 50_000


def inter_rsu_minutes(spacing_miles: float, speed_mph: float) -> float:
    return 60.0 * spacing_miles / speed_mph


def geometric_window(spacing_miles: float, speed_mph: float, p: float) -> float:
    """Mean minutes between refreshes under i.i.d. success ``p`` per pass."""
    return math.inf if p <= 0 else inter_rsu_minutes(spacing_miles, speed_mph) / p


@dataclass
class WindowStats:
    scheme: str
    speed_mph: int
    passes: int
    successes: int
    mean_min: float
    p95_min: float
    geometric_min: float

    @property
    def success_ratio(self) -> float:
        return self.successes / self.passes

    @property
    def rel_gap(self) -> float:
        """Relative disagreement between the trip simulation and the closed form."""
        if not math.isfinite(self.geometric_min) or not math.isfinite(self.mean_min):
            return math.inf
        return abs(self.mean_min - self.geometric_min) / self.geometric_min


def trip_refresh_times_min(profile: SchemeProfile, cfg: ScenarioConfig, speed: int,
                           passes: int, rng: np.random.Generator) -> np.ndarray:
    """Absolute minutes of each successful refresh along one long trip."""
    inter_ms = 60_000.0 * inter_rsu_minutes(cfg.rsu_spacing_miles, speed)
    fit = coverage_fit(speed)
    out = []
    for start in range(0, passes, CHUNK):
        n = min(CHUNK, passes - start)
        d = PassDraws.draw(fit, n, cfg.retry_ms, len(profile.legs) or 1, rng, cfg.random_phase)
        fin = completion_ms(profile, d)
        k = np.flatnonzero(np.isfinite(fin))
        out.append(((start + k) * inter_ms + fin[k]) / 60_000.0)
    return np.concatenate(out) if out else np.empty(0)


def independent_success(profile: SchemeProfile, cfg: ScenarioConfig, speed: int,
                        passes: int) -> float:
    """Per-pass success on a stream separate from the trip, for the closed form."""
    rng = np.random.default_rng([cfg.seed, speed, 5])
    fit = coverage_fit(speed)
    hits = 0
    for start in range(0, passes, CHUNK):
        n = min(CHUNK, passes - start)
        d = PassDraws.draw(fit, n, cfg.retry_ms, len(profile.legs) or 1, rng, cfg.random_phase)
        hits += int(np.isfinite(completion_ms(profile, d)).sum())
    return hits / passes


def window_stats(profile: SchemeProfile, cfg: ScenarioConfig, speed: int,
                 passes: Optional[int] = None, rng: Optional[np.random.Generator] = None
                 ) -> WindowStats:
    passes = cfg.linkability_passes if passes is None else passes
    if rng is None:
        rng = np.random.default_rng([cfg.seed, speed, 4])
    times = trip_refresh_times_min(profile, cfg, speed, passes, rng)
    gaps = np.diff(times)
    mean = float(gaps.mean()) if len(gaps) else math.inf
    p95 = float(np.percentile(gaps, 95)) if len(gaps) else math.inf
    geo = geometric_window(cfg.rsu_spacing_miles, speed,
                           independent_success(profile, cfg, speed, passes))
    return WindowStats(profile.name, speed, passes, len(times), mean, p95, geo)


def linkability_window(cfg: ScenarioConfig,
                       profiles: Optional[Dict[str, SchemeProfile]] = None,
                       speeds=None) -> Dict[str, Dict[int, WindowStats]]:
    """Window statistics per (scheme, speed)."""
    profiles = calibrated_profiles(cfg) if profiles is None else profiles
    speeds = [cfg.linkability_speed_mph] if speeds is None else list(speeds)
    return {name: {v: window_stats(p, cfg, v) for v in speeds} for name, p in profiles.items()}
