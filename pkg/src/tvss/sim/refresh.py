"""PC refresh success while driving past one RSU.

A pass lasts ``C`` seconds (drawn from the coverage fit). The OBU starts a
new request every ``retry_ms``, the first at a uniform phase in
``[0, retry_ms)`` when ``random_phase`` is set and on entering coverage
otherwise. An attempt walks its scheme's legs in order; each leg
draws a lognormal latency and fails if it exceeds the hop timeout. The
pass succeeds if any attempt finishes all legs, plus RSU compute, before
coverage ends.

All schemes see the same coverage, phases and per-leg uniforms (common
random numbers), so adding legs to a profile can never raise its success.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .config import ScenarioConfig
from .coverage import CoverageFit, coverage_fit
from .engine import EventQueue

EDGE, CLOUD = "edge", "cloud"


@dataclass(frozen=True)
class Leg:
    hop: str
    median_ms: float
    sigma: float
    timeout_ms: float

    def latency_ms(self, u: np.ndarray) -> np.ndarray:
        if self.median_ms == 0:
            return np.zeros_like(u)
        with np.errstate(divide="ignore"):
            return self.median_ms * np.exp(self.sigma * ndtri(u))


@dataclass(frozen=True)
class SchemeProfile:
    name: str
    legs: Tuple[Leg, ...]
    rsu_compute_ms: float = 0.0

    def check(self) -> None:
        hops = [leg.hop for leg in self.legs]
        if self.name == "tvss" and hops != [EDGE]:
            raise ValueError("tvss uses exactly one edge hop")
        if self.name == "scms-like" and (not hops or set(hops) != {CLOUD}):
            raise ValueError("scms-like uses cloud hops only")
        if self.name == "secmace-like" and sorted(hops) != [CLOUD, EDGE]:
            raise ValueError("secmace-like uses one cloud and one edge hop")

    def with_cloud_median(self, median_ms: float) -> "SchemeProfile":
        legs = tuple(replace(leg, median_ms=median_ms) if leg.hop == CLOUD else leg
                     for leg in self.legs)
        return replace(self, legs=legs)

    @property
    def cloud_median_ms(self) -> Optional[float]:
        for leg in self.legs:
            if leg.hop == CLOUD:
                return leg.median_ms
        return None


SCHEMES = ("tvss", "secmace-like", "scms-like")


def default_profiles(cfg: ScenarioConfig, secmace_cloud_ms: float = 1000.0,
                     scms_cloud_ms: float = 1000.0) -> Dict[str, SchemeProfile]:
    s = cfg.latency_sigma
    edge = Leg(EDGE, cfg.edge_median_ms, s, cfg.edge_timeout_ms)
    profiles = {
        "tvss": SchemeProfile("tvss", (edge,), cfg.tvss_compute_ms),
        "secmace-like": SchemeProfile(
            "secmace-like", (Leg(CLOUD, secmace_cloud_ms, s, cfg.cloud_timeout_ms), edge),
            cfg.secmace_compute_ms),
        "scms-like": SchemeProfile(
            "scms-like",
            tuple(Leg(CLOUD, scms_cloud_ms, s, cfg.cloud_timeout_ms)
                  for _ in range(cfg.scms_cloud_legs)), 0.0),
    }
    for p in profiles.values():
        p.check()
    return profiles


@dataclass
class PassDraws:
    """Random inputs for ``n`` passes, shared by every scheme."""

    coverage_s: np.ndarray
    phase_ms: np.ndarray
    u: np.ndarray  # (n, attempts, legs)
    retry_ms: float

    @classmethod
    def draw(cls, fit: CoverageFit, n: int, retry_ms: float, max_legs: int,
             rng: np.random.Generator, random_phase: bool = False) -> "PassDraws":
        coverage = fit.sample(rng, n)
        attempts = int(math.ceil(1000.0 * fit.hi / retry_ms)) + 1
        phase = rng.random(n) * retry_ms
        if not random_phase:
            phase[:] = 0.0
        u = rng.random((n, attempts, max_legs))
        return cls(coverage, phase, u, retry_ms)

    @property
    def n(self) -> int:
        return len(self.coverage_s)


def completion_ms(profile: SchemeProfile, d: PassDraws) -> np.ndarray:
    """Earliest finish per pass, measured from entering coverage; inf on failure."""
    n, k, _ = d.u.shape
    starts = d.phase_ms[:, None] + d.retry_ms * np.arange(k)[None, :]
    cov_ms = 1000.0 * d.coverage_s[:, None]
    ok = starts < cov_ms
    total = np.zeros((n, k))
    for j, leg in enumerate(profile.legs):
        lat = leg.latency_ms(d.u[:, :, j])
        ok &= lat <= leg.timeout_ms
        total += lat
    finish = starts + total + profile.rsu_compute_ms
    ok &= finish <= cov_ms
    return np.where(ok, finish, np.inf).min(axis=1)


def pass_outcomes(profile: SchemeProfile, d: PassDraws) -> np.ndarray:
    """Boolean success per pass (vectorised)."""
    return np.isfinite(completion_ms(profile, d))


def pass_outcomes_des(profile: SchemeProfile, d: PassDraws) -> np.ndarray:
    """Same model driven by the event engine, one pass at a time.

    Slow; used to cross-check :func:`pass_outcomes`. Times are kept in
    float milliseconds so both paths see identical arithmetic.
    """
    out = np.zeros(d.n, dtype=bool)
    lat = [leg.latency_ms(d.u[:, :, j]) for j, leg in enumerate(profile.legs)]
    for i in range(d.n):
        q = EventQueue()
        cov_ms = 1000.0 * d.coverage_s[i]
        state = {"done": False, "in_range": True}
        t = [0.0]

        def leave():
            state["in_range"] = False

        def leg_done(a, j, at):
            t[0] = at
            if lat[j][i, a] > profile.legs[j].timeout_ms:
                return
            if j + 1 < len(profile.legs):
                nxt = at + lat[j + 1][i, a]
                q.schedule(math.floor(nxt), leg_done, a, j + 1, nxt)
            else:
                fin = at + profile.rsu_compute_ms
                if fin <= cov_ms:
                    state["done"] = True

        def spawn(a, at):
            if at >= cov_ms or state["done"]:
                return
            if profile.legs:
                first = at + lat[0][i, a]
                q.schedule(math.floor(first), leg_done, a, 0, first)
            elif at + profile.rsu_compute_ms <= cov_ms:
                state["done"] = True
            nxt = at + d.retry_ms
            if a + 1 < d.u.shape[1]:
                q.schedule(math.floor(nxt), spawn, a + 1, nxt)

        q.schedule(math.floor(d.phase_ms[i]), spawn, 0, d.phase_ms[i])
        q.schedule(math.floor(cov_ms), leave)
        q.run()
        out[i] = state["done"]
    return out


def success_ratio(profile: SchemeProfile, d: PassDraws) -> float:
    return float(pass_outcomes(profile, d).mean())


def _draws(cfg: ScenarioConfig, speed: int, seed_offset: int, max_legs: int) -> PassDraws:
    rng = np.random.default_rng([cfg.seed, speed, seed_offset])
    return PassDraws.draw(coverage_fit(speed), cfg.passes, cfg.retry_ms, max_legs, rng,
                          cfg.random_phase)


def calibrate_cloud_median(profile: SchemeProfile, d: PassDraws, target: float,
                           lo_ms: float = 1.0, hi_ms: float = 20_000.0) -> float:
    """Cloud-leg median giving ``target`` success on fixed draws (bisection in log space)."""
    def gap(log_m):
        return success_ratio(profile.with_cloud_median(math.exp(log_m)), d) - target

    a, b = math.log(lo_ms), math.log(hi_ms)
    if gap(a) < 0 or gap(b) > 0:
        raise ValueError(f"target {target} not bracketed for {profile.name}")
    return math.exp(brentq(gap, a, b, xtol=1e-6))


@dataclass
class RefreshResult:
    ratios: Dict[str, Dict[int, float]]
    profiles: Dict[str, SchemeProfile]

    def rows(self) -> List[Tuple[str, int, float]]:
        return [(s, v, self.ratios[s][v]) for s in SCHEMES for v in sorted(self.ratios[s])]


def calibrated_profiles(cfg: ScenarioConfig) -> Dict[str, SchemeProfile]:
    base = default_profiles(cfg)
    max_legs = max(len(p.legs) for p in base.values())
    given = {"secmace-like": cfg.secmace_cloud_ms, "scms-like": cfg.scms_cloud_ms}
    out = {"tvss": base["tvss"]}
    d = None
    for name in ("secmace-like", "scms-like"):
        if given[name] is not None:
            out[name] = base[name].with_cloud_median(given[name])
            continue
        if d is None:
            d = _draws(cfg, cfg.calibration_speed_mph, 1, max_legs)
        m = calibrate_cloud_median(base[name], d, cfg.calibration_targets[name])
        out[name] = base[name].with_cloud_median(m)
    return out


def run_refresh_experiment(cfg: ScenarioConfig,
                           profiles: Optional[Dict[str, SchemeProfile]] = None,
                           speeds: Optional[Iterable[int]] = None) -> RefreshResult:
    """Success ratio per (scheme, speed). Calibration draws and evaluation
    draws come from independent streams."""
    profiles = calibrated_profiles(cfg) if profiles is None else profiles
    max_legs = max(len(p.legs) for p in profiles.values())
    speeds = list(cfg.speeds_mph if speeds is None else speeds)
    ratios: Dict[str, Dict[int, float]] = {name: {} for name in profiles}
    for v in speeds:
        d = _draws(cfg, v, 2, max_legs)
        for name, prof in profiles.items():
            ratios[name][v] = success_ratio(prof, d)
    return RefreshResult(ratios, profiles)


def total_latency_median_ms(profile: SchemeProfile) -> float:
    return sum(leg.median_ms for leg in profile.legs) + profile.rsu_compute_ms
