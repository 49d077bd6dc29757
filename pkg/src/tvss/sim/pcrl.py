"""PCRL size arithmetic and download feasibility during one RSU pass."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .. import codec
from ..records import PcrlSnapshot
from .config import ScenarioConfig
from .coverage import coverage_fit

US_VEHICLES = 350e6
# State fleets implied by the regular-revocation column of the size table
# at 39.07 bytes per entry; no independent registration data is used.
STATE_VEHICLES = {
    "CA": 39.48e6,
    "TX": 29.17e6,
    "FL": 22.62e6,
    "NY": 14.48e6,
}
METERS_PER_MILE = 1609.344
COVERAGE_RADIUS_M = 150.0
VEHICLES_PER_COVERAGE = 500

SCOPES = ("EntireUS", "CA", "TX", "FL", "NY", "delta-weekly", "delta-daily", "local")


def local_vehicles(spacing_miles: float) -> float:
    """Vehicles that fit on the road between two RSUs at coverage-area density."""
    per_meter = VEHICLES_PER_COVERAGE / (2 * COVERAGE_RADIUS_M)
    return spacing_miles * METERS_PER_MILE * per_meter


def scope_vehicles(cfg: ScenarioConfig) -> Dict[str, float]:
    out = {"EntireUS": US_VEHICLES}
    out.update(STATE_VEHICLES)
    out["delta-weekly"] = US_VEHICLES / 52
    out["delta-daily"] = US_VEHICLES / 365
    out["local"] = local_vehicles(cfg.rsu_spacing_miles)
    return out


def pcrl_sizes(cfg: ScenarioConfig) -> Dict[str, Dict[float, float]]:
    """Bytes per scope and revocation ratio: vehicles x ratio x entry size."""
    return {scope: {r: n * r * cfg.entry_bytes for r in cfg.revocation_ratios}
            for scope, n in scope_vehicles(cfg).items()}


def snapshot_wire_bytes(k: int, region: bytes = bytes(8)) -> int:
    """Encoded size of a regional snapshot with ``k`` entries."""
    snap = PcrlSnapshot(region, 0, bytes(32 * k), bytes(64))
    return len(codec.encode(snap))


def budget_bytes(coverage_s, efficiency: float, dsrc_bps: float):
    return np.asarray(coverage_s) * efficiency * dsrc_bps / 8.0


def calibrate_efficiency(cfg: ScenarioConfig, size_bytes: float, speed: int,
                         target: float) -> float:
    """Link efficiency at which ``target`` of passes can move ``size_bytes``."""
    fit = coverage_fit(speed)
    x = brentq(lambda c: float(fit.sf(c)) - target, fit.lo, fit.hi, xtol=1e-12)
    eff = size_bytes * 8.0 / (cfg.dsrc_bps * x)
    if not 0 < eff <= 1:
        raise ValueError(f"calibrated efficiency {eff:.3f} outside (0, 1]")
    return eff


@dataclass
class DownloadResult:
    efficiency: float
    ratios: Dict[Tuple[str, float, int], float]

    def rows(self) -> List[Tuple[str, float, int, float]]:
        return [(s, r, v, p) for (s, r, v), p in sorted(self.ratios.items())]


def run_pcrl_download(cfg: ScenarioConfig, efficiency: Optional[float] = None) -> DownloadResult:
    sizes = pcrl_sizes(cfg)
    if efficiency is None:
        efficiency = cfg.pcrl_efficiency
    if efficiency is None:
        daily = sizes["delta-daily"][cfg.revocation_ratios[0]]
        efficiency = calibrate_efficiency(cfg, daily, cfg.calibration_speed_mph,
                                          cfg.efficiency_target)
    ratios = {}
    for v in cfg.speeds_mph:
        rng = np.random.default_rng([cfg.seed, v, 3])
        cov = coverage_fit(v).sample(rng, cfg.passes)
        budget = budget_bytes(cov, efficiency, cfg.dsrc_bps)
        for scope, by_ratio in sizes.items():
            for r, size in by_ratio.items():
                ratios[(scope, r, v)] = float(np.mean(budget >= size))
    return DownloadResult(efficiency, ratios)
