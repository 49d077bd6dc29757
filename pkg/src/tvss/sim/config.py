"""Scenario configuration, loaded from JSON.

Every key is optional; missing keys take the defaults below. Unknown keys
are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional


@dataclass
class ScenarioConfig:
    t_minutes: int = 15
    rsu_spacing_miles: float = 20.0
    speeds_mph: List[int] = field(default_factory=lambda: [85, 75, 65, 55, 35, 25])
    dsrc_bps: float = 6_000_000.0
    retry_ms: float = 500.0
    random_phase: bool = True
    edge_timeout_ms: float = 30.0
    cloud_timeout_ms: float = 2000.0
    # latency model
    edge_median_ms: float = 8.0
    latency_sigma: float = 0.3
    scms_cloud_legs: int = 2
    tvss_compute_ms: float = 1.08
    secmace_compute_ms: float = 6.95
    secmace_cloud_ms: Optional[float] = None
    scms_cloud_ms: Optional[float] = None
    calibration_speed_mph: int = 55
    calibration_targets: Dict[str, float] = field(
        default_factory=lambda: {"secmace-like": 0.46, "scms-like": 0.13})
    passes: int = 10_000
    # PCRL
    revocation_ratios: List[float] = field(default_factory=lambda: [0.0129, 0.05])
    entry_bytes: float = 39.07
    pcrl_efficiency: Optional[float] = None
    efficiency_target: float = 0.42
    # linkability
    linkability_passes: int = 1_000_000
    linkability_speed_mph: int = 65
    # full-stack clone scenario
    fleet_size: int = 20
    regions: int = 3
    windows: int = 6
    clone_window: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.t_minutes < 1:
            raise ValueError("t_minutes must be >= 1")
        positive = ("rsu_spacing_miles", "dsrc_bps", "retry_ms", "edge_timeout_ms",
                    "cloud_timeout_ms", "entry_bytes", "passes", "linkability_passes")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for r in self.revocation_ratios:
            if not 0 <= r <= 1:
                raise ValueError("revocation ratios must lie in [0, 1]")
        for v in self.calibration_targets.values():
            if not 0 < v < 1:
                raise ValueError("calibration targets must lie in (0, 1)")
        if self.pcrl_efficiency is not None and not 0 < self.pcrl_efficiency <= 1:
            raise ValueError("pcrl_efficiency must lie in (0, 1]")
        if not 0 <= self.clone_window < self.windows:
            raise ValueError("clone_window must fall inside the run")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
