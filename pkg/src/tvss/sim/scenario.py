"""Run every experiment for one config and write metrics files.

Outputs are byte-identical for a fixed config and seed: no wall-clock
values are recorded and floats are rounded before serialisation.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

from .config import ScenarioConfig
from .coverage import coverage_fit
from .fullstack import clone_summary, run_clone_scenario
from .linkability import linkability_window
from .pcrl import pcrl_sizes, run_pcrl_download
from .refresh import run_refresh_experiment, total_latency_median_ms

DIGITS = 6


def _r(x: float):
    if x is None or not math.isfinite(x):
        return None
    return round(float(x), DIGITS)


def collect(cfg: ScenarioConfig) -> dict:
    refresh = run_refresh_experiment(cfg)
    link = linkability_window(cfg, refresh.profiles)
    sizes = pcrl_sizes(cfg)
    download = run_pcrl_download(cfg)
    clones = [run_clone_scenario(cfg.seed * 1000 + i, cfg.t_minutes, cfg.regions,
                                 cfg.fleet_size, cfg.windows, cfg.clone_window)
              for i in range(3)]
    return {
        "config": cfg.to_dict(),
        "coverage_fit": {str(v): {"p": _r(coverage_fit(v).p), "q": _r(coverage_fit(v).q)}
                         for v in cfg.speeds_mph},
        "profiles": {name: {"cloud_median_ms": _r(p.cloud_median_ms),
                            "total_median_ms": _r(total_latency_median_ms(p))}
                     for name, p in refresh.profiles.items()},
        "refresh_success": {s: {str(v): _r(x) for v, x in sorted(d.items())}
                            for s, d in refresh.ratios.items()},
        "linkability_min": {s: {str(v): {"mean": _r(w.mean_min), "p95": _r(w.p95_min),
                                         "geometric": _r(w.geometric_min)}
                                for v, w in d.items()}
                            for s, d in link.items()},
        "pcrl_bytes": {scope: {str(r): _r(b) for r, b in d.items()} for scope, d in sizes.items()},
        "pcrl_efficiency": _r(download.efficiency),
        "pcrl_download": {f"{s}|{r}|{v}": _r(p) for s, r, v, p in download.rows()},
        "clone": clone_summary(clones),
        "tbl_cardinality": [max(c.tbl_sizes) if c.tbl_sizes else 0 for c in clones],
    }


def write_outputs(metrics: dict, out: Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    with open(out / "success_ratio.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scheme", "speed_mph", "success_ratio"])
        for s, d in metrics["refresh_success"].items():
            for v, x in d.items():
                w.writerow([s, v, x])
    with open(out / "pcrl_sizes.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scope", "revocation_ratio", "bytes", "megabytes"])
        for scope, d in metrics["pcrl_bytes"].items():
            for r, b in d.items():
                w.writerow([scope, r, b, round(b / 1e6, 4)])
    with open(out / "linkability.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scheme", "speed_mph", "mean_min", "p95_min", "geometric_min"])
        for s, d in metrics["linkability_min"].items():
            for v, x in d.items():
                w.writerow([s, v, x["mean"], x["p95"], x["geometric"]])


def run_scenario(cfg: ScenarioConfig, out: Optional[Path] = None) -> dict:
    metrics = collect(cfg)
    if out is not None:
        write_outputs(metrics, out)
    return metrics
