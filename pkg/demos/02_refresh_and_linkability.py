"""
Refresh success and linkability windows
=======================================

How often does a passing car finish a PC refresh before it leaves RSU
coverage? Compare a one-hop edge design with schemes that need one or two
cloud round trips, then turn per-pass success into the time a car is stuck
with one pseudonym.
"""

from tvss.sim.config import ScenarioConfig
from tvss.sim.coverage import coverage_fit
from tvss.sim.linkability import linkability_window
from tvss.sim.refresh import run_refresh_experiment, total_latency_median_ms

cfg = ScenarioConfig(seed=0)

# coverage time per speed comes from a fitted two-piece distribution
for v in cfg.speeds_mph:
    f = coverage_fit(v)
    print(f"{v} mph coverage: median {f.median:.2f} s, mean {f.model_mean():.2f} s")

# cloud latency is calibrated on the 55 mph row, then evaluated on fresh draws
res = run_refresh_experiment(cfg)
for name, prof in res.profiles.items():
    print(f"{name:13s} median latency {total_latency_median_ms(prof):8.1f} ms")

print("\nsuccess ratio by speed")
print("scheme        " + "".join(f"{v:>8d}" for v in cfg.speeds_mph))
for name, row in res.ratios.items():
    print(f"{name:13s} " + "".join(f"{row[v]:8.3f}" for v in cfg.speeds_mph))

# a long trip at 65 mph with RSUs every 20 miles
link = linkability_window(cfg, res.profiles)
print("\nminutes between successful refreshes at 65 mph")
for name, by_speed in link.items():
    w = by_speed[65]
    print(f"{name:13s} mean {w.mean_min:9.1f}  p95 {w.p95_min:9.1f}  "
          f"geometric {w.geometric_min:9.1f}")
