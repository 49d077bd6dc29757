"""
Revocation list sizes and downloads
===================================

A nation-wide list is hundreds of megabytes. A list scoped to the stretch
of road between two RSUs is tens of kilobytes. Here is what that means for
a car that has only a few seconds of DSRC contact.
"""

from tvss.sim.config import ScenarioConfig
from tvss.sim.pcrl import pcrl_sizes, run_pcrl_download, snapshot_wire_bytes

cfg = ScenarioConfig(seed=0)
sizes = pcrl_sizes(cfg)
regular, mass = cfg.revocation_ratios

print(f"{'scope':14s}{'regular MB':>12s}{'mass MB':>12s}")
for scope, row in sizes.items():
    print(f"{scope:14s}{row[regular] / 1e6:12.3f}{row[mass] / 1e6:12.3f}")

# one wire snapshot with k entries: header, signature and 32 bytes per entry
print("\nsnapshot bytes for 10 entries:", snapshot_wire_bytes(10))

# link efficiency is calibrated so the daily delta list succeeds 42% at 55 mph
res = run_pcrl_download(cfg)
print(f"calibrated efficiency: {res.efficiency:.4f}")
print(f"\n{'scope':14s}" + "".join(f"{v:>8d}" for v in cfg.speeds_mph))
for scope in ("local", "delta-daily", "delta-weekly", "NY", "EntireUS"):
    cells = "".join(f"{res.ratios[(scope, regular, v)]:8.3f}" for v in cfg.speeds_mph)
    print(f"{scope:14s}{cells}")
