"""Protocol-level scenarios on a :class:`~tvss.deployment.Deployment`.

These drive the real CA, RSU, backend and vehicle code over the framed
in-process transport. Time is counted in ticks: one report cycle is one
tick, and delivering a revoke notice to every RSU is one more.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..deployment import Deployment, region_id
from ..records import RevokeCommand
from ..vehicle import RefreshStatus, VehicleAgent


@dataclass
class CloneRun:
    seed: int
    detected: bool = False
    detect_ticks: Optional[int] = None
    blacklist_ticks: Optional[int] = None
    escapes: int = 0
    attempts_after: int = 0
    tbl_sizes: List[int] = field(default_factory=list)
    pcrl_hits: int = 0
    pcrl_left_after_expiry: int = 0
    honest_refreshes: int = 0
    honest_failures: int = 0


def _clone_of(victim: VehicleAgent, dep: Deployment) -> VehicleAgent:
    """An attacker holding copies of the victim's tokens but its own PC keys."""
    return VehicleAgent(victim.ec, victim.key, victim.vk_ca, victim.t_minutes, dep.clock,
                        dep._bytes, tokens=dict(victim.tokens))


def _blacklisted_everywhere(dep: Deployment, token_id: bytes, window: int) -> bool:
    for h in dep.rsus:
        if not any(e.id_at(window) == token_id for e in h.node.tbl.values()):
            return False
    return True


def run_clone_scenario(seed: int, t_minutes: int = 15, regions: int = 3, fleet: int = 20,
                       windows: int = 6, clone_window: int = 2) -> CloneRun:
    """Redeem one token in two regions, then watch the owner get locked out.

    Honest vehicles refresh once per window in their home region. In
    ``clone_window`` the victim and a clone redeem the same token in
    regions 0 and 1. Afterwards both try every RSU each window; any
    success is an escape.
    """
    if regions < 2:
        raise ValueError("a clone needs two regions")
    dep = Deployment(seed=seed, t_minutes=t_minutes, regions=regions)
    start = dep.window_index
    agents = [dep.new_vehicle() for _ in range(fleet)]
    for a in agents:
        dep.issue_tokens(a, windows + 1, verify=False)
    victim, clone = agents[0], _clone_of(agents[0], dep)
    out = CloneRun(seed)
    ticks = 0
    clone_token = None
    for step in range(windows):
        w = dep.window_index
        for i, a in enumerate(agents[1:], 1):
            h = dep.rsus_in(region_id(i % regions))[0]
            res = a.refresh_pc(h.pseudo)
            if res.status is RefreshStatus.REFRESHED:
                out.honest_refreshes += 1
            else:
                out.honest_failures += 1
        if step == clone_window:
            clone_token = victim.tokens[w].id
            victim.refresh_pc(dep.rsus_in(region_id(0))[0].pseudo)
            clone.refresh_pc(dep.rsus_in(region_id(1))[0].pseudo)
            ticks = 0
        elif step > clone_window:
            for agent in (victim, clone):
                for h in dep.rsus:
                    out.attempts_after += 1
                    if agent.refresh_pc(h.pseudo).status is RefreshStatus.REFRESHED:
                        out.escapes += 1
        notices_before = dep.notices_delivered
        dep.report_cycle()
        ticks += 1
        if clone_token is not None and not out.detected and dep.backend.stats.clones:
            out.detected = True
            out.detect_ticks = ticks
            delivered = dep.notices_delivered > notices_before
            if delivered and _blacklisted_everywhere(dep, victim.tokens[w + 1].id, w + 1):
                out.blacklist_ticks = ticks + 1
            for r in range(regions):
                snap = dep.rsus_in(region_id(r))[0].node.serve_pcrl()
                out.pcrl_hits += len(snap)
        if step == clone_window + 1:
            out.tbl_sizes = [len(h.node.tbl) for h in dep.rsus]
            out.pcrl_left_after_expiry = sum(len(h.node.serve_pcrl()) for h in dep.rsus)
        dep.advance_window()
    assert dep.window_index == start + windows
    return out


@dataclass
class TblRun:
    revoked: int
    tokens_left: int
    tbl_sizes: List[int]
    revoked_ids_per_rsu: List[int]


def run_tbl_compactness(seed: int, k: int, m: int, fleet: Optional[int] = None,
                        regions: int = 2) -> TblRun:
    """Revoke ``k`` vehicles that each still hold ``m`` tokens."""
    fleet = k + 2 if fleet is None else fleet
    dep = Deployment(seed=seed, regions=regions)
    agents = [dep.new_vehicle() for _ in range(fleet)]
    for a in agents:
        dep.issue_tokens(a, m, verify=False)
    w = dep.window_index
    for a in agents[:k]:
        res = dep.ca_client.revoke(RevokeCommand(a.tokens[w].id, []))
        dep._fanout(res.notice)
    return TblRun(k, m, [len(h.node.tbl) for h in dep.rsus],
                  [len(h.node.revoked_ids(w)) for h in dep.rsus])


def clone_summary(runs: List[CloneRun]) -> Dict[str, float]:
    n = len(runs)
    return {
        "runs": n,
        "detected": sum(r.detected for r in runs),
        "escapes": sum(r.escapes for r in runs),
        "max_detect_ticks": max((r.detect_ticks or 0) for r in runs) if n else 0,
        "max_blacklist_ticks": max((r.blacklist_ticks or 10**9) for r in runs) if n else 0,
        "tbl_max": max((max(r.tbl_sizes) if r.tbl_sizes else 0) for r in runs) if n else 0,
        "pcrl_left_after_expiry": sum(r.pcrl_left_after_expiry for r in runs),
    }
