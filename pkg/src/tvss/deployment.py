"""A whole network in one process: CA, RSUs, backend and vehicles.

Nodes talk through :class:`wire.Loopback`, so every request and reply is
framed and decoded exactly as on a socket. Time comes from a shared
:class:`SimClock` and all key material from one seeded generator, so a
given seed reproduces a run byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import core, crypto, services, wire
from .backend import BackendMonitor
from .ca import CertificateAuthority
from .records import PcrlSnapshot, RevokeNotice
from .rsu import RoadSideUnit
from .vehicle import VehicleAgent


@dataclass
class SimClock:
    now_s: float = 0.0

    def __call__(self) -> float:
        return self.now_s


def region_id(n: int) -> bytes:
    return n.to_bytes(8, "big")


@dataclass
class RsuHandle:
    node: RoadSideUnit
    client: wire.RSUClient
    link: wire.Loopback

    def pseudo(self, token, vk):
        return self.client.pseudo_gen(token, vk)


@dataclass
class Deployment:
    seed: int = 0
    t_minutes: int = core.DEFAULT_T_MINUTES
    regions: int = 2
    rsus_per_region: int = 1
    start_window: int = 1000
    lookback: int = 4
    skew_s: int = 30
    clock: SimClock = field(default_factory=SimClock)

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        span = 60 * self.t_minutes
        self.clock.now_s = self.start_window * span
        self.ca = CertificateAuthority(crypto.keygen(self._bytes(32)), self.t_minutes,
                                       self.start_window, self.lookback, rng=self._bytes)
        self.ca_link = wire.Loopback(services.ca_app(self.ca))
        self.ca_client = wire.CAClient(self.ca_link)
        self.rsus: List[RsuHandle] = []
        for r in range(self.regions):
            for k in range(self.rsus_per_region):
                key = crypto.keygen(self._bytes(32))
                rid = f"rsu-{r}-{k}".encode()
                cert = self.ca_client.register_rsu(rid, key.verification_key, region_id(r))
                node = RoadSideUnit(cert, key, self.ca.vk, self.t_minutes, self.start_window,
                                    self.skew_s, self.clock)
                link = wire.Loopback(services.rsu_app(node, auto_tick=False))
                self.rsus.append(RsuHandle(node, wire.RSUClient(link), link))
        self.backend = BackendMonitor(self.ca_client.revoke, self._fanout, self._push_pcrl,
                                      self.t_minutes, self.lookback, sleep=lambda s: None)
        self.backend.advance_window(self.start_window)
        self.backend_link = wire.Loopback(services.backend_app(self.backend))
        self.backend_client = wire.BackendClient(self.backend_link)
        self.report_cycles = 0
        self.notices_delivered = 0
        self._distribute_pcrls()

    def _bytes(self, n: int) -> bytes:
        return self.rng.getrandbits(8 * n).to_bytes(n, "big")

    @property
    def window_index(self) -> int:
        return self.ca.window_index

    def rsus_in(self, region: bytes) -> List[RsuHandle]:
        return [h for h in self.rsus if h.node.region == region]

    # -- fan-out -------------------------------------------------------------

    def _fanout(self, notice: RevokeNotice) -> None:
        for h in self.rsus:
            h.client.send_notice(notice)
        self.notices_delivered += 1

    def _push_pcrl(self, snap: PcrlSnapshot) -> None:
        for h in self.rsus_in(snap.region):
            h.client.push_pcrl(snap)

    def _distribute_pcrls(self) -> None:
        for r in range(self.regions):
            self._push_pcrl(self.ca.pcrl_snapshot(region_id(r)))

    # -- time ----------------------------------------------------------------

    def report_cycle(self) -> int:
        """Ship every RSU's queued reports to the backend and process them."""
        sent = sum(h.node.flush_reports(self.backend_client.report) for h in self.rsus)
        self.backend.process_pending()
        self.report_cycles += 1
        return sent

    def advance_window(self) -> int:
        new = self.ca.window_index + 1
        self.clock.now_s = new * 60 * self.t_minutes
        self.ca_client.advance_window(new)
        for h in self.rsus:
            h.client.advance_window(new)
        self.backend.advance_window(new)
        self._distribute_pcrls()
        return new

    def advance_time(self, seconds: float) -> None:
        """Move the clock forward, crossing window boundaries as needed."""
        target = self.clock.now_s + seconds
        span = 60 * self.t_minutes
        while (self.ca.window_index + 1) * span <= target:
            self.advance_window()
        self.clock.now_s = target

    # -- vehicles ------------------------------------------------------------

    def new_vehicle(self) -> VehicleAgent:
        return VehicleAgent.enroll(self.ca_client.enroll, self.ca.vk, seed=self._bytes(32),
                                   t_minutes=self.t_minutes, clock=self.clock, rng=self._bytes)

    def issue_tokens(self, agent: VehicleAgent, n_windows: int, start_window: Optional[int] = None,
                     verify: bool = True) -> int:
        span = 60 * self.t_minutes
        first = self.window_index if start_window is None else start_window
        ec, req, proof = agent.token_request(first * span, (first + n_windows) * span)
        return agent.store_tokens(self.ca_client.token_gen(ec, req, proof), verify=verify)
