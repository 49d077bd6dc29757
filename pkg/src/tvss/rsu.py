"""Road-side unit: exchanges tokens for pseudonym certificates.

Keeps a used-token log per window, a token blacklist with one entry per
revoked vehicle, and the latest regional PCRL. Every successful issuance
queues a report for the backend's clone check.
"""

from __future__ import annotations

import collections
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Deque, Dict, List, Optional, Set, Tuple

from . import core, crypto
from .records import (
    PcrlSnapshot,
    PseudonymCert,
    RevokeNotice,
    RsuCert,
    Token,
    TokenReport,
)
from .tokenchain import ChainHeads, advance_to

log = logging.getLogger(__name__)

DEFAULT_SKEW_S = 30


class NoticeRejected(Exception):
    pass


@dataclass
class TblEntry:
    """One revoked vehicle. ``heads`` trail the RSU's current window by one."""

    x_prev: bytes
    r_prev: bytes
    first_index: int
    last_index: int
    heads: ChainHeads

    @property
    def key(self) -> Tuple[bytes, bytes, int, int]:
        return (self.x_prev, self.r_prev, self.first_index, self.last_index)

    def id_at(self, index: int) -> Optional[bytes]:
        if not self.first_index <= index <= self.last_index or index < self.heads.index:
            return None
        if index == self.heads.index:
            return self.heads.x
        return advance_to(self.heads, index - 1).next_id

    @property
    def current_id(self) -> Optional[bytes]:
        return self.id_at(self.heads.index + 1)

    def exhausted(self, window_index: int) -> bool:
        return window_index > self.last_index


class RoadSideUnit:
    def __init__(self, cert: RsuCert, key: crypto.SigningKeyPair, vk_ca: bytes,
                 t_minutes: int = core.DEFAULT_T_MINUTES, window_index: int = 0,
                 skew_s: int = DEFAULT_SKEW_S, clock: Callable[[], float] = time.time):
        if key.verification_key != cert.vk:
            raise ValueError("key does not match RSU certificate")
        self.cert = cert
        self.key = key
        self.vk_ca = vk_ca
        self.t_minutes = t_minutes
        self.skew_s = skew_s
        self.clock = clock
        self.window_index = window_index
        self._lock = threading.RLock()
        self.tbl: Dict[tuple, TblEntry] = {}
        self.utl: Dict[int, Set[bytes]] = collections.defaultdict(set)
        self._revoked_cache: Dict[int, Set[bytes]] = {}
        self._pcrl: Optional[PcrlSnapshot] = None
        self._seq = 0
        self._outbox: Deque[TokenReport] = collections.deque()
        self.issued = 0

    @property
    def region(self) -> bytes:
        return self.cert.region

    @property
    def rsu_id(self) -> bytes:
        return self.cert.rsu_id

    # -- windows -------------------------------------------------------------

    def advance_window(self, new_index: int) -> None:
        with self._lock:
            if new_index != self.window_index + 1:
                raise ValueError(f"expected window {self.window_index + 1}, got {new_index}")
            self.window_index = new_index
            for k in [k for k, e in self.tbl.items() if e.exhausted(new_index)]:
                del self.tbl[k]
            for e in self.tbl.values():
                if e.heads.index < new_index - 1:
                    e.heads = advance_to(e.heads, new_index - 1)
            keep_from = new_index - 1 if self.skew_s > 0 else new_index
            for w in [w for w in self.utl if w < keep_from]:
                del self.utl[w]
            self._revoked_cache.clear()
            if self._pcrl is not None and self._pcrl.window_index < new_index:
                self._pcrl = None

    def tick(self, now_s: Optional[float] = None) -> None:
        """Advance windows until the RSU's window matches ``now_s``."""
        now_s = self.clock() if now_s is None else now_s
        target = core.window_of(now_s, self.t_minutes).index
        while self.window_index < target:
            self.advance_window(self.window_index + 1)

    # -- revocation state ----------------------------------------------------

    def apply_revoke_notice(self, notice: RevokeNotice) -> bool:
        """Add one TBL entry; returns False for duplicates or already-expired reveals."""
        if not crypto.verify(self.vk_ca, notice.signed_part(), notice.sigma):
            raise NoticeRejected("bad signature on revoke notice")
        with self._lock:
            key = (notice.x_prev, notice.r_prev, notice.first_index, notice.last_index)
            if key in self.tbl or notice.last_index < self.window_index:
                return False
            heads = ChainHeads(notice.x_prev, notice.r_prev, notice.first_index - 1)
            if heads.index < self.window_index - 1:
                heads = advance_to(heads, self.window_index - 1)
            self.tbl[key] = TblEntry(*key, heads)
            self._revoked_cache.clear()
            return True

    def revoked_ids(self, window_index: Optional[int] = None) -> Set[bytes]:
        with self._lock:
            w = self.window_index if window_index is None else window_index
            got = self._revoked_cache.get(w)
            if got is None:
                got = {i for i in (e.id_at(w) for e in self.tbl.values()) if i is not None}
                self._revoked_cache[w] = got
            return got

    def accept_pcrl(self, snap: PcrlSnapshot) -> bool:
        """Install a CA-signed regional snapshot for the current window."""
        if snap.region != self.region:
            return False
        if not crypto.verify(self.vk_ca, snap.signed_part(), snap.sigma):
            raise NoticeRejected("bad signature on PCRL snapshot")
        with self._lock:
            if snap.window_index != self.window_index:
                return False
            if self._pcrl is None or len(snap) >= len(self._pcrl):
                self._pcrl = snap
            return True

    def serve_pcrl(self) -> PcrlSnapshot:
        with self._lock:
            if self._pcrl is not None:
                return self._pcrl
            return PcrlSnapshot(self.region, self.window_index, b"", bytes(crypto.SIG_SIZE))

    # -- issuance ------------------------------------------------------------

    def _effective_now(self, tau: Token, now_s: float) -> float:
        tw = tau.content.tw
        if tw.start_s - self.skew_s <= now_s < tw.end_s + self.skew_s:
            return min(max(now_s, tw.start_s), tw.end_s - 1)
        return now_s

    def pseudo_gen(self, tau: Token, vehicle_vk: bytes, now_s: Optional[float] = None
                   ) -> PseudonymCert:
        """Issue a PC for ``tau``; raises :class:`core.IssueError`."""
        now_s = self.clock() if now_s is None else now_s
        w = tau.content.tw.index
        eff = self._effective_now(tau, now_s)
        with self._lock:
            pc = core.issue_pc(tau, vehicle_vk, self.cert, self.key, eff, self.vk_ca,
                               self.revoked_ids(w), self.utl.get(w, ()))
            self.utl[w].add(tau.id)
            self._seq += 1
            self.issued += 1
            self._outbox.append(TokenReport(tau.id, self.rsu_id, self.region, w,
                                            pc.body.digest(), self._seq))
        return pc

    # -- reporting -----------------------------------------------------------

    def pending_reports(self) -> List[TokenReport]:
        with self._lock:
            return list(self._outbox)

    def flush_reports(self, send: Callable[[TokenReport], None]) -> int:
        """Deliver queued reports in order; stops at the first failure and keeps the rest."""
        sent = 0
        while True:
            with self._lock:
                if not self._outbox:
                    return sent
                rep = self._outbox[0]
            try:
                send(rep)
            except Exception as exc:  # transport failure; retry on the next flush
                log.warning("report delivery failed, %d queued: %s", len(self._outbox), exc)
                return sent
            with self._lock:
                if self._outbox and self._outbox[0] is rep:
                    self._outbox.popleft()
            sent += 1
