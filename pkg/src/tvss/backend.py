"""RSU backend: collects redemption reports and revokes cloned tokens.

A token redeemed twice with different (region, rsu, pc) triples inside the
look-back horizon is a clone. Detection latches per token, so at most one
revocation is issued per token.
"""

from __future__ import annotations

import collections
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Set, Tuple

from . import codec
from .records import (
    PcrlEntry,
    PcrlSnapshot,
    RevokeCommand,
    RevokeNotice,
    RevokeResult,
    TokenReport,
)

log = logging.getLogger(__name__)

DEFAULT_LOOKBACK = 4

Redemption = Tuple[bytes, bytes, bytes]


@dataclass(frozen=True)
class IngestResult:
    clone: bool
    token_id: bytes = b""
    regions: Tuple[bytes, ...] = ()

    @classmethod
    def ok(cls) -> "IngestResult":
        return cls(False)


@dataclass
class BackendStats:
    ingested: int = 0
    duplicates: int = 0
    dropped: int = 0
    seq_gaps: int = 0
    clones: int = 0
    revocations: int = 0
    revoke_failures: int = 0


@dataclass
class _PendingRevocation:
    command: RevokeCommand
    attempts: int = 0
    regions: Set[bytes] = field(default_factory=set)


class BackendMonitor:
    """Single-consumer report processor.

    ``revoke`` sends a :class:`RevokeCommand` to the CA; ``fanout_notice``
    and ``push_pcrl`` deliver results to RSUs. All three may raise on
    transport errors; revocations are retried with exponential backoff and
    kept for the next cycle if every attempt fails.
    """

    def __init__(self, revoke: Callable[[RevokeCommand], RevokeResult],
                 fanout_notice: Callable[[RevokeNotice], None],
                 push_pcrl: Callable[[PcrlSnapshot], None],
                 t_minutes: int = 15, lookback: int = DEFAULT_LOOKBACK,
                 retries: int = 5, backoff_s: float = 0.05,
                 sleep: Callable[[float], None] = time.sleep):
        self._revoke = revoke
        self._fanout = fanout_notice
        self._push = push_pcrl
        self.t_minutes = t_minutes
        self.lookback = lookback
        self.retries = retries
        self.backoff_s = backoff_s
        self._sleep = sleep
        self.index: Dict[int, Dict[bytes, Set[Redemption]]] = {}
        self.latched: Set[bytes] = set()
        self.last_seq: Dict[bytes, int] = {}
        self.stats = BackendStats()
        self.window_index = 0
        self._queue: Deque = collections.deque()
        self._qlock = threading.Lock()
        self._pending: List[_PendingRevocation] = []
        self.revoked_tokens: List[bytes] = []

    # -- intake --------------------------------------------------------------

    def enqueue(self, item) -> None:
        """Queue a :class:`TokenReport` or its canonical encoding."""
        with self._qlock:
            self._queue.append(item)

    def queued(self) -> int:
        return len(self._queue)

    def ingest(self, report: TokenReport) -> IngestResult:
        prev = self.last_seq.get(report.rsu_id, 0)
        if report.seq > prev + 1:
            self.stats.seq_gaps += report.seq - prev - 1
            log.warning("rsu %s skipped %d report(s)", report.rsu_id.hex(), report.seq - prev - 1)
        if report.seq > prev:
            self.last_seq[report.rsu_id] = report.seq
        if report.window_index > self.window_index:
            self._advance(report.window_index)
        if report.window_index < self.window_index - self.lookback:
            self.stats.dropped += 1
            return IngestResult.ok()
        self.stats.ingested += 1
        seen = self.index.setdefault(report.window_index, {}).setdefault(report.token_id, set())
        item = (report.region, report.rsu_id, report.pc_body_hash)
        if item in seen:
            self.stats.duplicates += 1
            return IngestResult.ok()
        seen.add(item)
        if len(seen) < 2 or report.token_id in self.latched:
            return IngestResult.ok()
        self.latched.add(report.token_id)
        self.stats.clones += 1
        regions = tuple(sorted({r for r, _, _ in seen}))
        log.info("clone detected for token %s in %d region(s)", report.token_id.hex()[:16],
                 len(regions))
        return IngestResult(True, report.token_id, regions)

    def _advance(self, window_index: int) -> None:
        self.window_index = window_index
        for w in [w for w in self.index if w < window_index - self.lookback]:
            del self.index[w]

    def advance_window(self, window_index: int) -> None:
        if window_index > self.window_index:
            self._advance(window_index)

    def offending_entries(self, token_id: bytes) -> List[PcrlEntry]:
        span = 60 * self.t_minutes
        out = []
        for w, tokens in sorted(self.index.items()):
            for region, _, pc_hash in sorted(tokens.get(token_id, ())):
                out.append(PcrlEntry(pc_hash, region, (w + 1) * span))
        return out

    def process_pending(self) -> List[IngestResult]:
        """Drain the queue, then run any revocations it triggered."""
        results = []
        while True:
            with self._qlock:
                if not self._queue:
                    break
                item = self._queue.popleft()
            if not isinstance(item, TokenReport):
                try:
                    item = codec.decode(item, TokenReport)
                except codec.CodecError as exc:
                    self.stats.dropped += 1
                    log.warning("dropping undecodable report: %s", exc)
                    continue
            res = self.ingest(item)
            results.append(res)
            if res.clone:
                self.on_clone(res.token_id)
        self._retry_pending()
        return results

    # -- revocation ----------------------------------------------------------

    def on_clone(self, token_id: bytes) -> None:
        entries = self.offending_entries(token_id)
        job = _PendingRevocation(RevokeCommand(token_id, entries), 0, {e.region for e in entries})
        if not self._run(job):
            self._pending.append(job)

    def _retry_pending(self) -> None:
        jobs, self._pending = self._pending, []
        for job in jobs:
            if not self._run(job):
                self._pending.append(job)

    def _run(self, job: _PendingRevocation) -> bool:
        delay = self.backoff_s
        for attempt in range(self.retries):
            job.attempts += 1
            try:
                result = self._revoke(job.command)
                break
            except Exception as exc:
                log.warning("revoke attempt %d failed: %s", job.attempts, exc)
                if attempt + 1 < self.retries:
                    self._sleep(delay)
                    delay *= 2
        else:
            self.stats.revoke_failures += 1
            return False
        self.stats.revocations += 1
        self.revoked_tokens.append(job.command.token_id)
        if result.notice is not None:
            self._fanout(result.notice)
        for snap in result.snapshots:
            self._push(snap)
        return True

    @property
    def pending_revocations(self) -> int:
        return len(self._pending)
