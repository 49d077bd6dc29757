"""Certificate authority node.

Holds the vehicle registry, issues enrollment certificates and token
batches, keeps a rolling index from current token ids to vehicles, and
builds revocation notices and regional PCRL snapshots.

Each vehicle costs one :class:`ChainHeads` of chain storage. The heads are
a cursor kept one window behind the current window, which is exactly what
a revocation has to reveal.
"""

from __future__ import annotations

import logging
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

from . import codec, core, crypto
from .codec import BYTES, U64, record
from .errors import ProtocolError
from .records import (
    EnrollmentCert,
    PcrlEntry,
    PcrlSnapshot,
    PseudonymCert,
    RevokeNotice,
    RsuCert,
    Token,
    ValidityRequest,
    pcrl_entry_for,
)
from .tokenchain import ChainHeads, advance_to, extend, reveal_for

log = logging.getLogger(__name__)

DEFAULT_LOOKBACK = 4
MAX_BATCH_WINDOWS = 366 * 96


class CAError(ProtocolError):
    pass


@dataclass
class VehicleRecord:
    ec: EnrollmentCert
    heads: ChainHeads
    issued_ranges: List[Tuple[int, int]] = field(default_factory=list)
    revoked: bool = False

    @property
    def last_index(self) -> Optional[int]:
        return self.issued_ranges[-1][1] if self.issued_ranges else None

    def covers(self, index: int) -> bool:
        return any(a <= index <= b for a, b in self.issued_ranges)

    def overlaps(self, first: int, last: int) -> bool:
        return any(a <= last and first <= b for a, b in self.issued_ranges)


@dataclass
class CurrentIdIndex:
    window_index: int
    entries: Dict[bytes, bytes] = field(default_factory=dict)


# -- persistence records -----------------------------------------------------

@record(0x31, (("ec", EnrollmentCert), ("x", BYTES), ("r", BYTES), ("first_window", U64)))
@dataclass(frozen=True)
class _LogEnroll:
    """Setup heads sit one position before ``first_window``."""

    ec: EnrollmentCert
    x: bytes
    r: bytes
    first_window: int


@record(0x32, (("vk", BYTES), ("first", U64), ("last", U64)))
@dataclass(frozen=True)
class _LogIssue:
    vk: bytes
    first: int
    last: int


@record(0x33, (("vk", BYTES),))
@dataclass(frozen=True)
class _LogRevoke:
    vk: bytes


@record(0x34, (("index", U64),))
@dataclass(frozen=True)
class _LogWindow:
    index: int


@record(0x35, (("cert", RsuCert),))
@dataclass(frozen=True)
class _LogRsu:
    cert: RsuCert


@record(0x36, (("entry", PcrlEntry), ("window_index", U64)))
@dataclass(frozen=True)
class _LogPcrl:
    entry: PcrlEntry
    window_index: int


class CertificateAuthority:
    """Stateful CA. All mutations run under one re-entrant lock."""

    def __init__(self, key: crypto.SigningKeyPair, t_minutes: int = core.DEFAULT_T_MINUTES,
                 window_index: int = 0, lookback: int = DEFAULT_LOOKBACK,
                 log_path: Optional[Path] = None, rng=os.urandom):
        if t_minutes < 1 or lookback < 1:
            raise ValueError("t_minutes and lookback must be >= 1")
        self.key = key
        self.t_minutes = t_minutes
        self.lookback = lookback
        self._rng = rng
        self._lock = threading.RLock()
        self.vehicles: Dict[bytes, VehicleRecord] = {}
        self.blacklist: Set[bytes] = set()
        self.rsus: Dict[bytes, RsuCert] = {}
        self.window_index = window_index
        self.current = CurrentIdIndex(window_index)
        self._ring: "OrderedDict[int, Dict[bytes, bytes]]" = OrderedDict()
        self._pcrl: Dict[Tuple[bytes, int], Set[bytes]] = {}
        self._log_path = log_path
        self._log_fh = None
        self._replaying = False
        if log_path is not None:
            fresh = not Path(log_path).exists() or Path(log_path).stat().st_size == 0
            self._replay(log_path)
            self._log_fh = open(log_path, "ab")
            if fresh:
                self._append(_LogWindow(window_index))
        self._rebuild_index()

    @property
    def vk(self) -> bytes:
        return self.key.verification_key

    # -- persistence ---------------------------------------------------------

    def _append(self, rec) -> None:
        if self._log_fh is None or self._replaying:
            return
        self._log_fh.write(codec.frame(rec.TAG, codec.encode(rec)))
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def _replay(self, path: Path) -> None:
        if not path.exists():
            return
        self._replaying = True
        good = 0
        torn = False
        try:
            with open(path, "rb") as fh:
                while True:
                    try:
                        got = codec.read_frame(fh)
                    except EOFError:
                        torn = True
                        break
                    if got is None:
                        break
                    rec = codec.decode(got[1])
                    self._apply(rec)
                    good = fh.tell()
        finally:
            self._replaying = False
        if torn:
            # drop the partial write so new records do not land behind it
            log.warning("truncating torn record at end of %s", path)
            with open(path, "r+b") as fh:
                fh.truncate(good)

    def _apply(self, rec) -> None:
        if isinstance(rec, _LogEnroll):
            self.vehicles[rec.ec.vk_v] = VehicleRecord(
                rec.ec, ChainHeads(rec.x, rec.r, rec.first_window - 1))
        elif isinstance(rec, _LogIssue):
            v = self.vehicles[rec.vk]
            v.issued_ranges.append((rec.first, rec.last))
            v.issued_ranges.sort()
            w = self.window_index
            if rec.first <= w <= rec.last and v.heads.index == w - 1:
                self.current.entries[v.heads.next_id] = rec.vk
        elif isinstance(rec, _LogRevoke):
            v = self.vehicles[rec.vk]
            v.revoked = True
            self.blacklist.add(v.ec.digest())
            self.current.entries = {k: o for k, o in self.current.entries.items() if o != rec.vk}
        elif isinstance(rec, _LogWindow):
            if rec.index != self.window_index:
                self._ring[self.window_index] = self.current.entries
                while len(self._ring) > self.lookback:
                    self._ring.popitem(last=False)
            self.window_index = rec.index
            self._roll_cursors()
            self._prune_pcrl()
            self._rebuild_index()
        elif isinstance(rec, _LogRsu):
            self.rsus[rec.cert.rsu_id] = rec.cert
        elif isinstance(rec, _LogPcrl):
            self._pcrl.setdefault((rec.entry.region, rec.window_index), set()).add(rec.entry.pc_hash)
        else:
            raise codec.CodecError(f"unexpected log record {type(rec).__name__}")

    @classmethod
    def open_state(cls, state_dir: Path, **kwargs) -> "CertificateAuthority":
        """Load or create a CA whose key and log live under ``state_dir``."""
        state_dir = Path(state_dir)
        state_dir.mkdir(parents=True, exist_ok=True)
        key_file = state_dir / "ca.key"
        if key_file.exists():
            seed = bytes.fromhex(key_file.read_text().strip())
        else:
            seed = os.urandom(32)
            key_file.write_text(seed.hex() + "\n")
            key_file.chmod(0o600)
        return cls(crypto.keygen(seed), log_path=state_dir / "ca.log", **kwargs)

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- enrollment and RSUs -------------------------------------------------

    def enroll(self, vk_v: bytes) -> EnrollmentCert:
        with self._lock:
            if vk_v in self.vehicles:
                raise CAError("already_enrolled")
            ec = core.setup(vk_v, self.key)
            rec = _LogEnroll(ec, self._rng(32), self._rng(32), self.window_index)
            self._append(rec)
            self._apply(rec)
            return ec

    def register_rsu(self, rsu_id: bytes, vk: bytes, region: bytes) -> RsuCert:
        with self._lock:
            cert = core.make_rsu_cert(rsu_id, vk, region, self.key)
            rec = _LogRsu(cert)
            self._append(rec)
            self._apply(rec)
            return cert

    # -- tokens --------------------------------------------------------------

    def _window_bounds(self, req: ValidityRequest) -> Tuple[int, int]:
        span = 60 * self.t_minutes
        if req.end_s <= req.start_s or req.start_s % span or req.end_s % span:
            raise CAError("invalid_request", "span must cover whole windows")
        first, end = req.start_s // span, req.end_s // span
        if end - first > MAX_BATCH_WINDOWS:
            raise CAError("invalid_request", "span too long")
        return first, end - 1

    def token_gen(self, ec: EnrollmentCert, req: ValidityRequest, proof: bytes) -> List[Token]:
        """Issue one token per window of ``req``; atomic with respect to overlap."""
        with self._lock:
            v = self.vehicles.get(ec.vk_v)
            if v is None or v.ec != ec:
                raise CAError("unknown_ec")
            if not crypto.verify(ec.vk_v, codec.encode(req), proof):
                raise CAError("bad_proof")
            if v.revoked or ec.digest() in self.blacklist:
                raise CAError("ec_revoked")
            first, last = self._window_bounds(req)
            if first < self.window_index or first <= v.heads.index:
                raise CAError("stale_window", f"first window {first} already past")
            if v.overlaps(first, last):
                raise CAError("overlap")
            ids, _ = extend(v.heads, last - v.heads.index)
            ids = ids[first - v.heads.index - 1:]
            rec = _LogIssue(ec.vk_v, first, last)
            self._append(rec)
            self._apply(rec)
        return core.sign_tokens(ids, first, self.t_minutes, self.key)

    # -- windows -------------------------------------------------------------

    def _roll_cursors(self) -> None:
        target = self.window_index - 1
        for v in self.vehicles.values():
            if v.heads.index < target and not v.revoked:
                v.heads = advance_to(v.heads, target)

    def _rebuild_index(self) -> None:
        w = self.window_index
        entries = {}
        for vk, v in self.vehicles.items():
            if v.revoked or not v.covers(w):
                continue
            heads = v.heads if v.heads.index >= w - 1 else advance_to(v.heads, w - 1)
            if heads.index == w - 1:
                entries[heads.next_id] = vk
        self.current = CurrentIdIndex(w, entries)

    def _prune_pcrl(self) -> None:
        for key in [k for k in self._pcrl if k[1] < self.window_index]:
            del self._pcrl[key]

    def advance_window(self, new_index: int) -> CurrentIdIndex:
        with self._lock:
            if new_index != self.window_index + 1:
                raise CAError("bad_window", f"expected {self.window_index + 1}, got {new_index}")
            rec = _LogWindow(new_index)
            self._append(rec)
            self._apply(rec)
            return self.current

    def find_owner(self, token_id: bytes) -> Optional[bytes]:
        with self._lock:
            owner = self.current.entries.get(token_id)
            if owner is None:
                for entries in reversed(self._ring.values()):
                    owner = entries.get(token_id)
                    if owner is not None:
                        break
            return owner

    # -- revocation ----------------------------------------------------------

    def _notice_for(self, v: VehicleRecord) -> Optional[RevokeNotice]:
        w = self.window_index
        last = v.last_index
        if last is None or last < w:
            return None
        heads = advance_to(v.heads, w - 1) if v.heads.index < w - 1 else v.heads
        pair = reveal_for(heads, w, last)
        unsigned = RevokeNotice(pair.x_prev, pair.r_prev, pair.first_index, pair.last_index,
                                bytes(crypto.SIG_SIZE))
        return RevokeNotice(pair.x_prev, pair.r_prev, pair.first_index, pair.last_index,
                            crypto.sign(self.key, unsigned.signed_part()))

    def _revoke_vehicle(self, vk: bytes) -> Optional[RevokeNotice]:
        v = self.vehicles[vk]
        heads = v.heads
        if heads.index < self.window_index - 1:
            v.heads = heads = advance_to(heads, self.window_index - 1)
        notice = self._notice_for(v)
        if not v.revoked:
            rec = _LogRevoke(vk)
            self._append(rec)
            self._apply(rec)
        return notice

    def revoke_vehicle(self, vk: bytes) -> Optional[RevokeNotice]:
        """Operator revocation by enrollment key."""
        with self._lock:
            if vk not in self.vehicles:
                raise CAError("unknown_ec")
            return self._revoke_vehicle(vk)

    def revoke_by_token(self, token_id: bytes,
                        offending: Iterable[Union[PseudonymCert, PcrlEntry]] = ()
                        ) -> Tuple[Optional[RevokeNotice], List[PcrlSnapshot]]:
        """Revoke the owner of ``token_id`` and blacklist its PCs regionally.

        ``offending`` holds PCs or ready-made PCRL entries. The notice covers
        the current window through the end of the owner's issued tokens, or
        is None when no tokens remain.
        """
        span = 60 * self.t_minutes
        with self._lock:
            owner = self.find_owner(token_id)
            if owner is None:
                raise CAError("unknown_token")
            notice = self._revoke_vehicle(owner)
            touched = set()
            for item in offending:
                entry = pcrl_entry_for(item) if isinstance(item, PseudonymCert) else item
                if entry.expires_s % span or entry.expires_s == 0:
                    raise CAError("invalid_request", "PCRL expiry must end a window")
                index = entry.expires_s // span - 1
                if index < self.window_index:
                    continue
                rec = _LogPcrl(entry, index)
                self._append(rec)
                self._apply(rec)
                touched.add((entry.region, index))
            snaps = [self.pcrl_snapshot(region, idx) for region, idx in sorted(touched)]
            log.info("revoked vehicle via token %s, notice=%s, regions=%d",
                     token_id.hex()[:16], notice is not None, len(snaps))
            return notice, snaps

    def pcrl_snapshot(self, region: bytes, window_index: Optional[int] = None) -> PcrlSnapshot:
        """Signed list for one region and window; empty once the window has passed."""
        with self._lock:
            if window_index is None:
                window_index = self.window_index
            hashes = sorted(self._pcrl.get((region, window_index), ()))
            unsigned = PcrlSnapshot(region, window_index, b"".join(hashes), bytes(crypto.SIG_SIZE))
            return PcrlSnapshot(region, window_index, unsigned.entries,
                                crypto.sign(self.key, unsigned.signed_part()))

    def is_blacklisted(self, ec: EnrollmentCert) -> bool:
        return ec.digest() in self.blacklist
