"""On-board unit state machine.

The agent never talks to the network directly. It is handed endpoint
callables (in-process node methods or wire clients), plus a clock, so the
same code runs inside the simulator and against live services.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Set

from . import codec, core, crypto
from .errors import ProtocolError
from .records import (
    EnrollmentCert,
    PcrlSnapshot,
    PseudonymCert,
    SignedMessage,
    Token,
    ValidityRequest,
)

log = logging.getLogger(__name__)

PseudoEndpoint = Callable[[Token, bytes], PseudonymCert]
PcrlEndpoint = Callable[[], PcrlSnapshot]


class RefreshStatus(enum.Enum):
    REFRESHED = "refreshed"
    KEPT_OLD = "kept_old"
    FAILED = "failed"


@dataclass(frozen=True)
class RefreshResult:
    status: RefreshStatus
    reason: str = ""

    def __str__(self):
        return f"{self.status.value}({self.reason})" if self.reason else self.status.value


class DownloadStatus(enum.Enum):
    COMPLETE = "complete"
    TRUNCATED = "truncated"


class AgentError(Exception):
    pass


@dataclass
class HeldPC:
    pc: PseudonymCert
    keys: crypto.SigningKeyPair

    @property
    def window_index(self) -> int:
        return self.pc.body.tw.index


@dataclass
class VehicleAgent:
    ec: EnrollmentCert
    key: crypto.SigningKeyPair
    vk_ca: bytes
    t_minutes: int = core.DEFAULT_T_MINUTES
    clock: Callable[[], float] = time.time
    rng: Callable[[int], bytes] = os.urandom
    tokens: Dict[int, Token] = field(default_factory=dict)
    spent: Set[int] = field(default_factory=set)
    current: Optional[HeldPC] = None
    pcrl: Optional[PcrlSnapshot] = None
    history: list = field(default_factory=list)

    @classmethod
    def enroll(cls, enroll_fn: Callable[[bytes], EnrollmentCert], vk_ca: bytes,
               seed: Optional[bytes] = None, **kwargs) -> "VehicleAgent":
        key = crypto.keygen(seed if seed is not None else os.urandom(32))
        ec = enroll_fn(key.verification_key)
        if not core.verify_ec(ec, vk_ca) or ec.vk_v != key.verification_key:
            raise AgentError("CA returned an enrollment certificate that does not verify")
        return cls(ec, key, vk_ca, **kwargs)

    # -- tokens --------------------------------------------------------------

    def token_request(self, start_s: int, end_s: int):
        req = ValidityRequest(start_s, end_s)
        return self.ec, req, crypto.sign(self.key, codec.encode(req))

    def request_tokens(self, token_gen: Callable, start_s: int, end_s: int) -> int:
        """Ask the CA for tokens covering ``[start_s, end_s)``; returns how many were stored."""
        tokens = token_gen(*self.token_request(start_s, end_s))
        return self.store_tokens(tokens)

    def store_tokens(self, tokens: Iterable[Token], verify: bool = True) -> int:
        n = 0
        for tau in tokens:
            if verify and core.validate_token(
                    tau, tau.tw.start_s, self.vk_ca) is not core.TokenStatus.OK:
                raise AgentError("CA issued a token that does not verify")
            idx = tau.tw.index
            if idx in self.tokens and self.tokens[idx] != tau:
                raise AgentError(f"second token for window {idx}")
            self.tokens[idx] = tau
            n += 1
        return n

    def window_index(self, now_s: Optional[float] = None) -> int:
        now_s = self.clock() if now_s is None else now_s
        return int(now_s // (60 * self.t_minutes))

    def _drop_stale(self, w: int) -> None:
        for idx in [i for i in self.tokens if i < w]:
            del self.tokens[idx]
        self.spent = {i for i in self.spent if i >= w}

    # -- PCs -----------------------------------------------------------------

    def refresh_pc(self, endpoint: Optional[PseudoEndpoint]) -> RefreshResult:
        """Try to swap the current-window token for a fresh PC.

        ``endpoint`` is None when no RSU is in range. A failure leaves any
        previously held PC in place.
        """
        now = self.clock()
        w = self.window_index(now)
        self._drop_stale(w)
        if self.current is not None and self.current.window_index == w:
            return self._note(RefreshResult(RefreshStatus.KEPT_OLD, "already_current"))
        tau = self.tokens.get(w)
        if tau is None or w in self.spent:
            return self._note(RefreshResult(RefreshStatus.FAILED, "no_token"))
        if endpoint is None:
            return self._note(RefreshResult(RefreshStatus.FAILED, "timeout"))
        keys = crypto.keygen(self.rng(32))
        try:
            pc = endpoint(tau, keys.verification_key)
        except TimeoutError:
            return self._note(RefreshResult(RefreshStatus.FAILED, "timeout"))
        except ProtocolError as exc:
            if exc.code == core.IssueError.TOKEN_ALREADY_USED:
                self.spent.add(w)
            return self._note(RefreshResult(RefreshStatus.FAILED, f"rsu_rejected:{exc.code}"))
        body = pc.body
        if (body.vk != keys.verification_key or body.tw != tau.tw
                or not core.verify_pc_chain(pc, self.vk_ca)):
            return self._note(RefreshResult(RefreshStatus.FAILED, "rsu_rejected:bad_pc"))
        self.spent.add(w)
        del self.tokens[w]
        self.current = HeldPC(pc, keys)
        return self._note(RefreshResult(RefreshStatus.REFRESHED))

    def _note(self, res: RefreshResult) -> RefreshResult:
        self.history.append((self.clock(), str(res)))
        return res

    # -- V2V -----------------------------------------------------------------

    def broadcast(self, payload: bytes) -> SignedMessage:
        if self.current is None:
            raise AgentError("no pseudonym certificate held")
        return core.sign_v2v(self.current.keys, self.current.pc, payload)

    @property
    def region(self) -> Optional[bytes]:
        return None if self.current is None else self.current.pc.body.region

    def receive(self, msg: SignedMessage, here: Optional[bytes] = None) -> core.V2VStatus:
        here = self.region if here is None else here
        if here is None:
            raise AgentError("receiver region unknown")
        revoked = self.pcrl.hash_set() if self.pcrl is not None else frozenset()
        return core.verify_v2v(msg, self.clock(), here, self.vk_ca, revoked)

    # -- PCRL ----------------------------------------------------------------

    def download_pcrl(self, endpoint: Optional[PcrlEndpoint], budget_bytes: float) -> DownloadStatus:
        """Fetch the RSU's list if it fits in ``budget_bytes``; otherwise keep the old one."""
        if endpoint is None:
            raise TimeoutError("no RSU in range")
        snap = endpoint()
        if len(codec.encode(snap)) > budget_bytes:
            return DownloadStatus.TRUNCATED
        if snap.is_signed:
            if not crypto.verify(self.vk_ca, snap.signed_part(), snap.sigma):
                raise AgentError("PCRL signature does not verify")
        elif len(snap):
            raise AgentError("unsigned PCRL with entries")
        self.pcrl = snap
        return DownloadStatus.COMPLETE

    # -- persistence ---------------------------------------------------------

    def save(self, path: Path) -> None:
        state = {
            "ec": codec.encode(self.ec).hex(),
            "seed": self.key.signing_key.hex(),
            "vk_ca": self.vk_ca.hex(),
            "t_minutes": self.t_minutes,
            "tokens": [codec.encode(t).hex() for _, t in sorted(self.tokens.items())],
            "spent": sorted(self.spent),
        }
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(json.dumps(state, indent=1, sort_keys=True))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Path, **kwargs) -> "VehicleAgent":
        state = json.loads(Path(path).read_text())
        agent = cls(codec.decode(bytes.fromhex(state["ec"]), EnrollmentCert),
                    crypto.keygen(bytes.fromhex(state["seed"])),
                    bytes.fromhex(state["vk_ca"]), t_minutes=state["t_minutes"], **kwargs)
        agent.store_tokens(codec.decode(bytes.fromhex(h), Token) for h in state["tokens"])
        agent.spent = set(state["spent"])
        return agent
