"""Wire records shared by every node.

Tags 0x01..0x0B are the core registry. Tags from 0x0C up carry request and
response bodies for the node protocols.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .codec import BYTES, U64, ListOf, Optional_, encode, record, unsigned_bytes
from .crypto import DIGEST_SIZE, KEY_SIZE, SIG_SIZE, hash

REGION_SIZE = 8


def _check_len(name: str, value: bytes, size: int) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != size:
        raise ValueError(f"{name} must be {size} bytes")


@record(0x01, (("vk_v", BYTES), ("sigma_v", BYTES)))
@dataclass(frozen=True)
class EnrollmentCert:
    vk_v: bytes
    sigma_v: bytes

    def __post_init__(self):
        _check_len("vk_v", self.vk_v, KEY_SIZE)
        _check_len("sigma_v", self.sigma_v, SIG_SIZE)

    def signed_part(self) -> bytes:
        return unsigned_bytes(self, "sigma_v")

    def digest(self) -> bytes:
        return hash(encode(self))


@record(0x02, (("start_s", U64), ("end_s", U64)))
@dataclass(frozen=True, order=True)
class TimeWindow:
    """Half-open window ``[start_s, end_s)`` aligned to multiples of its length."""

    start_s: int
    end_s: int

    def __post_init__(self):
        length = self.end_s - self.start_s
        if length <= 0 or length % 60 or self.start_s % length:
            raise ValueError("window must be a positive whole-minute aligned span")

    @property
    def length_s(self) -> int:
        return self.end_s - self.start_s

    @property
    def index(self) -> int:
        return self.start_s // self.length_s

    @property
    def t_minutes(self) -> int:
        return self.length_s // 60

    def contains(self, now_s: float) -> bool:
        return self.start_s <= now_s < self.end_s

    @classmethod
    def at_index(cls, index: int, t_minutes: int) -> "TimeWindow":
        span = 60 * t_minutes
        return cls(index * span, (index + 1) * span)


@record(0x03, (("id", BYTES), ("tw", TimeWindow)))
@dataclass(frozen=True)
class TokenContent:
    id: bytes
    tw: TimeWindow

    def __post_init__(self):
        _check_len("id", self.id, DIGEST_SIZE)


@record(0x04, (("content", TokenContent), ("sigma", BYTES)))
@dataclass(frozen=True)
class Token:
    content: TokenContent
    sigma: bytes

    def __post_init__(self):
        _check_len("sigma", self.sigma, SIG_SIZE)

    @property
    def id(self) -> bytes:
        return self.content.id

    @property
    def tw(self) -> TimeWindow:
        return self.content.tw

    def signed_part(self) -> bytes:
        return encode(self.content)


@record(0x0B, (("rsu_id", BYTES), ("vk", BYTES), ("region", BYTES), ("sigma_ca", BYTES)))
@dataclass(frozen=True)
class RsuCert:
    rsu_id: bytes
    vk: bytes
    region: bytes
    sigma_ca: bytes

    def __post_init__(self):
        if not 1 <= len(self.rsu_id) <= 64:
            raise ValueError("rsu_id must be 1..64 bytes")
        _check_len("vk", self.vk, KEY_SIZE)
        _check_len("region", self.region, REGION_SIZE)
        _check_len("sigma_ca", self.sigma_ca, SIG_SIZE)

    def signed_part(self) -> bytes:
        return unsigned_bytes(self, "sigma_ca")


@record(0x05, (("vk", BYTES), ("region", BYTES), ("tw", TimeWindow)))
@dataclass(frozen=True)
class PseudonymCertBody:
    vk: bytes
    region: bytes
    tw: TimeWindow

    def __post_init__(self):
        _check_len("vk", self.vk, KEY_SIZE)
        _check_len("region", self.region, REGION_SIZE)

    def digest(self) -> bytes:
        return hash(encode(self))


@record(0x06, (("body", PseudonymCertBody), ("sigma_rsu", BYTES), ("rsu_cert", RsuCert)))
@dataclass(frozen=True)
class PseudonymCert:
    body: PseudonymCertBody
    sigma_rsu: bytes
    rsu_cert: RsuCert

    def __post_init__(self):
        _check_len("sigma_rsu", self.sigma_rsu, SIG_SIZE)


@record(0x07, (("x_prev", BYTES), ("r_prev", BYTES), ("first_index", U64),
               ("last_index", U64), ("sigma", BYTES)))
@dataclass(frozen=True)
class RevokeNotice:
    """Signed reveal pair letting RSUs derive a revoked vehicle's remaining ids."""

    x_prev: bytes
    r_prev: bytes
    first_index: int
    last_index: int
    sigma: bytes

    def __post_init__(self):
        _check_len("x_prev", self.x_prev, DIGEST_SIZE)
        _check_len("r_prev", self.r_prev, DIGEST_SIZE)
        _check_len("sigma", self.sigma, SIG_SIZE)
        if self.first_index > self.last_index:
            raise ValueError("first_index must not exceed last_index")

    def signed_part(self) -> bytes:
        return unsigned_bytes(self)


@record(0x08, (("pc_hash", BYTES), ("region", BYTES), ("expires_s", U64)))
@dataclass(frozen=True)
class PcrlEntry:
    pc_hash: bytes
    region: bytes
    expires_s: int

    def __post_init__(self):
        _check_len("pc_hash", self.pc_hash, DIGEST_SIZE)
        _check_len("region", self.region, REGION_SIZE)


@record(0x09, (("region", BYTES), ("window_index", U64), ("entries", BYTES), ("sigma", BYTES)))
@dataclass(frozen=True)
class PcrlSnapshot:
    """Regional, single-window revocation list.

    ``entries`` is the sorted concatenation of 32-byte PC body hashes, so
    the encoded size grows by exactly 32 bytes per entry. An all-zero
    ``sigma`` marks a placeholder that no CA signed.
    """

    region: bytes
    window_index: int
    entries: bytes
    sigma: bytes

    def __post_init__(self):
        _check_len("region", self.region, REGION_SIZE)
        _check_len("sigma", self.sigma, SIG_SIZE)
        if len(self.entries) % DIGEST_SIZE:
            raise ValueError("entries must be a whole number of digests")

    @property
    def hashes(self) -> List[bytes]:
        e = self.entries
        return [e[i:i + DIGEST_SIZE] for i in range(0, len(e), DIGEST_SIZE)]

    def hash_set(self) -> frozenset:
        return frozenset(self.hashes)

    def __len__(self):
        return len(self.entries) // DIGEST_SIZE

    @property
    def is_signed(self) -> bool:
        return self.sigma != bytes(SIG_SIZE)

    def signed_part(self) -> bytes:
        return unsigned_bytes(self)


@record(0x0A, (("token_id", BYTES), ("rsu_id", BYTES), ("region", BYTES),
               ("window_index", U64), ("pc_body_hash", BYTES), ("seq", U64)))
@dataclass(frozen=True)
class TokenReport:
    token_id: bytes
    rsu_id: bytes
    region: bytes
    window_index: int
    pc_body_hash: bytes
    seq: int

    def __post_init__(self):
        _check_len("token_id", self.token_id, DIGEST_SIZE)
        _check_len("region", self.region, REGION_SIZE)
        _check_len("pc_body_hash", self.pc_body_hash, DIGEST_SIZE)


# -- protocol bodies ---------------------------------------------------------

@record(0x0C, (("start_s", U64), ("end_s", U64)))
@dataclass(frozen=True)
class ValidityRequest:
    """Requested token span ``[start_s, end_s)``; must cover whole windows."""

    start_s: int
    end_s: int


@record(0x0D, (("ec", EnrollmentCert), ("req", ValidityRequest), ("proof", BYTES)))
@dataclass(frozen=True)
class TokenRequest:
    ec: EnrollmentCert
    req: ValidityRequest
    proof: bytes


@record(0x0E, (("tokens", ListOf(Token)),))
@dataclass(frozen=True)
class TokenBatch:
    tokens: List[Token] = field(default_factory=list)


@record(0x0F, (("token", Token), ("vk", BYTES)))
@dataclass(frozen=True)
class PseudoRequest:
    token: Token
    vk: bytes


@record(0x10, (("token_id", BYTES), ("entries", ListOf(PcrlEntry))))
@dataclass(frozen=True)
class RevokeCommand:
    """Revoke the owner of ``token_id``; ``entries`` name the offending PCs."""

    token_id: bytes
    entries: List[PcrlEntry] = field(default_factory=list)


@record(0x11, (("notice", Optional_(RevokeNotice)), ("snapshots", ListOf(PcrlSnapshot))))
@dataclass(frozen=True)
class RevokeResult:
    notice: Optional[RevokeNotice]
    snapshots: List[PcrlSnapshot] = field(default_factory=list)


@record(0x12, (("code", BYTES), ("detail", BYTES)))
@dataclass(frozen=True)
class ErrorReply:
    code: bytes
    detail: bytes = b""


@record(0x13, (("index", U64),))
@dataclass(frozen=True)
class WindowTick:
    index: int


@record(0x14, (("vk", BYTES),))
@dataclass(frozen=True)
class EnrollRequest:
    vk: bytes


@record(0x15, (("rsu_id", BYTES), ("vk", BYTES), ("region", BYTES)))
@dataclass(frozen=True)
class RsuRegistration:
    rsu_id: bytes
    vk: bytes
    region: bytes


@record(0x16, (("payload", BYTES), ("sigma", BYTES), ("pc", PseudonymCert)))
@dataclass(frozen=True)
class SignedMessage:
    payload: bytes
    sigma: bytes
    pc: PseudonymCert


@record(0x17, (("vk", BYTES), ("t_minutes", U64), ("window_index", U64)))
@dataclass(frozen=True)
class CaInfo:
    vk: bytes
    t_minutes: int
    window_index: int


def pcrl_entry_for(pc: PseudonymCert) -> PcrlEntry:
    return PcrlEntry(pc.body.digest(), pc.body.region, pc.body.tw.end_s)
