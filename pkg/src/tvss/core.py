"""Pure protocol logic: enrollment, token checks, PC issuance and V2V checks.

Nothing here holds state. Node modules supply revocation and usage sets
and decide what to persist.
"""

from __future__ import annotations

import enum
from typing import AbstractSet, Iterable, List

from . import crypto
from .codec import encode
from .errors import ProtocolError
from .records import (
    EnrollmentCert,
    PseudonymCert,
    PseudonymCertBody,
    RsuCert,
    SignedMessage,
    TimeWindow,
    Token,
    TokenContent,
)

DEFAULT_T_MINUTES = 15


class TokenStatus(enum.Enum):
    OK = "ok"
    EXPIRED = "expired"
    NOT_YET_VALID = "not_yet_valid"
    BAD_SIGNATURE = "bad_signature"


class V2VStatus(enum.Enum):
    ACCEPT = "accept"
    BAD_SIG = "bad_sig"
    BAD_CERT_CHAIN = "bad_cert_chain"
    WRONG_REGION = "wrong_region"
    EXPIRED_PC = "expired_pc"
    REVOKED_PC = "revoked_pc"


class IssueError(ProtocolError):
    """PC issuance refused."""

    TOKEN_INVALID = "token_invalid"
    TOKEN_REVOKED = "token_revoked"
    TOKEN_ALREADY_USED = "token_already_used"


def window_of(now_s: float, t_minutes: int = DEFAULT_T_MINUTES) -> TimeWindow:
    if t_minutes < 1:
        raise ValueError("t_minutes must be >= 1")
    return TimeWindow.at_index(int(now_s // (60 * t_minutes)), t_minutes)


# -- enrollment --------------------------------------------------------------

def setup(vk_v: bytes, ca_key: crypto.SigningKeyPair) -> EnrollmentCert:
    """Certify a vehicle verification key."""
    if len(vk_v) != crypto.KEY_SIZE:
        raise ValueError("vk_v must be 32 bytes")
    placeholder = EnrollmentCert(vk_v, bytes(crypto.SIG_SIZE))
    return EnrollmentCert(vk_v, crypto.sign(ca_key, placeholder.signed_part()))


def verify_ec(ec: EnrollmentCert, vk_ca: bytes) -> bool:
    return crypto.verify(vk_ca, ec.signed_part(), ec.sigma_v)


def make_rsu_cert(rsu_id: bytes, vk: bytes, region: bytes,
                  ca_key: crypto.SigningKeyPair) -> RsuCert:
    placeholder = RsuCert(rsu_id, vk, region, bytes(crypto.SIG_SIZE))
    return RsuCert(rsu_id, vk, region, crypto.sign(ca_key, placeholder.signed_part()))


def verify_rsu_cert(cert: RsuCert, vk_ca: bytes) -> bool:
    return crypto.verify(vk_ca, cert.signed_part(), cert.sigma_ca)


# -- tokens ------------------------------------------------------------------

def sign_token(token_id: bytes, tw: TimeWindow, ca_key: crypto.SigningKeyPair) -> Token:
    content = TokenContent(token_id, tw)
    return Token(content, crypto.sign(ca_key, encode(content)))


def sign_tokens(ids: Iterable[bytes], first_index: int, t_minutes: int,
                ca_key: crypto.SigningKeyPair) -> List[Token]:
    return [sign_token(tid, TimeWindow.at_index(first_index + j, t_minutes), ca_key)
            for j, tid in enumerate(ids)]


def validate_token(tau: Token, now_s: float, vk_ca: bytes) -> TokenStatus:
    """Time check first, then signature."""
    tw = tau.content.tw
    if now_s < tw.start_s:
        return TokenStatus.NOT_YET_VALID
    if now_s >= tw.end_s:
        return TokenStatus.EXPIRED
    if not crypto.verify(vk_ca, tau.signed_part(), tau.sigma):
        return TokenStatus.BAD_SIGNATURE
    return TokenStatus.OK


def issue_pc(tau: Token, vehicle_vk: bytes, rsu_cert: RsuCert,
             rsu_key: crypto.SigningKeyPair, now_s: float, vk_ca: bytes,
             revoked_ids: AbstractSet[bytes] = frozenset(),
             used_ids: AbstractSet[bytes] = frozenset()) -> PseudonymCert:
    """Exchange a token for a region- and window-bound PC.

    Raises :class:`IssueError` with priority invalid, revoked, used. The
    caller is responsible for recording ``tau.id`` as used.
    """
    if rsu_key.verification_key != rsu_cert.vk:
        raise ValueError("RSU signing key does not match its certificate")
    status = validate_token(tau, now_s, vk_ca)
    if status is not TokenStatus.OK:
        raise IssueError(IssueError.TOKEN_INVALID, status.value)
    if tau.id in revoked_ids:
        raise IssueError(IssueError.TOKEN_REVOKED)
    if tau.id in used_ids:
        raise IssueError(IssueError.TOKEN_ALREADY_USED)
    body = PseudonymCertBody(vehicle_vk, rsu_cert.region, tau.content.tw)
    return PseudonymCert(body, crypto.sign(rsu_key, encode(body)), rsu_cert)


def verify_pc_chain(pc: PseudonymCert, vk_ca: bytes) -> bool:
    cert = pc.rsu_cert
    return (cert.region == pc.body.region
            and verify_rsu_cert(cert, vk_ca)
            and crypto.verify(cert.vk, encode(pc.body), pc.sigma_rsu))


# -- V2V ---------------------------------------------------------------------

def _payload_bytes(payload: bytes) -> bytes:
    return len(payload).to_bytes(4, "big") + payload


def sign_v2v(pc_keys: crypto.SigningKeyPair, pc: PseudonymCert, payload: bytes) -> SignedMessage:
    if pc_keys.verification_key != pc.body.vk:
        raise ValueError("keypair does not match the pseudonym certificate")
    return SignedMessage(payload, crypto.sign(pc_keys, _payload_bytes(payload)), pc)


def verify_v2v(msg: SignedMessage, now_s: float, here: bytes, vk_ca: bytes,
               pcrl: AbstractSet[bytes] = frozenset()) -> V2VStatus:
    """Checks run in a fixed order; the first failure is reported."""
    body = msg.pc.body
    if not crypto.verify(body.vk, _payload_bytes(msg.payload), msg.sigma):
        return V2VStatus.BAD_SIG
    if not verify_pc_chain(msg.pc, vk_ca):
        return V2VStatus.BAD_CERT_CHAIN
    if body.region != here:
        return V2VStatus.WRONG_REGION
    if not body.tw.contains(now_s):
        return V2VStatus.EXPIRED_PC
    if body.digest() in pcrl:
        return V2VStatus.REVOKED_PC
    return V2VStatus.ACCEPT
