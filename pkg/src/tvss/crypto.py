"""Hashing and signature primitives.

SHA-256 for every digest and Ed25519 for every signature. Keys are plain
32-byte strings so they can be embedded directly in encoded records.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_SIZE = 32
KEY_SIZE = 32
SIG_SIZE = 64

_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw


def hash(data: bytes) -> bytes:  # noqa: A001 - mirrors the protocol's H
    """SHA-256 of ``data``."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class SigningKeyPair:
    signing_key: bytes
    verification_key: bytes
    _sk: Ed25519PrivateKey = field(repr=False, compare=False, default=None)

    @property
    def vk(self) -> bytes:
        return self.verification_key


def keygen(seed: bytes) -> SigningKeyPair:
    """Deterministic Ed25519 keypair from a 32-byte seed."""
    if len(seed) != KEY_SIZE:
        raise ValueError("seed must be 32 bytes")
    sk = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    vk = sk.public_key().public_bytes(_RAW, _RAW_PUB)
    return SigningKeyPair(bytes(seed), vk, sk)


def random_keypair() -> SigningKeyPair:
    return keygen(os.urandom(KEY_SIZE))


def sign(key: SigningKeyPair, msg: bytes) -> bytes:
    sk = key._sk
    if sk is None:
        sk = Ed25519PrivateKey.from_private_bytes(key.signing_key)
    return sk.sign(bytes(msg))


def verify(vk: bytes, msg: bytes, sig: bytes) -> bool:
    """True iff ``sig`` is valid for ``msg`` under ``vk``.

    Malformed keys or signatures yield False rather than raising.
    """
    if not isinstance(vk, (bytes, bytearray)) or len(vk) != KEY_SIZE:
        return False
    if not isinstance(sig, (bytes, bytearray)) or len(sig) != SIG_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(bytes(vk)).verify(bytes(sig), bytes(msg))
    except (InvalidSignature, ValueError):
        return False
    return True
