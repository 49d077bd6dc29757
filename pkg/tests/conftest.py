import hashlib
import random

import pytest

from tvss import crypto
from tvss.ca import CertificateAuthority
from tvss.rsu import RoadSideUnit

T = 15
SPAN = 60 * T
W0 = 1000
REGION_A = bytes.fromhex("0000000000000001")
REGION_B = bytes.fromhex("0000000000000002")


def seeded(tag, n=32):
    return hashlib.sha256(repr(tag).encode()).digest()[:n]


class Clock:
    def __init__(self, now):
        self.now = now

    def __call__(self):
        return self.now


class World:
    """CA plus one RSU per region, wired directly (no transport)."""

    def __init__(self, seed=0, regions=(REGION_A, REGION_B), skew_s=30, log_path=None):
        self.rng = random.Random(seed)
        self.clock = Clock(W0 * SPAN + 1)
        self.ca = CertificateAuthority(crypto.keygen(self.bytes(32)), T, W0, log_path=log_path,
                                       rng=self.bytes)
        self.rsus = []
        for i, region in enumerate(regions):
            key = crypto.keygen(self.bytes(32))
            cert = self.ca.register_rsu(f"rsu-{i}".encode(), key.verification_key, region)
            self.rsus.append(RoadSideUnit(cert, key, self.ca.vk, T, W0, skew_s, self.clock))

    def bytes(self, n):
        return self.rng.getrandbits(8 * n).to_bytes(n, "big")

    def vehicle(self):
        key = crypto.keygen(self.bytes(32))
        return key, self.ca.enroll(key.verification_key)

    def tokens(self, key, ec, first, n):
        from tvss import codec
        from tvss.records import ValidityRequest
        req = ValidityRequest(first * SPAN, (first + n) * SPAN)
        return self.ca.token_gen(ec, req, crypto.sign(key, codec.encode(req)))

    def advance(self):
        new = self.ca.window_index + 1
        self.ca.advance_window(new)
        for r in self.rsus:
            r.advance_window(new)
        self.clock.now = new * SPAN + 1
        return new


@pytest.fixture
def world():
    return World()
