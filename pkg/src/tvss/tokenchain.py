"""Dual hash chains for linked token ids.

Two chains grow in lock step from random heads ``(x_0, r_0)``::

    r_i = H(r_{i-1})
    x_i = H(x_{i-1} || r_{i-1})

Token ids are ``x_1, x_2, ...``. Publishing ``(x_{i-1}, r_{i-1})`` lets
anyone derive ``x_i`` onward, while earlier ids stay out of reach because
``H`` cannot be inverted.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Tuple

from .crypto import DIGEST_SIZE, hash


@dataclass(frozen=True)
class ChainHeads:
    x: bytes
    r: bytes
    index: int

    def __post_init__(self):
        if len(self.x) != DIGEST_SIZE or len(self.r) != DIGEST_SIZE:
            raise ValueError("chain heads must be 32-byte digests")

    @classmethod
    def random(cls, index: int = 0) -> "ChainHeads":
        return cls(os.urandom(DIGEST_SIZE), os.urandom(DIGEST_SIZE), index)

    def step(self) -> "ChainHeads":
        return ChainHeads(hash(self.x + self.r), hash(self.r), self.index + 1)

    @property
    def next_id(self) -> bytes:
        """Id one position past these heads, without rolling them."""
        return hash(self.x + self.r)


@dataclass(frozen=True)
class RevealPair:
    x_prev: bytes
    r_prev: bytes
    first_index: int
    last_index: int

    def __post_init__(self):
        if self.first_index > self.last_index:
            raise ValueError("first_index must not exceed last_index")


class ChainError(ValueError):
    pass


def extend(heads: ChainHeads, n: int) -> Tuple[List[bytes], ChainHeads]:
    """Roll ``n`` steps; returns the ids produced and the new heads."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x, r = heads.x, heads.r
    ids = []
    for _ in range(n):
        x, r = hash(x + r), hash(r)
        ids.append(x)
    return ids, ChainHeads(x, r, heads.index + n)


def advance_to(heads: ChainHeads, index: int) -> ChainHeads:
    if index < heads.index:
        raise ChainError(f"cannot roll heads back from {heads.index} to {index}")
    return extend(heads, index - heads.index)[1]


def reveal_for(heads_at: ChainHeads, revoke_index: int, batch_end: int) -> RevealPair:
    """Reveal covering ``[revoke_index, batch_end]``; heads must sit one step before."""
    if heads_at.index != revoke_index - 1:
        raise ChainError(
            f"heads at {heads_at.index}, expected {revoke_index - 1}; roll heads first")
    return RevealPair(heads_at.x, heads_at.r, revoke_index, batch_end)


def derive_revoked(pair: RevealPair) -> List[bytes]:
    n = pair.last_index - pair.first_index + 1
    return extend(ChainHeads(pair.x_prev, pair.r_prev, pair.first_index - 1), n)[0]


def linkable(id_a: bytes, id_b: bytes) -> bool:
    """The only link test available without the r chain."""
    return hash(id_a) == id_b


def hash_closure(seeds, depth: int, exact_depth: int = 3, width: int = 64) -> set:
    """Values reachable from ``seeds`` by ``H(a)`` and ``H(a || b)``.

    Levels up to ``exact_depth`` are enumerated in full; the set grows
    doubly exponentially, so deeper levels only combine the ``width``
    smallest new values of the previous level with each other. Used to
    check that a reveal never reaches ids issued before it.
    """
    seen = set(seeds)
    frontier = set(seeds)
    for d in range(1, depth + 1):
        new = set()
        if d <= exact_depth:
            pool = list(seen)
            for a in pool:
                new.add(hash(a))
                a_new = a in frontier
                for b in pool:
                    if a_new or b in frontier:
                        new.add(hash(a + b))
        else:
            front = sorted(frontier)[:width]
            for a in front:
                new.add(hash(a))
                for b in front:
                    new.add(hash(a + b))
        frontier = new - seen
        seen |= frontier
        if not frontier:
            break
    return seen
