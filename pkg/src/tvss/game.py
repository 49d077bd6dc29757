"""Challenger for the VPKI security game and a fixed suite of adversaries.

The challenger runs a real CA and real RSUs; every EC, token and PC it
hands out comes from :mod:`tvss.ca` and :mod:`tvss.rsu`. Adversaries are
plain functions over what the challenger exposed, so the win rates below
measure those specific strategies, not every possible attacker.

Branches:

* forgery: output ``(msg, sig, pc)`` that verifies under a PC whose key was
  never exposed, for a message the challenger never signed under that PC.
* anonymity: given the ECs of ``v0`` and ``v1`` and a PC of ``v_b``, guess b.
* unlinkability: given ``PC_00`` (of v0), ``PC_10`` (of v1) and a second PC
  ``PC_b1`` of ``v_b``, guess b.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import codec, core, crypto
from .ca import CertificateAuthority
from .records import EnrollmentCert, PseudonymCert, SignedMessage, Token, ValidityRequest
from .rsu import RoadSideUnit
from .tokenchain import linkable

START_WINDOW = 1000
SUBSTRING_MIN = 16
BRANCHES = ("forgery", "anonymity", "unlinkability")


class GameAbort(Exception):
    """Illegal query; the adversary loses."""


class Phase(enum.Enum):
    QUERY = "query"
    CHALLENGE = "challenge"
    DONE = "done"


@dataclass
class GameVehicle:
    vid: int
    key: crypto.SigningKeyPair
    ec: EnrollmentCert
    tokens: List[Token] = field(default_factory=list)
    pcs: List[Tuple[PseudonymCert, crypto.SigningKeyPair]] = field(default_factory=list)
    corrupt: bool = False


def byte_fields(obj) -> List[bytes]:
    """Every bytes-valued field of a record, recursively."""
    if isinstance(obj, (bytes, bytearray)):
        return [bytes(obj)]
    if dataclasses.is_dataclass(obj):
        out = []
        for f in dataclasses.fields(obj):
            out.extend(byte_fields(getattr(obj, f.name)))
        return out
    if isinstance(obj, (list, tuple)):
        return [b for item in obj for b in byte_fields(item)]
    return []


def ec_derived(ec: EnrollmentCert, depth: int = 2) -> List[bytes]:
    """EC fields and their hashes up to ``depth`` levels, plus the EC digest."""
    out = []
    for f in byte_fields(ec) + [codec.encode(ec)]:
        cur = f
        out.append(cur)
        for _ in range(depth):
            cur = crypto.hash(cur)
            out.append(cur)
    return out


def structural_scan(ecs: Iterable[EnrollmentCert], artifacts: Iterable) -> List[str]:
    """Report any token or PC whose encoding contains EC-derived bytes."""
    needles = [n for ec in ecs for n in ec_derived(ec)]
    problems = []
    for art in artifacts:
        blob = codec.encode(art)
        for n in needles:
            if n in blob:
                problems.append(f"{type(art).__name__} contains EC-derived bytes {n[:8].hex()}")
    return problems


class Challenger:
    """Holds the honest world and answers adversary queries."""

    def __init__(self, seed: int, t_minutes: int = core.DEFAULT_T_MINUTES,
                 tokens_per_vehicle: int = 2):
        self.rng = random.Random(seed)
        self.t_minutes = t_minutes
        self.span = 60 * t_minutes
        self.tokens_per_vehicle = tokens_per_vehicle
        self.ca = CertificateAuthority(crypto.keygen(self._bytes(32)), t_minutes,
                                       START_WINDOW, rng=self._bytes)
        key = crypto.keygen(self._bytes(32))
        region = bytes(8)
        cert = self.ca.register_rsu(b"rsu-game", key.verification_key, region)
        self.rsu = RoadSideUnit(cert, key, self.ca.vk, t_minutes, START_WINDOW,
                                clock=lambda: START_WINDOW * self.span)
        self.region = region
        self.vehicles: Dict[int, GameVehicle] = {}
        self.exposed: List[bytes] = []
        self.exposed_pc_keys: set = set()
        self.signed: set = set()
        self.transcript: List[Tuple[str, tuple, object]] = []
        self.phase = Phase.QUERY

    def _bytes(self, n: int) -> bytes:
        return self.rng.getrandbits(8 * n).to_bytes(n, "big")

    def _log(self, kind: str, args: tuple, resp):
        self.transcript.append((kind, args, resp))
        return resp

    def _vehicle(self, vid: int) -> GameVehicle:
        if vid not in self.vehicles:
            raise GameAbort(f"unknown vehicle {vid}")
        return self.vehicles[vid]

    # -- queries -------------------------------------------------------------

    def create_vehicle(self) -> int:
        self._require_query()
        key = crypto.keygen(self._bytes(32))
        ec = self.ca.enroll(key.verification_key)
        vid = len(self.vehicles)
        self.vehicles[vid] = GameVehicle(vid, key, ec)
        return self._log("CreateVehicle", (), vid)

    def get_tokens(self, vid: int) -> int:
        self._require_query()
        v = self._vehicle(vid)
        first = START_WINDOW + len(v.tokens)
        req = ValidityRequest(first * self.span,
                              (first + self.tokens_per_vehicle) * self.span)
        v.tokens.extend(self.ca.token_gen(v.ec, req, crypto.sign(v.key, codec.encode(req))))
        return self._log("GetTokens", (vid,), len(v.tokens))

    def get_pc(self, vid: int) -> PseudonymCert:
        """Redeem the vehicle's next unused token; the PC is public."""
        self._require_query()
        return self._issue(self._vehicle(vid), "GetPC")

    def _issue(self, v: GameVehicle, kind: str) -> PseudonymCert:
        used = len(v.pcs)
        if used >= len(v.tokens):
            self.get_tokens(v.vid) if self.phase is Phase.QUERY else self._refill(v)
        tau = v.tokens[used]
        keys = crypto.keygen(self._bytes(32))
        # the RSU sees the token and a fresh key, nothing else
        pc = self.rsu.pseudo_gen(tau, keys.verification_key, now_s=tau.tw.start_s)
        v.pcs.append((pc, keys))
        return self._log(kind, (v.vid,), pc)

    def _refill(self, v: GameVehicle) -> None:
        first = START_WINDOW + len(v.tokens)
        req = ValidityRequest(first * self.span, (first + self.tokens_per_vehicle) * self.span)
        v.tokens.extend(self.ca.token_gen(v.ec, req, crypto.sign(v.key, codec.encode(req))))

    def sign(self, vid: int, msg: bytes, which: int = -1) -> SignedMessage:
        """Sign ``msg`` under one of the vehicle's PCs."""
        self._require_query()
        v = self._vehicle(vid)
        if not v.pcs:
            raise GameAbort("vehicle holds no PC")
        pc, keys = v.pcs[which]
        self.signed.add((pc.body.vk, msg))
        return self._log("Sign", (vid, msg), core.sign_v2v(keys, pc, msg))

    def expose(self, vid: int, item: str, index: int = 0):
        """Hand the adversary a token, a PC secret key, or the EC."""
        self._require_query()
        v = self._vehicle(vid)
        if item == "token":
            out = codec.encode(v.tokens[index])
        elif item == "pc_key":
            pc, keys = v.pcs[index]
            self.exposed_pc_keys.add(pc.body.vk)
            out = keys.signing_key
        elif item == "ec":
            out = codec.encode(v.ec)
        else:
            raise GameAbort(f"cannot expose {item!r}")
        self.exposed.append(out)
        return self._log("Expose", (vid, item, index), out)

    def corrupt(self, vid: int) -> GameVehicle:
        self._require_query()
        v = self._vehicle(vid)
        v.corrupt = True
        for pc, _ in v.pcs:
            self.exposed_pc_keys.add(pc.body.vk)
        return self._log("Corrupt", (vid,), v)

    def _require_query(self):
        if self.phase is not Phase.QUERY:
            raise GameAbort("queries are closed")

    # -- challenges ----------------------------------------------------------

    def _challengeable(self, *vids: int) -> List[GameVehicle]:
        vs = [self._vehicle(v) for v in vids]
        if len(set(vids)) != len(vids) or any(v.corrupt for v in vs):
            raise GameAbort("challenge vehicles must be distinct and uncorrupted")
        return vs

    def anonymity_challenge(self, v0: int, v1: int) -> PseudonymCert:
        vs = self._challengeable(v0, v1)
        self.phase = Phase.CHALLENGE
        self.b = self.rng.getrandbits(1)
        return self._issue(vs[self.b], "Challenge")

    def unlinkability_challenge(self, v0: int, v1: int) -> Tuple[PseudonymCert, ...]:
        vs = self._challengeable(v0, v1)
        self.phase = Phase.CHALLENGE
        self.b = self.rng.getrandbits(1)
        for v in vs:
            while len(v.pcs) % 2:
                self._issue(v, "Pad")
        pc00 = self._issue(vs[0], "Challenge")
        pc10 = self._issue(vs[1], "Challenge")
        pcb1 = self._issue(vs[self.b], "Challenge")
        return pc00, pc10, pcb1

    def finish_guess(self, guess) -> bool:
        if self.phase is not Phase.CHALLENGE:
            raise GameAbort("no open challenge")
        self.phase = Phase.DONE
        return guess in (0, 1) and guess == self.b

    def finish_forgery(self, answer) -> bool:
        self.phase = Phase.DONE
        try:
            msg, sig, pc = answer
            fake = SignedMessage(bytes(msg), bytes(sig), pc)
        except (TypeError, ValueError):
            return False
        if pc.body.vk in self.exposed_pc_keys or (pc.body.vk, fake.payload) in self.signed:
            return False
        now = pc.body.tw.start_s
        return core.verify_v2v(fake, now, pc.body.region, self.ca.vk) is core.V2VStatus.ACCEPT

    # -- audit ---------------------------------------------------------------

    def artifacts(self) -> List:
        out = []
        for v in self.vehicles.values():
            out.extend(v.tokens)
            out.extend(pc for pc, _ in v.pcs)
        return out

    def scan(self) -> List[str]:
        return structural_scan([v.ec for v in self.vehicles.values()], self.artifacts())


# -- adversaries -------------------------------------------------------------

Guess = Optional[int]


def _grams(fields: Iterable[bytes], k: int = SUBSTRING_MIN) -> set:
    return {f[i:i + k] for f in fields for i in range(len(f) - k + 1)}


def _score_equal(tf, rf) -> int:
    ref = set(rf)
    return sum(x in ref for x in tf)


def _score_substring(tf, rf) -> int:
    grams = _grams(rf)
    k = SUBSTRING_MIN
    return sum(any(x[i:i + k] in grams for i in range(len(x) - k + 1)) for x in tf)


def _score_linkable(tf, rf) -> int:
    a = [x for x in tf if len(x) == crypto.DIGEST_SIZE]
    b = [y for y in rf if len(y) == crypto.DIGEST_SIZE]
    return sum(linkable(x, y) or linkable(y, x) for x in a for y in b)


def _score_hashed(tf, rf) -> int:
    ref = set(rf)
    deep = set()
    for y in rf:
        h = crypto.hash(y)
        deep.update((h, crypto.hash(h)))
    return sum(x in deep or crypto.hash(x) in ref for x in tf)


RELATIONS = {
    "byte_equality": _score_equal,
    "substring_overlap": _score_substring,
    "linkable": _score_linkable,
    "hash_of_field": _score_hashed,
}


def _pick(s0: int, s1: int) -> Guess:
    if s0 == s1:
        return None
    return 0 if s0 > s1 else 1


def _suite(target, ref0, ref1) -> Dict[str, Guess]:
    """Score the target against each reference; the higher score is the guess."""
    tf, r0, r1 = byte_fields(target), byte_fields(ref0), byte_fields(ref1)
    return {name: _pick(score(tf, r0), score(tf, r1)) for name, score in RELATIONS.items()}


def anonymity_guesses(pc: PseudonymCert, ec0: EnrollmentCert, ec1: EnrollmentCert,
                      tokens0: Sequence[Token] = (), tokens1: Sequence[Token] = ()) -> Dict[str, Guess]:
    """Each distinguisher compares the challenge PC with what it knows of each vehicle."""
    return _suite(pc, [ec0, list(tokens0)], [ec1, list(tokens1)])


def unlinkability_guesses(pc00: PseudonymCert, pc10: PseudonymCert,
                          pcb1: PseudonymCert) -> Dict[str, Guess]:
    return _suite(pcb1, pc00, pc10)


def combine(guesses: Dict[str, Guess], coin: int) -> int:
    """First distinguisher with an opinion wins; otherwise flip a coin."""
    for name in RELATIONS:
        g = guesses.get(name)
        if g is not None:
            return g
    return coin


def forgery_attempt(ch: Challenger, rng: random.Random, strategy: int):
    """One of several naive forgery strategies against an honest PC."""
    v = ch.create_vehicle()
    pc = ch.get_pc(v)
    seen = ch.sign(v, b"hello")
    other = ch.get_pc(ch.create_vehicle())
    msg = rng.getrandbits(128).to_bytes(16, "big")
    if strategy == 0:
        return msg, rng.getrandbits(512).to_bytes(64, "big"), pc
    if strategy == 1:
        return msg, seen.sigma, pc
    if strategy == 2:
        return seen.payload, seen.sigma, other
    flipped = bytearray(seen.sigma)
    flipped[rng.randrange(64)] ^= 1 << rng.randrange(8)
    return seen.payload + b"!", bytes(flipped), pc


# -- runners -----------------------------------------------------------------

@dataclass
class BranchResult:
    branch: str
    trials: int
    wins: int
    signals: Dict[str, int]
    scan_violations: int

    @property
    def rate(self) -> float:
        return self.wins / self.trials if self.trials else 0.0

    def ci95(self) -> Tuple[float, float]:
        """Wilson score interval."""
        n, z = self.trials, 1.959963984540054
        if n == 0:
            return 0.0, 1.0
        p = self.rate
        d = 1 + z * z / n
        c = (p + z * z / (2 * n)) / d
        h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / d
        return max(0.0, c - h), min(1.0, c + h)

    def to_json(self) -> dict:
        lo, hi = self.ci95()
        return {"branch": self.branch, "trials": self.trials, "wins": self.wins,
                "rate": round(self.rate, 6), "ci95": [round(lo, 6), round(hi, 6)],
                "signals": dict(sorted(self.signals.items())),
                "scan_violations": self.scan_violations}


def _trial_seed(seed: int, branch: str, i: int) -> int:
    return (seed * 1_000_003 + BRANCHES.index(branch) * 7_919 + i) & (2**63 - 1)


def play(branch: str, seed: int, i: int, adv: random.Random, counts: Dict[str, int]) -> Tuple[bool, int]:
    """One game; returns (adversary won, structural violations)."""
    ch = Challenger(_trial_seed(seed, branch, i))
    if branch == "forgery":
        won = ch.finish_forgery(forgery_attempt(ch, adv, i % 4))
        return won, len(ch.scan())
    v0, v1 = ch.create_vehicle(), ch.create_vehicle()
    for v in (v0, v1):
        ch.get_pc(v)
    ec0, ec1 = ch.vehicles[v0].ec, ch.vehicles[v1].ec
    if branch == "anonymity":
        pc = ch.anonymity_challenge(v0, v1)
        guesses = anonymity_guesses(pc, ec0, ec1, ch.vehicles[v0].tokens[:1],
                                    ch.vehicles[v1].tokens[:1])
    elif branch == "unlinkability":
        guesses = unlinkability_guesses(*ch.unlinkability_challenge(v0, v1))
    else:
        raise ValueError(f"unknown branch {branch!r}")
    for name, g in guesses.items():
        if g is not None:
            counts[name] = counts.get(name, 0) + 1
    won = ch.finish_guess(combine(guesses, adv.getrandbits(1)))
    return won, len(ch.scan())


def run_branch(branch: str, trials: int, seed: int) -> BranchResult:
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    adv = random.Random(f"adversary:{seed}:{branch}")
    counts: Dict[str, int] = {name: 0 for name in RELATIONS} if branch != "forgery" else {}
    wins = violations = 0
    for i in range(trials):
        won, bad = play(branch, seed, i, adv, counts)
        wins += won
        violations += bad
    return BranchResult(branch, trials, wins, counts, violations)


def run_game(trials: int, seed: int, branch: str = "all") -> List[BranchResult]:
    names = BRANCHES if branch == "all" else (branch,)
    return [run_branch(b, trials, seed) for b in names]
