"""Check the package codec and hash chain against the shipped golden vectors."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import List

from . import codec, crypto, records  # noqa: F401 - registers record types
from .tokenchain import ChainHeads, extend


@dataclass
class VectorFailure:
    file: str
    line: int
    reason: str


def _lines(name: str):
    text = resources.files("tvss").joinpath("vectors", name).read_text()
    for no, raw in enumerate(text.splitlines(), 1):
        raw = raw.strip()
        if raw and not raw.startswith("#"):
            yield no, raw


def _record_types():
    return {cls.__name__: cls for cls in codec.REGISTRY.values()}


def _parse_value(kind, text: str):
    if kind is codec.U64:
        return int(text)
    if kind is codec.BYTES:
        return bytes.fromhex(text)
    if text.startswith("@"):
        return codec.decode(bytes.fromhex(text[1:]), kind)
    raise ValueError(f"cannot parse {text!r} for field kind {kind!r}")


def check_codec() -> List[VectorFailure]:
    types = _record_types()
    bad = []
    for no, raw in _lines("codec.txt"):
        try:
            name, fields, expected = raw.split(" ")
            cls = types[name]
            schema = dict(cls.SCHEMA)
            values = {}
            for item in fields.split(","):
                key, _, text = item.partition("=")
                values[key] = _parse_value(schema[key], text)
            obj = cls(**values)
            got = codec.encode(obj)
            if got.hex() != expected:
                bad.append(VectorFailure("codec.txt", no, f"{name} encodes to {got.hex()}"))
            elif codec.decode(got, cls) != obj:
                bad.append(VectorFailure("codec.txt", no, f"{name} does not round-trip"))
        except Exception as exc:  # a malformed vector is a failure, not a crash
            bad.append(VectorFailure("codec.txt", no, f"{type(exc).__name__}: {exc}"))
    return bad


def check_chain() -> List[VectorFailure]:
    bad = []
    for no, raw in _lines("chain.txt"):
        op, inp, expected = raw.split(" ")
        data = bytes.fromhex(inp)
        if op == "H":
            got = crypto.hash(data)
        elif op == "step":
            h = ChainHeads(data[:32], data[32:], 0).step()
            got = h.x + h.r
        elif op == "ids4":
            got = b"".join(extend(ChainHeads(data[:32], data[32:], 0), 4)[0])
        else:
            bad.append(VectorFailure("chain.txt", no, f"unknown op {op}"))
            continue
        if got.hex() != expected:
            bad.append(VectorFailure("chain.txt", no, f"{op} gave {got.hex()}"))
    return bad


def check_all() -> List[VectorFailure]:
    return check_codec() + check_chain()


def count() -> int:
    return sum(1 for _ in _lines("codec.txt")) + sum(1 for _ in _lines("chain.txt"))
