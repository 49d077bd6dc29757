"""Canonical tagged binary encoding and stream framing.

Every record starts with a one-byte type tag followed by its fields in
declared order:

* ``u64``   8-byte big-endian unsigned integer
* ``bytes`` 4-byte big-endian length, then the raw bytes
* nested records are emitted inline, tag included
* ``list``  4-byte big-endian count, then each element inline

Frames on a byte stream are ``len:u32 | kind:u8 | body`` where ``len``
counts the kind byte plus the body.
"""

from __future__ import annotations

import dataclasses
import struct
from typing import Any, BinaryIO, Dict, Tuple, Type

_U32 = struct.Struct("!I")
_U64 = struct.Struct("!Q")

MAX_FRAME = 64 * 1024 * 1024


class CodecError(ValueError):
    pass


U64 = "u64"
BYTES = "bytes"


class ListOf:
    def __init__(self, item):
        self.item = item

    def __repr__(self):
        return f"ListOf({self.item!r})"


class Optional_:
    """Zero or one nested record, encoded as a list of length 0 or 1."""

    def __init__(self, item):
        self.item = item


REGISTRY: Dict[int, Type] = {}


def record(tag: int, schema: Tuple[Tuple[str, Any], ...]):
    """Class decorator registering a dataclass under ``tag``.

    ``schema`` names every encoded field and its wire kind; the dataclass
    may carry additional non-encoded helpers.
    """

    def wrap(cls):
        if tag in REGISTRY:
            raise RuntimeError(f"tag 0x{tag:02x} already registered")
        cls.TAG = tag
        cls.SCHEMA = schema
        REGISTRY[tag] = cls
        return cls

    return wrap


def _enc_value(kind, value, out: bytearray) -> None:
    if kind == U64:
        if not isinstance(value, int) or value < 0 or value >= 1 << 64:
            raise CodecError(f"u64 out of range: {value!r}")
        out += _U64.pack(value)
    elif kind == BYTES:
        if not isinstance(value, (bytes, bytearray)):
            raise CodecError(f"expected bytes, got {type(value).__name__}")
        out += _U32.pack(len(value))
        out += value
    elif isinstance(kind, ListOf):
        out += _U32.pack(len(value))
        for item in value:
            _enc_value(kind.item, item, out)
    elif isinstance(kind, Optional_):
        if value is None:
            out += _U32.pack(0)
        else:
            out += _U32.pack(1)
            _enc_value(kind.item, value, out)
    else:
        if not isinstance(value, kind):
            raise CodecError(f"expected {kind.__name__}, got {type(value).__name__}")
        _enc_record(value, out)


def _enc_record(obj, out: bytearray, omit: str | None = None) -> None:
    out.append(obj.TAG)
    for name, kind in obj.SCHEMA:
        if name == omit:
            continue
        _enc_value(kind, getattr(obj, name), out)


def encode(obj) -> bytes:
    """Canonical bytes of a registered record."""
    if not hasattr(obj, "TAG"):
        raise CodecError(f"not a registered record: {type(obj).__name__}")
    out = bytearray()
    _enc_record(obj, out)
    return bytes(out)


def unsigned_bytes(obj, sig_field: str = "sigma") -> bytes:
    """Encoding of ``obj`` with its signature field left out."""
    out = bytearray()
    _enc_record(obj, out, omit=sig_field)
    return bytes(out)


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise CodecError("truncated input")
        chunk = bytes(self.buf[self.pos:end])
        self.pos = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]


def _dec_value(kind, rd: _Reader):
    if kind == U64:
        return rd.u64()
    if kind == BYTES:
        n = rd.u32()
        return rd.take(n)
    if isinstance(kind, ListOf):
        n = rd.u32()
        if n > len(rd.buf) - rd.pos:
            raise CodecError("list count exceeds input")
        return [_dec_value(kind.item, rd) for _ in range(n)]
    if isinstance(kind, Optional_):
        n = rd.u32()
        if n == 0:
            return None
        if n != 1:
            raise CodecError("optional count must be 0 or 1")
        return _dec_value(kind.item, rd)
    got = _dec_record(rd)
    if not isinstance(got, kind):
        raise CodecError(f"expected {kind.__name__}, got {type(got).__name__}")
    return got


def _dec_record(rd: _Reader):
    tag = rd.take(1)[0]
    cls = REGISTRY.get(tag)
    if cls is None:
        raise CodecError(f"unknown type tag 0x{tag:02x}")
    values = {name: _dec_value(kind, rd) for name, kind in cls.SCHEMA}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise CodecError(f"invalid {cls.__name__}: {exc}") from exc


def decode(data: bytes, expect: Type | None = None):
    """Inverse of :func:`encode`. Trailing bytes are an error."""
    rd = _Reader(bytes(data))
    obj = _dec_record(rd)
    if rd.pos != len(rd.buf):
        raise CodecError("trailing bytes after record")
    if expect is not None and not isinstance(obj, expect):
        raise CodecError(f"expected {expect.__name__}, got {type(obj).__name__}")
    return obj


def fields(obj) -> Dict[str, Any]:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


# -- framing -----------------------------------------------------------------

def frame(kind: int, body: bytes = b"") -> bytes:
    if not 0 <= kind <= 0xFF:
        raise CodecError("frame kind must fit one byte")
    return _U32.pack(len(body) + 1) + bytes([kind]) + body


def unframe(data: bytes) -> Tuple[int, bytes, bytes]:
    """Split one frame off ``data``; returns (kind, body, rest)."""
    if len(data) < 5:
        raise CodecError("short frame")
    (n,) = _U32.unpack(data[:4])
    if n < 1 or n > MAX_FRAME:
        raise CodecError(f"bad frame length {n}")
    if len(data) < 4 + n:
        raise CodecError("truncated frame")
    return data[4], bytes(data[5:4 + n]), bytes(data[4 + n:])


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    while n:
        chunk = stream.read(n)
        if not chunk:
            raise EOFError("stream closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> Tuple[int, bytes] | None:
    """Read one frame from a file-like stream; None on clean EOF."""
    head = stream.read(4)
    if not head:
        return None
    if len(head) < 4:
        head += _read_exact(stream, 4 - len(head))
    (n,) = _U32.unpack(head)
    if n < 1 or n > MAX_FRAME:
        raise CodecError(f"bad frame length {n}")
    payload = _read_exact(stream, n)
    return payload[0], payload[1:]


def write_frame(stream: BinaryIO, kind: int, body: bytes = b"") -> None:
    stream.write(frame(kind, body))
    flush = getattr(stream, "flush", None)
    if flush:
        flush()
