"""Regenerate golden vectors with a stand-alone encoder.

Uses only struct and hashlib so the vectors do not depend on tvss.codec.
Run from the repo root: python3 tools/gen_vectors.py
"""

import hashlib
import struct
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "tvss" / "vectors"


def H(b):
    return hashlib.sha256(b).digest()


def u64(n):
    return struct.pack(">Q", n)


def bts(b):
    return struct.pack(">I", len(b)) + b


def rec(tag, *parts):
    return bytes([tag]) + b"".join(parts)


def line(name, fields, enc):
    # fields: list of (name, value) where value is int, bytes, or ("rec", bytes)
    items = []
    for k, v in fields:
        if isinstance(v, int):
            items.append(f"{k}={v}")
        elif isinstance(v, tuple):
            items.append(f"{k}=@{v[1].hex()}")
        else:
            items.append(f"{k}={v.hex()}")
    return f"{name} {','.join(items)} {enc.hex()}"


def codec_vectors():
    v1 = H(bytes(32) + b"\x01" * 32)
    tw = rec(0x02, u64(0), u64(900))
    tw2 = rec(0x02, u64(900_000), u64(900_900))
    ec = rec(0x01, bts(b"\x11" * 32), bts(b"\x22" * 64))
    g1 = rec(0x03, bts(v1), tw)
    tok = rec(0x04, g1, bts(b"\x33" * 64))
    region = bytes.fromhex("0000000000000001")
    body = rec(0x05, bts(b"\x44" * 32), bts(region), tw2)
    rsu = rec(0x0B, bts(b"rsu-0"), bts(b"\x55" * 32), bts(region), bts(b"\x66" * 64))
    pc = rec(0x06, body, bts(b"\x77" * 64), rsu)
    notice = rec(0x07, bts(b"\x88" * 32), bts(b"\x99" * 32), u64(1000), u64(3879), bts(b"\xaa" * 64))
    entry = rec(0x08, bts(H(body)), bts(region), u64(900_900))
    snap = rec(0x09, bts(region), u64(1000), bts(H(b"a") + H(b"b")), bts(b"\xbb" * 64))
    report = rec(0x0A, bts(v1), bts(b"rsu-0"), bts(region), u64(1000), bts(H(body)), u64(7))
    return [
        line("TimeWindow", [("start_s", 0), ("end_s", 900)], tw),
        line("TimeWindow", [("start_s", 900_000), ("end_s", 900_900)], tw2),
        line("EnrollmentCert", [("vk_v", b"\x11" * 32), ("sigma_v", b"\x22" * 64)], ec),
        line("TokenContent", [("id", v1), ("tw", ("rec", tw))], g1),
        line("Token", [("content", ("rec", g1)), ("sigma", b"\x33" * 64)], tok),
        line("PseudonymCertBody", [("vk", b"\x44" * 32), ("region", region), ("tw", ("rec", tw2))], body),
        line("RsuCert", [("rsu_id", b"rsu-0"), ("vk", b"\x55" * 32), ("region", region),
                         ("sigma_ca", b"\x66" * 64)], rsu),
        line("PseudonymCert", [("body", ("rec", body)), ("sigma_rsu", b"\x77" * 64),
                               ("rsu_cert", ("rec", rsu))], pc),
        line("RevokeNotice", [("x_prev", b"\x88" * 32), ("r_prev", b"\x99" * 32), ("first_index", 1000),
                              ("last_index", 3879), ("sigma", b"\xaa" * 64)], notice),
        line("PcrlEntry", [("pc_hash", H(body)), ("region", region), ("expires_s", 900_900)], entry),
        line("PcrlSnapshot", [("region", region), ("window_index", 1000),
                              ("entries", H(b"a") + H(b"b")), ("sigma", b"\xbb" * 64)], snap),
        line("TokenReport", [("token_id", v1), ("rsu_id", b"rsu-0"), ("region", region),
                             ("window_index", 1000), ("pc_body_hash", H(body)), ("seq", 7)], report),
    ]


def chain_vectors():
    out = []
    for x0, r0 in [(bytes(32), b"\x01" * 32), (H(b"x"), H(b"r"))]:
        out.append(f"H {(x0 + r0).hex()} {H(x0 + r0).hex()}")
        out.append(f"step {(x0 + r0).hex()} {(H(x0 + r0) + H(r0)).hex()}")
        x, r, ids = x0, r0, b""
        for _ in range(4):
            x, r = H(x + r), H(r)
            ids += x
        out.append(f"ids4 {(x0 + r0).hex()} {ids.hex()}")
    return out


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    head = "# generated by tools/gen_vectors.py; "
    (OUT / "codec.txt").write_text(
        head + "Type field=value,... encoding (ints decimal, bytes hex, @ nested record)\n"
        + "\n".join(codec_vectors()) + "\n")
    (OUT / "chain.txt").write_text(
        head + "op input output (hex); H: sha256, step: x|r -> x'|r', ids4: x0|r0 -> x1..x4\n"
        + "\n".join(chain_vectors()) + "\n")


if __name__ == "__main__":
    main()
