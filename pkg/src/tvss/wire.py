"""Framed request/response transport for the node services.

A request is one frame ``len | kind | body``; the reply is one frame whose
kind is either the matching response kind, ``ACK`` or ``ERROR`` (body an
:class:`ErrorReply`). The same handlers serve TCP connections and the
in-process :class:`Loopback` used by the simulator.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from typing import Callable, Dict, List, Optional, Tuple

from . import codec
from .errors import ProtocolError, TransportTimeout
from .records import (
    CaInfo,
    EnrollmentCert,
    EnrollRequest,
    ErrorReply,
    PcrlSnapshot,
    PseudonymCert,
    PseudoRequest,
    RevokeCommand,
    RevokeNotice,
    RevokeResult,
    RsuCert,
    RsuRegistration,
    Token,
    TokenBatch,
    TokenReport,
    TokenRequest,
    WindowTick,
)

log = logging.getLogger(__name__)

# CA
ENROLL_REQ, ENROLL_RESP = 0x10, 0x11
TOKEN_REQ, TOKEN_RESP = 0x12, 0x13
REVOKE_CMD, REVOKE_RESP = 0x14, 0x15
WINDOW_ADVANCE = 0x16
RSU_REGISTER, RSU_REGISTER_RESP = 0x17, 0x18
CA_INFO_REQ, CA_INFO_RESP = 0x19, 0x1A
# RSU
PSEUDO_REQ, PSEUDO_RESP = 0x20, 0x21
PCRL_GET, PCRL_RESP = 0x22, 0x23
REVOKE_NOTICE = 0x24
TOKEN_REPORT = 0x25
PCRL_PUSH = 0x26
# generic
ACK = 0x7E
ERROR = 0x7F

Handler = Callable[[int, bytes], Tuple[int, bytes]]


def error_frame(code: str, detail: str = "") -> Tuple[int, bytes]:
    return ERROR, codec.encode(ErrorReply(code.encode(), detail.encode()))


def dispatch(routes: Dict[int, Callable[[bytes], Tuple[int, bytes]]], kind: int, body: bytes
             ) -> Tuple[int, bytes]:
    """Route one request; protocol and codec errors become ERROR replies."""
    fn = routes.get(kind)
    if fn is None:
        return error_frame("unknown_kind", f"0x{kind:02x}")
    try:
        return fn(body)
    except ProtocolError as exc:
        return error_frame(exc.code, exc.detail)
    except codec.CodecError as exc:
        return error_frame("decode_error", str(exc))
    except ValueError as exc:
        return error_frame("invalid_request", str(exc))


def _unwrap(kind: int, body: bytes, expect: int) -> bytes:
    if kind == ERROR:
        err = codec.decode(body, ErrorReply)
        raise ProtocolError(err.code.decode(), err.detail.decode())
    if kind != expect:
        raise ProtocolError("unexpected_reply", f"0x{kind:02x}")
    return body


# -- transports --------------------------------------------------------------

class Loopback:
    """In-process transport: requests are framed, handed to a handler and
    the reply unframed, exactly as over a socket."""

    def __init__(self, handler: Handler):
        self.handler = handler
        self.up = True
        self.bytes_sent = 0
        self.bytes_received = 0

    def call(self, kind: int, body: bytes = b"") -> Tuple[int, bytes]:
        if not self.up:
            raise TransportTimeout("link down")
        req = codec.frame(kind, body)
        self.bytes_sent += len(req)
        k, b, _ = codec.unframe(req)
        rk, rb = self.handler(k, b)
        resp = codec.frame(rk, rb)
        self.bytes_received += len(resp)
        rk, rb, _ = codec.unframe(resp)
        return rk, rb


class TcpClient:
    """One persistent connection; reconnects on demand."""

    def __init__(self, addr: Tuple[str, int], timeout_s: float = 2.0):
        self.addr = addr
        self.timeout_s = timeout_s
        self._sock: Optional[socket.socket] = None
        self._file = None
        self._lock = threading.Lock()

    def _connect(self):
        self._sock = socket.create_connection(self.addr, timeout=self.timeout_s)
        self._file = self._sock.makefile("rwb")

    def close(self):
        if self._sock is not None:
            try:
                self._file.close()
                self._sock.close()
            finally:
                self._sock = self._file = None

    def call(self, kind: int, body: bytes = b"") -> Tuple[int, bytes]:
        with self._lock:
            try:
                if self._sock is None:
                    self._connect()
                codec.write_frame(self._file, kind, body)
                got = codec.read_frame(self._file)
            except socket.timeout as exc:
                self.close()
                raise TransportTimeout(str(exc)) from exc
            except OSError:
                self.close()
                raise
            if got is None:
                self.close()
                raise ConnectionError("peer closed connection")
            return got


class _FrameHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            try:
                got = codec.read_frame(self.rfile)
            except (EOFError, codec.CodecError, OSError) as exc:
                log.debug("closing connection: %s", exc)
                return
            if got is None:
                return
            kind, body = self.server.app(*got)
            codec.write_frame(self.wfile, kind, body)


class FrameServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr: Tuple[str, int], app: Handler):
        self.app = app
        super().__init__(addr, _FrameHandler)

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def parse_addr(text: str) -> Tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {text!r}")
    return host, int(port)


# -- typed clients -----------------------------------------------------------

class CAClient:
    def __init__(self, transport):
        self.t = transport

    def _call(self, kind, rec, expect):
        k, b = self.t.call(kind, codec.encode(rec) if rec is not None else b"")
        return _unwrap(k, b, expect)

    def info(self) -> CaInfo:
        return codec.decode(self._call(CA_INFO_REQ, None, CA_INFO_RESP), CaInfo)

    def enroll(self, vk: bytes) -> EnrollmentCert:
        return codec.decode(self._call(ENROLL_REQ, EnrollRequest(vk), ENROLL_RESP), EnrollmentCert)

    def token_gen(self, ec, req, proof) -> List[Token]:
        body = self._call(TOKEN_REQ, TokenRequest(ec, req, proof), TOKEN_RESP)
        return codec.decode(body, TokenBatch).tokens

    def revoke(self, cmd: RevokeCommand) -> RevokeResult:
        return codec.decode(self._call(REVOKE_CMD, cmd, REVOKE_RESP), RevokeResult)

    def advance_window(self, index: int) -> None:
        self._call(WINDOW_ADVANCE, WindowTick(index), ACK)

    def register_rsu(self, rsu_id: bytes, vk: bytes, region: bytes) -> RsuCert:
        body = self._call(RSU_REGISTER, RsuRegistration(rsu_id, vk, region), RSU_REGISTER_RESP)
        return codec.decode(body, RsuCert)


class RSUClient:
    def __init__(self, transport):
        self.t = transport

    def pseudo_gen(self, token: Token, vk: bytes) -> PseudonymCert:
        k, b = self.t.call(PSEUDO_REQ, codec.encode(PseudoRequest(token, vk)))
        return codec.decode(_unwrap(k, b, PSEUDO_RESP), PseudonymCert)

    def get_pcrl(self) -> PcrlSnapshot:
        k, b = self.t.call(PCRL_GET, b"")
        return codec.decode(_unwrap(k, b, PCRL_RESP), PcrlSnapshot)

    def send_notice(self, notice: RevokeNotice) -> None:
        _unwrap(*self.t.call(REVOKE_NOTICE, codec.encode(notice)), ACK)

    def push_pcrl(self, snap: PcrlSnapshot) -> None:
        _unwrap(*self.t.call(PCRL_PUSH, codec.encode(snap)), ACK)

    def advance_window(self, index: int) -> None:
        _unwrap(*self.t.call(WINDOW_ADVANCE, codec.encode(WindowTick(index))), ACK)


class BackendClient:
    def __init__(self, transport):
        self.t = transport

    def report(self, rep: TokenReport) -> None:
        _unwrap(*self.t.call(TOKEN_REPORT, codec.encode(rep)), ACK)
