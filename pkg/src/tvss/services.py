"""Bind node objects to wire message kinds."""

from __future__ import annotations

import logging
import threading
from typing import Callable, Optional, Tuple

from . import codec, wire
from .backend import BackendMonitor
from .ca import CertificateAuthority
from .errors import ProtocolError
from .records import (
    CaInfo,
    EnrollRequest,
    PcrlSnapshot,
    PseudoRequest,
    RevokeCommand,
    RevokeNotice,
    RevokeResult,
    RsuRegistration,
    TokenBatch,
    TokenReport,
    TokenRequest,
    WindowTick,
)
from .rsu import NoticeRejected, RoadSideUnit

log = logging.getLogger(__name__)

_ACK = (wire.ACK, b"")


def ca_app(ca: CertificateAuthority) -> wire.Handler:
    def info(body):
        return wire.CA_INFO_RESP, codec.encode(CaInfo(ca.vk, ca.t_minutes, ca.window_index))

    def enroll(body):
        req = codec.decode(body, EnrollRequest)
        return wire.ENROLL_RESP, codec.encode(ca.enroll(req.vk))

    def tokens(body):
        req = codec.decode(body, TokenRequest)
        return wire.TOKEN_RESP, codec.encode(TokenBatch(ca.token_gen(req.ec, req.req, req.proof)))

    def revoke(body):
        cmd = codec.decode(body, RevokeCommand)
        notice, snaps = ca.revoke_by_token(cmd.token_id, cmd.entries)
        return wire.REVOKE_RESP, codec.encode(RevokeResult(notice, snaps))

    def advance(body):
        tick = codec.decode(body, WindowTick)
        while ca.window_index < tick.index:
            ca.advance_window(ca.window_index + 1)
        return _ACK

    def register(body):
        reg = codec.decode(body, RsuRegistration)
        return wire.RSU_REGISTER_RESP, codec.encode(ca.register_rsu(reg.rsu_id, reg.vk, reg.region))

    routes = {
        wire.CA_INFO_REQ: info,
        wire.ENROLL_REQ: enroll,
        wire.TOKEN_REQ: tokens,
        wire.REVOKE_CMD: revoke,
        wire.WINDOW_ADVANCE: advance,
        wire.RSU_REGISTER: register,
    }
    return lambda kind, body: wire.dispatch(routes, kind, body)


def rsu_app(rsu: RoadSideUnit, auto_tick: bool = True) -> wire.Handler:
    def pseudo(body):
        req = codec.decode(body, PseudoRequest)
        if auto_tick:
            rsu.tick()
        return wire.PSEUDO_RESP, codec.encode(rsu.pseudo_gen(req.token, req.vk))

    def pcrl(body):
        if auto_tick:
            rsu.tick()
        return wire.PCRL_RESP, codec.encode(rsu.serve_pcrl())

    def notice(body):
        try:
            rsu.apply_revoke_notice(codec.decode(body, RevokeNotice))
        except NoticeRejected as exc:
            raise ProtocolError("bad_signature", str(exc)) from exc
        return _ACK

    def push(body):
        try:
            rsu.accept_pcrl(codec.decode(body, PcrlSnapshot))
        except NoticeRejected as exc:
            raise ProtocolError("bad_signature", str(exc)) from exc
        return _ACK

    def advance(body):
        tick = codec.decode(body, WindowTick)
        while rsu.window_index < tick.index:
            rsu.advance_window(rsu.window_index + 1)
        return _ACK

    routes = {
        wire.PSEUDO_REQ: pseudo,
        wire.PCRL_GET: pcrl,
        wire.REVOKE_NOTICE: notice,
        wire.PCRL_PUSH: push,
        wire.WINDOW_ADVANCE: advance,
    }
    return lambda kind, body: wire.dispatch(routes, kind, body)


def backend_app(monitor: BackendMonitor) -> wire.Handler:
    def report(body):
        monitor.enqueue(body)
        return _ACK

    def advance(body):
        monitor.advance_window(codec.decode(body, WindowTick).index)
        return _ACK

    routes = {wire.TOKEN_REPORT: report, wire.WINDOW_ADVANCE: advance}
    return lambda kind, body: wire.dispatch(routes, kind, body)


class Periodic:
    """Run ``fn`` every ``interval_s`` seconds on a daemon thread."""

    def __init__(self, fn: Callable[[], object], interval_s: float):
        self.fn = fn
        self.interval_s = interval_s
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> "Periodic":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def _run(self):
        while not self._stop.wait(self.interval_s):
            try:
                self.fn()
            except Exception:
                log.exception("periodic task failed")

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
