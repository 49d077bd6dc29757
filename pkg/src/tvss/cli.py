"""``tvss`` command line: node services, simulator, security game, vectors.

Exit codes: 0 success, 1 usage error, 2 runtime error. Runtime errors are
written to stderr as one JSON object. ``TVSS_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional, Tuple

from . import __version__, core, crypto, golden, services, wire
from .backend import BackendMonitor
from .ca import CertificateAuthority
from .errors import ProtocolError
from .rsu import RoadSideUnit
from .vehicle import VehicleAgent

log = logging.getLogger("tvss")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _region(text: str) -> bytes:
    try:
        b = bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("region must be hex") from None
    if len(b) != 8:
        raise argparse.ArgumentTypeError("region must be 8 bytes (16 hex digits)")
    return b


def _addr(text: str) -> Tuple[str, int]:
    try:
        return wire.parse_addr(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _u64(text: str) -> int:
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("must fit in an unsigned 64-bit integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tvss", description="Token-based vehicular PKI nodes and experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", metavar="{ca,rsu,backend,obu,sim,game,vectors}",
                           parser_class=_Parser)

    ca = sub.add_parser("ca", help="run the certificate authority")
    ca.add_argument("--listen", type=_addr, required=True)
    ca.add_argument("--t-minutes", type=_positive, default=core.DEFAULT_T_MINUTES)
    ca.add_argument("--state", type=Path, required=True)
    ca.add_argument("--lookback", type=_positive, default=4)

    rsu = sub.add_parser("rsu", help="run a road-side unit")
    rsu.add_argument("--listen", type=_addr, required=True)
    rsu.add_argument("--region", type=_region, required=True)
    rsu.add_argument("--backend", type=_addr, required=True)
    rsu.add_argument("--ca-pub", type=Path, required=True)
    rsu.add_argument("--ca", type=_addr, required=True, help="CA address for registration")
    rsu.add_argument("--id", default=None, help="RSU id (default: rsu-<port>)")
    rsu.add_argument("--skew-s", type=int, default=30)
    rsu.add_argument("--report-interval-s", type=float, default=1.0)

    be = sub.add_parser("backend", help="run the report backend")
    be.add_argument("--listen", type=_addr, required=True)
    be.add_argument("--ca", type=_addr, required=True)
    be.add_argument("--rsus", type=Path, required=True, help="file with one RSU host:port per line")
    be.add_argument("--lookback", type=_positive, default=4)
    be.add_argument("--interval-s", type=float, default=1.0)

    obu = sub.add_parser("obu", help="enroll a vehicle, fetch tokens, optionally refresh a PC")
    obu.add_argument("--ca", type=_addr, required=True)
    obu.add_argument("--tokens-window", type=_positive, required=True,
                     help="number of windows to hold tokens for, from now")
    obu.add_argument("--state", type=Path, required=True)
    obu.add_argument("--rsu", type=_addr, default=None)

    sim = sub.add_parser("sim", help="run the simulator")
    sim.add_argument("--config", type=Path, required=True)
    sim.add_argument("--seed", type=_u64, required=True)
    sim.add_argument("--out", type=Path, required=True)

    game = sub.add_parser("game", help="play the security game")
    game.add_argument("--trials", type=_positive, default=10_000)
    game.add_argument("--seed", type=_u64, default=0)
    game.add_argument("--branch", choices=("all", "forgery", "anonymity", "unlinkability"),
                      default="all")

    vec = sub.add_parser("vectors", help="check golden vectors")
    vec.add_argument("--check", action="store_true", required=True)
    return p


# -- services ----------------------------------------------------------------

def _wall_window(t_minutes: int) -> int:
    return core.window_of(time.time(), t_minutes).index


def _announce(**fields) -> None:
    print(json.dumps(fields, sort_keys=True), flush=True)


def build_ca(args) -> Tuple[wire.FrameServer, List[services.Periodic]]:
    w = _wall_window(args.t_minutes)
    ca = CertificateAuthority.open_state(args.state, t_minutes=args.t_minutes, window_index=w,
                                         lookback=args.lookback)
    (Path(args.state) / "ca.pub").write_text(ca.vk.hex() + "\n")

    def roll():
        target = _wall_window(ca.t_minutes)
        while ca.window_index < target:
            ca.advance_window(ca.window_index + 1)

    roll()
    server = wire.FrameServer(args.listen, services.ca_app(ca))
    _announce(node="ca", listen="%s:%d" % server.server_address[:2], vk=ca.vk.hex(),
              window_index=ca.window_index)
    return server, [services.Periodic(roll, 1.0)]


def build_rsu(args) -> Tuple[wire.FrameServer, List[services.Periodic]]:
    vk_ca = bytes.fromhex(Path(args.ca_pub).read_text().strip())
    ca = wire.CAClient(wire.TcpClient(args.ca))
    info = ca.info()
    if info.vk != vk_ca:
        raise RuntimeError("CA at --ca does not match --ca-pub")
    key = crypto.random_keypair()
    rsu_id = (args.id or f"rsu-{args.listen[1]}").encode()
    cert = ca.register_rsu(rsu_id, key.verification_key, args.region)
    node = RoadSideUnit(cert, key, vk_ca, info.t_minutes, info.window_index, args.skew_s)
    node.tick()
    backend = wire.BackendClient(wire.TcpClient(args.backend))
    server = wire.FrameServer(args.listen, services.rsu_app(node))
    _announce(node="rsu", listen="%s:%d" % server.server_address[:2], rsu_id=rsu_id.decode(),
              region=args.region.hex())
    flush = services.Periodic(lambda: node.flush_reports(backend.report), args.report_interval_s)
    return server, [flush, services.Periodic(node.tick, 1.0)]


def _read_rsus(path: Path) -> List[Tuple[str, int]]:
    out = []
    for raw in Path(path).read_text().splitlines():
        raw = raw.split("#", 1)[0].strip()
        if raw:
            out.append(wire.parse_addr(raw.split()[0]))
    return out


def build_backend(args) -> Tuple[wire.FrameServer, List[services.Periodic]]:
    ca = wire.CAClient(wire.TcpClient(args.ca))
    info = ca.info()
    rsus = [wire.RSUClient(wire.TcpClient(a)) for a in _read_rsus(args.rsus)]

    def fanout(notice):
        for r in rsus:
            r.send_notice(notice)

    def push(snap):
        for r in rsus:
            r.push_pcrl(snap)

    monitor = BackendMonitor(ca.revoke, fanout, push, info.t_minutes, args.lookback)
    monitor.advance_window(info.window_index)
    server = wire.FrameServer(args.listen, services.backend_app(monitor))
    _announce(node="backend", listen="%s:%d" % server.server_address[:2], rsus=len(rsus))

    def cycle():
        monitor.advance_window(_wall_window(monitor.t_minutes))
        monitor.process_pending()

    return server, [services.Periodic(cycle, args.interval_s)]


def _serve(server: wire.FrameServer, tasks: List[services.Periodic]) -> int:
    for t in tasks:
        t.start()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        for t in tasks:
            t.stop()
        server.server_close()
    return 0


def run_obu(args) -> dict:
    ca = wire.CAClient(wire.TcpClient(args.ca))
    info = ca.info()
    if args.state.exists():
        agent = VehicleAgent.load(args.state)
        if agent.vk_ca != info.vk:
            raise RuntimeError("saved vehicle state belongs to a different CA")
        enrolled = False
    else:
        args.state.parent.mkdir(parents=True, exist_ok=True)
        agent = VehicleAgent.enroll(ca.enroll, info.vk, t_minutes=info.t_minutes)
        enrolled = True
    span = 60 * agent.t_minutes
    now = agent.window_index()
    first = max([now] + [i + 1 for i in agent.tokens])
    last = now + args.tokens_window
    fetched = 0
    if first < last:
        fetched = agent.request_tokens(ca.token_gen, first * span, last * span)
    out = {"enrolled": enrolled, "fetched": fetched, "held": len(agent.tokens),
           "window_index": now}
    if args.rsu is not None:
        rsu = wire.RSUClient(wire.TcpClient(args.rsu))
        out["refresh"] = str(agent.refresh_pc(rsu.pseudo_gen))
    agent.save(args.state)
    return out


# -- batch commands ----------------------------------------------------------

def run_sim(args) -> dict:
    from .sim.config import ScenarioConfig
    from .sim.scenario import run_scenario

    if not args.config.exists():
        raise FileNotFoundError(f"config not found: {args.config}")
    cfg = ScenarioConfig.load(args.config)
    cfg.seed = args.seed
    metrics = run_scenario(cfg, args.out)
    return {"out": str(args.out), "refresh_success": metrics["refresh_success"]}


def run_game_cmd(args) -> List[dict]:
    from .game import run_game
    return [r.to_json() for r in run_game(args.trials, args.seed, args.branch)]


def run_vectors(args) -> dict:
    bad = golden.check_all()
    if bad:
        raise RuntimeError("; ".join(f"{b.file}:{b.line} {b.reason}" for b in bad))
    return {"vectors": golden.count(), "failures": 0}


# -- entry -------------------------------------------------------------------

def _error(kind: str, detail: str) -> None:
    print(json.dumps({"error": kind, "detail": detail}, sort_keys=True), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("TVSS_LOG", "WARNING").upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _error("usage", str(exc))
        return 1
    if args.cmd is None:
        parser.print_usage(sys.stderr)
        _error("usage", "a subcommand is required")
        return 1
    try:
        if args.cmd == "ca":
            return _serve(*build_ca(args))
        if args.cmd == "rsu":
            return _serve(*build_rsu(args))
        if args.cmd == "backend":
            return _serve(*build_backend(args))
        if args.cmd == "obu":
            out = run_obu(args)
        elif args.cmd == "sim":
            out = run_sim(args)
        elif args.cmd == "game":
            for line in run_game_cmd(args):
                print(json.dumps(line, sort_keys=True))
            return 0
        else:
            out = run_vectors(args)
        print(json.dumps(out, sort_keys=True))
        return 0
    except ProtocolError as exc:
        _error(exc.code, exc.detail)
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        _error(type(exc).__name__, str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
