import json
import os
import socket
import subprocess
import sys

import pytest

from tvss.cli import main

SMALL = {"passes": 1000, "linkability_passes": 10_000, "fleet_size": 5, "windows": 3,
         "clone_window": 1, "regions": 2}


def run(*args):
    return main(list(args))


def test_no_subcommand_is_usage_error(capsys):
    assert run() == 1
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "usage"


def test_bad_flag_is_usage_error(capsys):
    assert run("game", "--trials", "0") == 1
    assert run("rsu", "--listen", "x", "--region", "00") == 1
    assert run("bogus") == 1


def test_vectors_check(capsys):
    assert run("vectors", "--check") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["failures"] == 0 and out["vectors"] >= 18


def test_missing_config_is_runtime_error(tmp_path, capsys):
    assert run("sim", "--config", str(tmp_path / "nope.json"), "--seed", "1",
               "--out", str(tmp_path / "o")) == 2
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert err["error"] == "FileNotFoundError"


def test_sim_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    for d in ("a", "b"):
        assert run("sim", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / d)) == 0
    for name in ("metrics.json", "success_ratio.csv", "pcrl_sizes.csv", "linkability.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "a" / "metrics.json").read_text())["config"]["seed"] == 4


def test_game_output_is_deterministic(capsys):
    assert run("game", "--trials", "6", "--seed", "3") == 0
    first = capsys.readouterr().out
    assert run("game", "--trials", "6", "--seed", "3") == 0
    assert capsys.readouterr().out == first
    lines = [json.loads(x) for x in first.splitlines()]
    assert [x["branch"] for x in lines] == ["forgery", "anonymity", "unlinkability"]


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _spawn(*args):
    env = dict(os.environ, PYTHONUNBUFFERED="1")
    p = subprocess.Popen([sys.executable, "-m", "tvss.cli", *args], stdout=subprocess.PIPE,
                         stderr=subprocess.PIPE, text=True, env=env)
    line = p.stdout.readline()
    if not line:
        p.kill()
        raise AssertionError(p.stderr.read())
    return p, json.loads(line)


def test_tcp_services_end_to_end(tmp_path):
    procs = []
    try:
        ca, ann = _spawn("ca", "--listen", "127.0.0.1:0", "--state", str(tmp_path / "ca"))
        procs.append(ca)
        ca_addr = ann["listen"]
        rsu_port = _free_port()
        (tmp_path / "rsus.txt").write_text(f"127.0.0.1:{rsu_port}  # only RSU\n")
        be, ann = _spawn("backend", "--listen", "127.0.0.1:0", "--ca", ca_addr,
                         "--rsus", str(tmp_path / "rsus.txt"))
        procs.append(be)
        rsu, ann = _spawn("rsu", "--listen", f"127.0.0.1:{rsu_port}", "--region",
                          "00000000000000aa", "--backend", ann["listen"],
                          "--ca-pub", str(tmp_path / "ca" / "ca.pub"), "--ca", ca_addr)
        procs.append(rsu)
        assert ann["region"] == "00000000000000aa"
        state = tmp_path / "obu" / "state.json"
        out = subprocess.run([sys.executable, "-m", "tvss.cli", "obu", "--ca", ca_addr,
                              "--tokens-window", "3", "--state", str(state),
                              "--rsu", f"127.0.0.1:{rsu_port}"],
                             capture_output=True, text=True, timeout=60)
        assert out.returncode == 0, out.stderr
        res = json.loads(out.stdout)
        assert res["enrolled"] and res["fetched"] == 3 and res["refresh"] == "refreshed"
        again = subprocess.run([sys.executable, "-m", "tvss.cli", "obu", "--ca", ca_addr,
                                "--tokens-window", "3", "--state", str(state)],
                               capture_output=True, text=True, timeout=60)
        res = json.loads(again.stdout)
        assert not res["enrolled"] and res["fetched"] == 0
    finally:
        for p in procs:
            p.terminate()
        for p in procs:
            try:
                p.wait(timeout=5)
            except subprocess.TimeoutExpired:
                p.kill()
            p.stdout.close()
            p.stderr.close()


def test_obu_against_dead_ca_is_runtime_error(tmp_path, capsys):
    port = _free_port()
    assert run("obu", "--ca", f"127.0.0.1:{port}", "--tokens-window", "1",
               "--state", str(tmp_path / "s.json")) == 2
    assert "error" in json.loads(capsys.readouterr().err.splitlines()[-1])
