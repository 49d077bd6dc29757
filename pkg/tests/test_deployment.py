import pytest

from tvss.deployment import Deployment, region_id
from tvss.sim.fullstack import clone_summary, run_clone_scenario, run_tbl_compactness
from tvss.vehicle import RefreshStatus


def test_advance_time_crosses_windows():
    dep = Deployment(seed=1, t_minutes=15)
    w0 = dep.window_index
    dep.advance_time(3 * 900 + 10)
    assert dep.window_index == w0 + 3
    assert all(h.node.window_index == w0 + 3 for h in dep.rsus)
    assert dep.clock() == w0 * 900 + 3 * 900 + 10


def test_every_call_goes_through_frames():
    dep = Deployment(seed=2)
    car = dep.new_vehicle()
    dep.issue_tokens(car, 2)
    before = dep.rsus[0].link.bytes_sent
    assert car.refresh_pc(dep.rsus[0].pseudo).status is RefreshStatus.REFRESHED
    assert dep.rsus[0].link.bytes_sent > before
    assert dep.report_cycle() == 1


def test_same_seed_same_keys():
    a, b = Deployment(seed=9), Deployment(seed=9)
    assert a.ca.vk == b.ca.vk
    assert a.new_vehicle().ec == b.new_vehicle().ec
    assert region_id(3) == bytes(7) + b"\x03"


@pytest.mark.parametrize("seed", [0, 1])
def test_clone_detected_and_locked_out(seed):
    run = run_clone_scenario(seed, fleet=8, windows=5, clone_window=1)
    assert run.detected and run.detect_ticks == 1
    assert run.blacklist_ticks is not None and run.blacklist_ticks <= 2
    assert run.escapes == 0 and run.attempts_after > 0
    assert run.tbl_sizes and set(run.tbl_sizes) == {1}
    assert run.pcrl_hits >= 1
    assert run.pcrl_left_after_expiry == 0
    assert run.honest_failures == 0


def test_clone_needs_two_regions():
    with pytest.raises(ValueError):
        run_clone_scenario(0, regions=1)


@pytest.mark.parametrize("k,m", [(1, 5), (3, 10), (4, 2)])
def test_tbl_holds_one_entry_per_vehicle(k, m):
    run = run_tbl_compactness(seed=k * 31 + m, k=k, m=m)
    assert set(run.tbl_sizes) == {k}
    assert set(run.revoked_ids_per_rsu) == {k}


def test_clone_summary_aggregates():
    runs = [run_clone_scenario(s, fleet=6, windows=4, clone_window=1) for s in (5, 6)]
    s = clone_summary(runs)
    assert s["runs"] == 2 and s["detected"] == 2 and s["escapes"] == 0
    assert s["max_blacklist_ticks"] <= 2 and s["tbl_max"] == 1
