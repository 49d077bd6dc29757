import math
from dataclasses import replace

import numpy as np
import pytest

from tvss.sim.config import ScenarioConfig
from tvss.sim.coverage import COVERAGE_TABLE, FitError, coverage_fit, fit_row
from tvss.sim.linkability import geometric_window, inter_rsu_minutes, window_stats
from tvss.sim.pcrl import (
    budget_bytes,
    calibrate_efficiency,
    pcrl_sizes,
    run_pcrl_download,
    snapshot_wire_bytes,
)
from tvss.sim.refresh import (
    EDGE,
    Leg,
    PassDraws,
    SchemeProfile,
    calibrate_cloud_median,
    default_profiles,
    pass_outcomes,
    pass_outcomes_des,
    run_refresh_experiment,
    success_ratio,
)
from tvss.sim.scenario import run_scenario


def small_cfg(**kw):
    base = dict(passes=2000, linkability_passes=20_000, fleet_size=6, windows=4,
                clone_window=1, regions=2)
    base.update(kw)
    return ScenarioConfig(**base)


# -- coverage ----------------------------------------------------------------

@pytest.mark.parametrize("speed", sorted(COVERAGE_TABLE))
def test_fit_pins_support_median_and_mean(speed):
    lo, med, mean, hi = COVERAGE_TABLE[speed]
    fit = coverage_fit(speed)
    assert fit.quantile(0.5) == pytest.approx(med)
    assert fit.quantile(0.0) == pytest.approx(lo)
    assert fit.model_mean() == pytest.approx(mean, rel=1e-9)
    x = fit.sample(np.random.default_rng(speed), 100_000)
    assert lo <= x.min() and x.max() <= hi
    assert abs(x.mean() - mean) / mean < 0.10
    assert abs(np.median(x) - med) / med < 0.10


@pytest.mark.parametrize("speed", [85, 25])
def test_sf_matches_samples(speed):
    fit = coverage_fit(speed)
    x = fit.sample(np.random.default_rng(1), 100_000)
    for c in np.linspace(fit.lo, fit.hi, 9):
        assert float(fit.sf(c)) == pytest.approx(np.mean(x >= c), abs=0.01)


def test_fit_degenerate_and_inconsistent():
    fit = fit_row(2.0, 2.0, 2.0, 2.0)
    assert fit.degenerate and np.all(fit.quantile([0.1, 0.9]) == 2.0)
    with pytest.raises(FitError):
        fit_row(1.0, 5.0, 3.0, 4.0)
    with pytest.raises(KeyError):
        coverage_fit(45)


# -- refresh -----------------------------------------------------------------

def _draws(speed, n=3000, phase=False, seed=0, legs=2, retry=500.0):
    return PassDraws.draw(coverage_fit(speed), n, retry, legs, np.random.default_rng(seed), phase)


def test_zero_latency_always_succeeds():
    prof = SchemeProfile("tvss", (Leg(EDGE, 0.0, 0.3, 30.0),), 0.0)
    assert success_ratio(prof, _draws(85)) == 1.0


def test_latency_beyond_coverage_always_fails():
    prof = SchemeProfile("tvss", (Leg(EDGE, 1e6, 0.01, 1e9),), 0.0)
    assert success_ratio(prof, _draws(25)) == 0.0


def test_timeout_kills_attempt():
    prof = SchemeProfile("tvss", (Leg(EDGE, 100.0, 0.01, 30.0),), 0.0)
    assert success_ratio(prof, _draws(25)) == 0.0


@pytest.mark.parametrize("phase", [False, True])
def test_des_matches_vectorised(phase):
    cfg = ScenarioConfig()
    for prof in default_profiles(cfg, 700.0, 600.0).values():
        d = _draws(65, n=300, phase=phase, seed=7)
        assert np.array_equal(pass_outcomes(prof, d), pass_outcomes_des(prof, d))


def test_calibration_hits_target():
    cfg = ScenarioConfig()
    base = default_profiles(cfg)["secmace-like"]
    d = _draws(55, n=4000, phase=True, seed=3)
    m = calibrate_cloud_median(base, d, 0.46)
    assert success_ratio(base.with_cloud_median(m), d) == pytest.approx(0.46, abs=2e-3)
    with pytest.raises(ValueError):
        calibrate_cloud_median(replace(base, rsu_compute_ms=1e6), d, 0.46)


def test_scheme_ordering_at_every_speed():
    res = run_refresh_experiment(small_cfg())
    for v in ScenarioConfig().speeds_mph:
        r = {s: res.ratios[s][v] for s in res.ratios}
        assert r["tvss"] >= r["secmace-like"] >= r["scms-like"]


def test_profiles_shape_checked():
    with pytest.raises(ValueError):
        SchemeProfile("tvss", ()).check()


# -- PCRL --------------------------------------------------------------------

def test_pcrl_sizes_known_cells():
    s = pcrl_sizes(ScenarioConfig())
    assert s["EntireUS"][0.0129] / 1e6 == pytest.approx(176.4, rel=0.02)
    assert s["delta-daily"][0.0129] / 1e6 == pytest.approx(0.49, rel=0.02)
    assert s["EntireUS"][0.05] / s["EntireUS"][0.0129] == pytest.approx(3.876, abs=5e-4)
    assert s["delta-weekly"][0.05] * 52 == pytest.approx(s["EntireUS"][0.05])


def test_snapshot_wire_size():
    assert snapshot_wire_bytes(0) == 93
    assert snapshot_wire_bytes(10) == 93 + 320


def test_efficiency_calibration_round_trip():
    cfg = ScenarioConfig()
    size = pcrl_sizes(cfg)["delta-daily"][0.0129]
    eff = calibrate_efficiency(cfg, size, 55, 0.42)
    assert float(coverage_fit(55).sf(size * 8 / (cfg.dsrc_bps * eff))) == pytest.approx(0.42)
    with pytest.raises(ValueError):
        calibrate_efficiency(cfg, 1e12, 55, 0.42)


def test_download_success_shape():
    cfg = small_cfg()
    res = run_pcrl_download(cfg)
    assert res.ratios[("local", 0.0129, 25)] == 1.0
    for r in cfg.revocation_ratios:
        for v in cfg.speeds_mph:
            assert res.ratios[("EntireUS", r, v)] == 0.0
            # larger lists never download more often
            chain = [res.ratios[(s, r, v)] for s in ("local", "delta-daily", "delta-weekly")]
            assert chain == sorted(chain, reverse=True)
    assert budget_bytes(1.0, 1.0, 8e6) == pytest.approx(1e6)


# -- linkability -------------------------------------------------------------

def test_inter_rsu_and_geometric():
    assert inter_rsu_minutes(20, 65) == pytest.approx(18.4615, rel=1e-4)
    assert geometric_window(20, 65, 0.5) == pytest.approx(2 * 18.4615, rel=1e-4)
    assert geometric_window(20, 65, 0.0) == math.inf


def test_window_stats_tvss_near_spacing():
    cfg = small_cfg()
    prof = default_profiles(cfg)["tvss"]
    w = window_stats(prof, cfg, 65)
    assert w.mean_min == pytest.approx(inter_rsu_minutes(20, 65), rel=0.02)
    assert w.rel_gap < 0.05


# -- scenario ----------------------------------------------------------------

def test_scenario_is_byte_identical(tmp_path):
    cfg = small_cfg(seed=11)
    run_scenario(cfg, tmp_path / "a")
    run_scenario(small_cfg(seed=11), tmp_path / "b")
    for name in ("metrics.json", "success_ratio.csv", "pcrl_sizes.csv", "linkability.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ScenarioConfig(passes=0)
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        ScenarioConfig(clone_window=9, windows=4)
    p = tmp_path / "c.json"
    p.write_text('{"passes": 10, "seed": 4}')
    assert ScenarioConfig.load(p).passes == 10
