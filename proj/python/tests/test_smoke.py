import pathlib

import pytest

import rclab

ROOT = pathlib.Path(__file__).resolve().parents[2]


def small_scenario(**kw):
    s = {
        "seed": 5,
        "channel": {"trace": {"kind": "constant", "rssi_dbm": -50.0}},
        "workloads": [{"kind": "peak_throughput", "duration_s": 1.0}],
        "algorithms": ["fixed:0", "fixed:7"],
        "pairs": 3,
    }
    s.update(kw)
    return s


def test_ab_normalizes_and_is_deterministic():
    a = rclab.ab(small_scenario())
    b = rclab.ab(small_scenario(), threads=1)
    assert a == b
    scores = {c["algorithm"]: c["score"] for c in a["cells"]}
    assert scores["fixed:7"] == 1.0
    assert 0 < scores["fixed:0"] < 1.0
    assert len(a["pair_info"]) == 3


def test_ab_rejects_bad_program():
    s = small_scenario(algorithms=["minstrel", "02_unchecked_state_index.rcp"])
    with pytest.raises(rclab.AlgorithmRejected):
        rclab.ab(s, base_dir=ROOT / "tests" / "fixtures" / "lint")


def test_bad_scenario_is_value_error():
    with pytest.raises(ValueError):
        rclab.ab(small_scenario(pairs=0))


def test_run_workload_voip():
    r = rclab.run_workload("voip", "iterate3", small_scenario())
    assert r["kind"] == "voip"
    assert 4.0 < r["voip_mos"] <= 4.5


def test_sweep_cycle_exactness():
    r = rclab.sweep(rssi_dbm=-40.0, frames_per_rate=1, cycles=2)
    assert r["total_frames"] == 16
    assert [row["frames"] for row in r["rates"]] == [2] * 8


def test_sweep_matches_oracle():
    r = rclab.sweep(rssi_dbm=-72.0, frames_per_rate=50, cycles=100, seed=9)
    assert r["best_goodput_mcs"] == rclab.oracle_mcs(-72.0)


def test_noise_demo_constant_trace():
    r = rclab.noise_demo(trials=10, constant=True)
    assert r["naive_pick_error_rate"] == 0.0
    assert r["normalized_pick_error_rate"] == 0.0
    assert len(r["series"]) == 10


def test_lint_and_verify():
    clean = (ROOT / "policies" / "iterate3.rcp").read_text()
    out = rclab.lint(clean, verify=True)
    assert out["diagnostics"] == []
    assert out["verifier"]["ok"]
    bad = rclab.lint("state s: u8[4];\nwrite_rate(", verify=False)
    assert "parse_error" in bad
