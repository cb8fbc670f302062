import math

import numpy as np
import pytest
from scipy.stats import binom

from nomaiot import phy, sysmodel
from nomaiot.errors import DomainError
from nomaiot.rng import generator
from nomaiot.sysmodel import OverheadProfile, TrafficModel


def test_activation_extremes():
    rng = np.random.default_rng(0)
    assert sysmodel.activate(TrafficModel(50, 0.0), 0, rng).size == 0
    assert sysmodel.activate(TrafficModel(50, 1.0), 0, rng).tolist() == list(range(50))
    with pytest.raises(DomainError):
        TrafficModel(10, 1.2)


def test_activation_mean():
    tm = TrafficModel(200, 0.03)
    counts = np.array([sysmodel.activate(tm, s, generator(1, s)).size for s in range(10_000)])
    sd = math.sqrt(200 * 0.03 * 0.97 / 10_000)
    assert abs(counts.mean() - 6.0) < 3 * sd


def test_single_signature_collides_everyone():
    reports = sysmodel.run_aloha_frame(TrafficModel(20, 0.5), 1, 200, seed=3)
    for r in reports:
        if len(r.active) >= 2:
            assert r.collision_count == len(r.active)
            assert set(r.outcomes) == {"signature-collision"}


def test_empty_slot_report():
    r = sysmodel.run_aloha_frame(TrafficModel(10, 0.0), 4, 1)[0]
    assert r.active == () and r.collision_count == 0 and r.outcomes == ()


def test_collision_count_consistent_with_multiset():
    for r in sysmodel.run_aloha_frame(TrafficModel(40, 0.2), 6, 300, seed=9):
        counts = {s: r.signatures.count(s) for s in r.signatures}
        assert r.collision_count == sum(c for c in counts.values() if c > 1)


def test_collision_rate_matches_binomial_birthday():
    tm, M, slots = TrafficModel(300, 0.01), 16, 10_000
    # independent composition of the binomial pmf with the birthday formula
    expected = sum(binom.pmf(k, 300, 0.01) * phy.collision_probability(k, M) for k in range(301))
    reports = sysmodel.run_aloha_frame(tm, M, slots, seed=4)
    freq = np.mean([r.collided for r in reports])
    assert abs(freq - expected) < 3 * math.sqrt(expected * (1 - expected) / slots)
    assert sysmodel.expected_collision_rate(tm, M) == pytest.approx(expected, rel=1e-12)


def test_aloha_reproducible_across_threads():
    tm = TrafficModel(100, 0.05)
    assert sysmodel.run_aloha_frame(tm, 8, 500, 2, threads=1) == \
        sysmodel.run_aloha_frame(tm, 8, 500, 2, threads=4)


def test_overhead_defaults():
    gb, gf = sysmodel.default_profiles()
    assert gb.control_bits == 300 and len(gb.messages) == 5
    assert gf.control_bits == 0
    out = sysmodel.overhead_compare(gb, gf, 100)
    assert out["grant_free"]["total_bits"] == 124
    assert out["grant_free"]["overhead_ratio"] == pytest.approx(0.24)
    assert out["grant_based"]["sizes"] == "assumed"


def test_grant_based_always_costlier_over_payload_range():
    gb, gf = sysmodel.default_profiles()
    for payload in range(40, 321):
        out = sysmodel.overhead_compare(gb, gf, payload)
        assert out["grant_based"]["overhead_ratio"] > out["grant_free"]["overhead_ratio"]


def test_overhead_scale_invariance_and_additivity():
    gb, gf = sysmodel.default_profiles(pilot_bits=10, message_bits=7)
    gb3, gf3 = sysmodel.default_profiles(pilot_bits=30, message_bits=21)
    a = sysmodel.overhead_compare(gb, gf, 50)
    b = sysmodel.overhead_compare(gb3, gf3, 150)
    for key in a:
        assert a[key]["overhead_ratio"] == pytest.approx(b[key]["overhead_ratio"])
        assert a[key]["total_bits"] == a[key]["control_bits"] + 10 + 50


def test_profile_json_roundtrip(tmp_path):
    import json
    gb, gf = sysmodel.default_profiles()
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"profiles": [gb.to_dict(), gf.to_dict()]}))
    loaded = sysmodel.load_profiles(path)
    assert loaded["grant-based"] == gb and loaded["grant-free"] == gf
    with pytest.raises(DomainError):
        OverheadProfile.from_dict({"name": "x", "messages": [
            {"name": "m", "direction": "UL", "bits": -1}]})


def test_label_permutation_symmetry():
    picks = np.array([3, 1, 3, 2])
    a = sysmodel._mark(0, np.arange(4), picks)
    perm = np.array([2, 0, 3, 1])
    b = sysmodel._mark(0, np.arange(4)[perm], picks[perm])
    assert [a.outcomes[i] for i in perm] == list(b.outcomes)
    assert a.collision_count == b.collision_count
