import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsmkit.comparative import PairedDictionaries, align_pairs, comparative_rsm, relative_usage_change
from rsmkit.errors import DegenerateDelta, DuplicateJoinKey, EmptyIntersection
from rsmkit.machine import load_model
from rsmkit.pipeline import HyperParams
from rsmkit.profile import Dictionary, ProfileTable, RunRecord
from rsmkit.synthetic import FIXTURE_EVENTS, scaled_variant, synthetic_profile
from rsmkit.targets import TargetVector

FAST = HyperParams(draws=2000, seed=0)
DRAM = FIXTURE_EVENTS["DRAM"]


@pytest.fixture(scope="module")
def model():
    return load_model()


def table(kernel, rows):
    """rows: (workload, frequency, time, {event: count})"""
    recs = [RunRecord(kernel, w, t, 0.5, ev, f) for w, f, t, ev in rows]
    return ProfileTable(recs, sorted({e for r in recs for e in r.event_counts}))


def test_aligned_rows():
    a = table("k1", [("w1", None, 1.0, {"e1": 1.0}), ("w2", None, 2.0, {"e1": 2.0})])
    b = table("k2", [("w2", None, 3.0, {"e1": 5.0}), ("w1", None, 4.0, {"e1": 6.0})])
    p = align_pairs(a, "k1", b, "k2")
    assert p.d1.row_labels == ["w1", "w2"]
    assert p.d2.values.ravel().tolist() == [6.0, 5.0]
    assert np.array_equal(p.delta_prime.values, -p.delta.values)


def test_shared_time_scale():
    a = table("k1", [("w1", None, 1.0, {"e": 1.0})])
    b = table("k2", [("w1", None, 4.0, {"e": 1.0})])
    p = align_pairs(a, "k1", b, "k2")
    assert p.t1.values.tolist() == [0.25] and p.t2.values.tolist() == [1.0]


def test_disjoint_workloads():
    a = table("k1", [("w1", None, 1.0, {"e1": 1.0})])
    b = table("k2", [("w2", None, 1.0, {"e1": 1.0})])
    with pytest.raises(EmptyIntersection):
        align_pairs(a, "k1", b, "k2")


def test_column_intersection():
    a = table("k1", [("w1", None, 1.0, {"e1": 1.0})])
    b = table("k2", [("w1", None, 1.0, {"e1": 1.0, "e2": 2.0})])
    p = align_pairs(a, "k1", b, "k2")
    assert p.d1.col_labels == ["e1"] == p.d2.col_labels
    assert p.dropped_columns == {"first_only": [], "second_only": ["e2"]}


def test_unmatched_rows_reported():
    a = table("k1", [("w1", None, 1.0, {"e": 1.0}), ("w3", None, 1.0, {"e": 1.0})])
    b = table("k2", [("w1", None, 1.0, {"e": 1.0}), ("w2", None, 1.0, {"e": 1.0})])
    p = align_pairs(a, "k1", b, "k2")
    assert p.dropped_rows == {"first": ["w3"], "second": ["w2"]}


def test_duplicate_join_key():
    # two replicates kept apart share the (workload, frequency) join key
    recs = [RunRecord("k1", "w1", 1.0, 0.5, {"e": v}, 975, replicate=i) for i, v in enumerate((1.0, 2.0))]
    a = ProfileTable(recs, ["e"])
    with pytest.raises(DuplicateJoinKey):
        align_pairs(a, "k1", a, "k1", average_replicates=False)


def _pair(d1, d2, dt):
    n = d1.shape[0]
    labels = [f"r{i}" for i in range(n)]
    cols = DRAM + FIXTURE_EVENTS["BANK"] + FIXTURE_EVENTS["FMA"]
    t2 = np.zeros(n)
    return PairedDictionaries(Dictionary(d1, labels, cols), Dictionary(d2, labels, cols),
                              TargetVector("ts", dt, labels), TargetVector("ts", t2, labels), ("a", "b"))


def _dram_fixture(factor, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    d1 = rng.lognormal(3.0, 0.4, size=(24, 6))
    d2 = d1.copy()
    d2[:, :2] *= factor
    d2[:, 2:] *= 1 + noise * rng.normal(size=(24, 4))
    dt = (d1[:, :2] - d2[:, :2]).sum(axis=1)  # proportional to the DRAM delta
    return d1, d2, dt


def _correlation_oracle(p):
    """Column most correlated with dt in the delta' dictionary."""
    dp = p.delta_prime.values
    dp = dp / np.where(np.linalg.norm(dp, axis=0) > 0, np.linalg.norm(dp, axis=0), 1.0)
    return p.d1.col_labels[int(np.argmax(np.abs(dp.T @ p.dt)))]


@pytest.mark.parametrize("factor,sign", [(2.0, 1.0), (0.5, -1.0)])
@pytest.mark.parametrize("noise", [0.0, 0.05])
def test_scaled_dram_direction(model, factor, sign, noise):
    p = _pair(*_dram_fixture(factor, noise=noise))
    assert _correlation_oracle(p) in DRAM
    res = comparative_rsm(p, model, FAST)
    bars = {g: r.bar_value for g, r in res.per_resource.items()}
    top = max(bars, key=lambda g: abs(bars[g]))
    assert top == "DRAM"
    assert np.sign(bars["DRAM"]) == sign


@pytest.mark.parametrize("factor,sign", [(2.0, 1.0), (0.5, -1.0)])
def test_scaled_profiles_direction(model, factor, sign):
    w = {e: 0.2 for e in DRAM + FIXTURE_EVENTS["BANK"] + FIXTURE_EVENTS["L2"]}
    base = synthetic_profile(3, weights=w)
    variant = scaled_variant(base, "DRAM", factor, seed=1, jitter=0.05, kernel="opt")
    res = comparative_rsm(align_pairs(base.table, "kernel", variant, "opt"), model, FAST)
    bars = {g: r.bar_value for g, r in res.per_resource.items()}
    assert max(bars, key=lambda g: abs(bars[g])) == "DRAM"
    assert np.sign(bars["DRAM"]) == sign


def test_neg_and_pos_agree(model):
    res = comparative_rsm(_pair(*_dram_fixture(2.0, noise=0.05)), model, FAST)
    for r in res.per_resource.values():
        assert r.neg_rsm == pytest.approx(r.pos_rsm, abs=1e-12)
        assert abs(r.bar_value) == max(r.neg_rsm, r.pos_rsm)


def test_identical_dictionaries(model):
    d1, _, _ = _dram_fixture(1.0)
    with pytest.raises(DegenerateDelta):
        comparative_rsm(_pair(d1, d1.copy(), np.ones(24)), model, FAST)


def test_zero_target_difference(model):
    d1, d2, _ = _dram_fixture(2.0)
    with pytest.raises(DegenerateDelta):
        comparative_rsm(_pair(d1, d2, np.zeros(24)), model, FAST)


def _usage_pair(m1, m2):
    d1 = np.full((2, 2), m1, dtype=float)
    d2 = np.full((2, 2), m2, dtype=float)
    labels = ["r0", "r1"]
    cols = ["fb_p0_read_sectors", "fb_p1_write_queries"]
    tv = TargetVector("ts", np.zeros(2), labels)
    return PairedDictionaries(Dictionary(d1, labels, cols), Dictionary(d2, labels, cols), tv, tv, ("a", "b"))


@pytest.mark.parametrize("m1,m2,rel,undefined", [(10, 15, 0.5, False), (7, 7, 0.0, False), (0, 5, None, True),
                                                 (0, 0, 0.0, False)])
def test_usage_change(model, m1, m2, rel, undefined):
    ch = relative_usage_change(_usage_pair(m1, m2), model)["DRAM"]
    assert ch.rel_change == rel and ch.undefined == undefined


def test_pct_change_is_baseline_relative(model):
    ch = relative_usage_change(_usage_pair(10, 5), model)["DRAM"]
    assert ch.pct_change == -0.5 and ch.rel_change == -1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e6), st.floats(1e-3, 1e6))
def test_usage_change_antisymmetric(model, m1, m2):
    p = _usage_pair(m1, m2)
    a = relative_usage_change(p, model)["DRAM"].rel_change
    b = relative_usage_change(p.swapped(), model)["DRAM"].rel_change
    assert abs(a + b) <= 1e-9 * max(1.0, abs(a))
