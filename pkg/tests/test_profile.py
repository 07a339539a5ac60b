import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsmkit.errors import (
    AllColumnsConstant,
    InconsistentEventSet,
    MissingColumn,
    NonNumericCell,
    UnknownKernel,
    UtilizationOutOfRange,
)
from rsmkit.profile import (
    ColumnSchema,
    Dictionary,
    ProfileTable,
    RowKeySpec,
    RunRecord,
    build_dictionary,
    normalize_columns,
    parse_profile_csv,
    write_profile_csv,
)

MINIMAL = "kernel,workload,time_s,sm_util,ev_a\nk1,w1,1.0,0.5,10\nk1,w2,2.0,0.6,20\n"


def test_minimal_file():
    table = parse_profile_csv(MINIMAL)
    assert len(table.records) == 2
    assert table.event_universe == ["ev_a"]
    r = table.records[1]
    assert (r.kernel_name, r.workload_id, r.exec_time_s, r.sm_utilization) == ("k1", "w2", 2.0, 0.6)
    assert r.event_counts == {"ev_a": 20.0}
    assert r.frequency_mhz is None and r.power_w is None


@pytest.mark.parametrize("source", [MINIMAL.encode(), io.BytesIO(MINIMAL.encode()), io.StringIO(MINIMAL),
                                    "\ufeff" + MINIMAL])
def test_source_kinds(source):
    assert len(parse_profile_csv(source).records) == 2


def test_utilization_out_of_range_names_row():
    bad = MINIMAL.replace("k1,w2,2.0,0.6", "k1,w2,2.0,1.7")
    with pytest.raises(UtilizationOutOfRange) as err:
        parse_profile_csv(bad)
    assert err.value.row == 2


def test_inconsistent_event_set():
    text = "kernel,workload,time_s,sm_util,ev_a,ev_b\nk1,w1,1.0,0.5,10,\nk1,w2,2.0,0.6,,20\n"
    with pytest.raises(InconsistentEventSet) as err:
        parse_profile_csv(text)
    assert err.value.kernel == "k1"


def test_kernels_may_record_different_events():
    text = "kernel,workload,time_s,sm_util,ev_a,ev_b\nk1,w1,1.0,0.5,10,\nk2,w1,2.0,0.6,,20\n"
    table = parse_profile_csv(text)
    assert table.events_for("k1") == ["ev_a"]
    assert table.events_for("k2") == ["ev_b"]


@pytest.mark.parametrize("missing", ["kernel", "workload", "time_s", "sm_util"])
def test_missing_required_column(missing):
    header, *rows = MINIMAL.splitlines()
    cols = header.split(",")
    keep = [i for i, c in enumerate(cols) if c != missing]
    text = "\n".join(",".join(line.split(",")[i] for i in keep) for line in [header] + rows)
    with pytest.raises(MissingColumn) as err:
        parse_profile_csv(text)
    assert err.value.name == missing


@pytest.mark.parametrize("cell", ["abc", "nan", "inf", "-3", "1_000"])
def test_bad_event_cells(cell):
    with pytest.raises(NonNumericCell) as err:
        parse_profile_csv(MINIMAL.replace(",20\n", f",{cell}\n"))
    assert err.value.row == 2 and err.value.col == "ev_a"


@pytest.mark.parametrize("freq", ["0", "1530.5", "-100"])
def test_bad_frequency(freq):
    text = "kernel,workload,frequency_mhz,time_s,sm_util,ev\nk,w,%s,1.0,0.5,1\n" % freq
    with pytest.raises(NonNumericCell):
        parse_profile_csv(text)


def test_custom_schema():
    schema = ColumnSchema(kernel="name", time="duration")
    text = "name,workload,duration,sm_util,ev\nk,w,1.5,0.5,3\n"
    table = parse_profile_csv(text, schema)
    assert table.records[0].exec_time_s == 1.5


def test_replicates_are_numbered():
    text = "kernel,workload,time_s,sm_util,ev_a\nk1,w1,1,0.5,10\nk1,w1,3,0.5,30\n"
    table = parse_profile_csv(text)
    assert [r.replicate for r in table.records] == [0, 1]


def _table(rows):
    return ProfileTable([RunRecord(k, w, t, u, ev, f) for k, w, f, t, u, ev in rows],
                        sorted({e for row in rows for e in row[5]}))


def test_dictionary_shape():
    table = _table([("k1", f"w{i}", None, 1.0, 0.5, {"a": i, "b": 2 * i}) for i in range(3)])
    d = build_dictionary(table, "k1")
    assert d.shape == (3, 2)
    assert d.col_labels == ["a", "b"]


def test_unknown_kernel():
    with pytest.raises(UnknownKernel):
        build_dictionary(parse_profile_csv(MINIMAL), "nope")


def test_replicate_averaging():
    text = "kernel,workload,time_s,sm_util,ev_a\nk1,w1,1,0.5,10\nk1,w1,3,0.5,30\n"
    table = parse_profile_csv(text)
    averaged = build_dictionary(table, "k1")
    assert averaged.values.tolist() == [[20.0]]
    separate = build_dictionary(table, "k1", RowKeySpec(average_replicates=False))
    assert separate.values.ravel().tolist() == [10.0, 30.0]
    assert separate.row_labels == ["w1#0", "w1#1"]


def test_row_order_is_canonical():
    rows = [("k", w, f, 1.0, 0.5, {"a": 1.0 + i}) for i, (w, f) in
            enumerate([("w2", 1530), ("w1", 1530), ("w1", 975), ("w2", 975)])]
    d = build_dictionary(_table(rows), "k")
    assert d.row_labels == ["w1@975MHz", "w1@1530MHz", "w2@975MHz", "w2@1530MHz"]


def test_workload_filter():
    rows = [("k", w, None, 1.0, 0.5, {"a": float(i)}) for i, w in enumerate(["w1", "w2", "w3"])]
    d = build_dictionary(_table(rows), "k", RowKeySpec(workloads=("w1", "w3")))
    assert d.row_labels == ["w1", "w3"]


def test_unit_norm_345():
    d = Dictionary(np.array([[3.0], [4.0]]), ["r0", "r1"], ["c"])
    assert np.allclose(normalize_columns(d).values.ravel(), [0.6, 0.8])


def test_constant_column_dropped():
    d = Dictionary(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), ["a", "b", "c"], ["const", "x"])
    n = normalize_columns(d)
    assert n.col_labels == ["x"]
    assert n.dropped == ["const"]
    assert n.col_stats[0].mean == 2.0


def test_all_constant():
    d = Dictionary(np.ones((3, 2)), ["a", "b", "c"], ["x", "y"])
    with pytest.raises(AllColumnsConstant):
        normalize_columns(d)


def test_zscore_is_centred():
    d = Dictionary(np.array([[1.0], [2.0], [6.0]]), ["a", "b", "c"], ["x"])
    z = normalize_columns(d, "zscore").values.ravel()
    assert abs(z.sum()) < 1e-12 and abs(np.linalg.norm(z) - 1) < 1e-12


counts = st.floats(min_value=0, max_value=1e9, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 1), counts, counts), min_size=1, max_size=8))
def test_csv_round_trip(rows):
    table = _table([("k", f"w{i}", 1000 + i, t, u, {"ev_a": a, "ev_b": b}) for i, (t, u, a, b) in enumerate(rows)])
    again = parse_profile_csv(write_profile_csv(table))
    assert again.records == table.records
    assert again.event_universe == table.event_universe


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=2, max_size=6))
def test_normalized_columns_have_unit_norm(rows):
    d = Dictionary(np.array(rows), [f"r{i}" for i in range(len(rows))], ["a", "b", "c"])
    try:
        n = normalize_columns(d)
    except AllColumnsConstant:
        return
    assert np.allclose(np.linalg.norm(n.values, axis=0), 1.0)
    assert len(n.col_labels) + len(n.dropped) == 3


@pytest.mark.parametrize("mode", ["unit_norm", "zscore"])
@pytest.mark.parametrize("tiny", [1.6e-255, 5e-324, 1e300])
def test_extreme_magnitudes_normalize(mode, tiny):
    d = Dictionary(np.array([[0.0, 1.0], [tiny, 2.0]]), ["a", "b"], ["x", "y"])
    n = normalize_columns(d, mode)
    assert np.all(np.isfinite(n.values))
    assert np.allclose(np.linalg.norm(n.values, axis=0), 1.0)
