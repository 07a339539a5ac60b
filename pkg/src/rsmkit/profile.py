"""Counter-profile ingestion and dictionary assembly.

A profile CSV holds one row per kernel invocation sample. A handful of
metadata columns identify the run; every other column is a hardware event
count. Empty event cells mean "not recorded for this row".
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    AllColumnsConstant,
    EmptySelection,
    InconsistentEventSet,
    MissingColumn,
    NonNumericCell,
    UnknownKernel,
    UtilizationOutOfRange,
)


@dataclass(frozen=True)
class ColumnSchema:
    kernel: str = "kernel"
    workload: str = "workload"
    frequency: str = "frequency_mhz"
    time: str = "time_s"
    utilization: str = "sm_util"
    power: str = "power_w"

    @property
    def required(self):
        return (self.kernel, self.workload, self.time, self.utilization)

    @property
    def optional(self):
        return (self.frequency, self.power)

    @property
    def metadata(self):
        return self.required + self.optional


@dataclass(frozen=True)
class RunRecord:
    kernel_name: str
    workload_id: str
    exec_time_s: float
    sm_utilization: float
    event_counts: dict
    frequency_mhz: Optional[int] = None
    power_w: Optional[float] = None
    replicate: int = 0

    @property
    def key(self):
        return (self.kernel_name, self.workload_id, self.frequency_mhz, self.replicate)


@dataclass
class ProfileTable:
    records: list
    event_universe: list

    def kernels(self):
        seen = {}
        for r in self.records:
            seen.setdefault(r.kernel_name, None)
        return list(seen)

    def for_kernel(self, kernel):
        recs = [r for r in self.records if r.kernel_name == kernel]
        if not recs:
            raise UnknownKernel(kernel)
        return recs

    def events_for(self, kernel):
        """Event names recorded for ``kernel``, in universe order."""
        present = set(self.for_kernel(kernel)[0].event_counts)
        return [e for e in self.event_universe if e in present]


def _parse_float(text, row, col):
    if "_" in text:
        raise NonNumericCell(row, col, text)
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row, col, text) from None
    if not math.isfinite(value):
        raise NonNumericCell(row, col, text)
    return value


def _parse_frequency(text, row, col):
    value = _parse_float(text, row, col)
    if value <= 0 or value != int(value):
        raise NonNumericCell(row, col, text, reason="not a positive integer")
    return int(value)


def parse_profile_csv(source, schema: ColumnSchema = ColumnSchema()) -> ProfileTable:
    """Parse a counter-profile CSV.

    ``source`` may be bytes, str, or a binary/text file object. Data rows are
    numbered from 1 in error messages (the header is not counted).
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if source.startswith("\ufeff"):
        source = source[1:]

    reader = csv.reader(io.StringIO(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn(schema.kernel) from None
    for name in schema.required:
        if name not in header:
            raise MissingColumn(name)
    col = {name: i for i, name in enumerate(header)}
    events = [h for h in header if h not in schema.metadata]

    records = []
    replicate_count = defaultdict(int)
    seen_events = set()
    for rownum, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise NonNumericCell(rownum, "*", ",".join(cells),
                                 reason=f"a row with {len(cells)} cells (header has {len(header)})")
        cells = [c.strip() for c in cells]

        def cell(name):
            return cells[col[name]] if name in col else ""

        kernel = cell(schema.kernel)
        workload = cell(schema.workload)
        if not kernel:
            raise NonNumericCell(rownum, schema.kernel, kernel, reason="empty")
        time_s = _parse_float(cell(schema.time), rownum, schema.time)
        if time_s < 0:
            raise NonNumericCell(rownum, schema.time, cell(schema.time), reason="negative")
        util = _parse_float(cell(schema.utilization), rownum, schema.utilization)
        if not 0.0 <= util <= 1.0:
            raise UtilizationOutOfRange(rownum, util)
        freq = cell(schema.frequency)
        freq = _parse_frequency(freq, rownum, schema.frequency) if freq else None
        power = cell(schema.power)
        power = _parse_float(power, rownum, schema.power) if power else None
        if power is not None and power < 0:
            raise NonNumericCell(rownum, schema.power, cell(schema.power), reason="negative")

        counts = {}
        for ev in events:
            text = cells[col[ev]]
            if not text:
                continue
            value = _parse_float(text, rownum, ev)
            if value < 0:
                raise NonNumericCell(rownum, ev, text, reason="a negative count")
            counts[ev] = value
        seen_events.update(counts)

        rep_key = (kernel, workload, freq)
        rep = replicate_count[rep_key]
        replicate_count[rep_key] += 1
        records.append(RunRecord(kernel, workload, time_s, util, counts, freq, power, rep))

    table = ProfileTable(records, [e for e in events if e in seen_events])
    _check_event_sets(table)
    return table


def _check_event_sets(table):
    first = {}
    for r in table.records:
        names = frozenset(r.event_counts)
        ref = first.setdefault(r.kernel_name, names)
        if names != ref:
            raise InconsistentEventSet(r.kernel_name, missing=ref - names, extra=names - ref)


def write_profile_csv(table: ProfileTable, schema: ColumnSchema = ColumnSchema()) -> str:
    """Serialize ``table`` so that :func:`parse_profile_csv` reproduces it."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = [schema.kernel, schema.workload, schema.frequency, schema.time,
              schema.utilization, schema.power] + list(table.event_universe)
    writer.writerow(header)
    for r in table.records:
        row = [r.kernel_name, r.workload_id,
               "" if r.frequency_mhz is None else str(r.frequency_mhz),
               repr(float(r.exec_time_s)), repr(float(r.sm_utilization)),
               "" if r.power_w is None else repr(float(r.power_w))]
        row += [repr(float(r.event_counts[e])) if e in r.event_counts else "" for e in table.event_universe]
        writer.writerow(row)
    return out.getvalue()


# --- dictionaries -------------------------------------------------------------

@dataclass(frozen=True)
class RowKeySpec:
    """How records collapse into dictionary rows.

    ``keys`` picks the metadata that distinguishes rows (a subset of
    ``("workload", "frequency")``); records sharing those values are averaged
    when ``average_replicates`` is set, otherwise each becomes its own row.
    ``workloads`` optionally restricts the selection.
    """

    keys: tuple = ("workload", "frequency")
    average_replicates: bool = True
    workloads: Optional[tuple] = None


@dataclass(frozen=True)
class ColumnStats:
    mean: float
    std: float
    norm: float
    is_constant: bool


@dataclass
class Dictionary:
    values: np.ndarray
    row_labels: list
    col_labels: list
    row_keys: list = field(default_factory=list)
    col_stats: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    normalization: Optional[str] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("dictionary values must be a 2-D matrix")
        n, c = self.values.shape
        if n < 1 or c < 1:
            raise EmptySelection(f"dictionary must be at least 1x1, got {n}x{c}")
        if len(self.row_labels) != n or len(self.col_labels) != c:
            raise ValueError("label counts do not match matrix shape")
        if len(set(self.col_labels)) != c:
            raise ValueError("duplicate column labels")
        if not self.row_keys:
            self.row_keys = [(lbl,) for lbl in self.row_labels]
        if not self.col_stats:
            self.col_stats = [_column_stats(self.values[:, j]) for j in range(c)]

    @property
    def shape(self):
        return self.values.shape

    def column(self, label):
        return self.values[:, self.col_labels.index(label)]

    def select_columns(self, labels):
        idx = [self.col_labels.index(lbl) for lbl in labels]
        return Dictionary(self.values[:, idx], list(self.row_labels), list(labels),
                          list(self.row_keys), [self.col_stats[i] for i in idx],
                          list(self.dropped), self.normalization)

    def select_rows(self, indices):
        indices = list(indices)
        return Dictionary(self.values[indices], [self.row_labels[i] for i in indices],
                          list(self.col_labels), [self.row_keys[i] for i in indices])


def _column_stats(col):
    mean = math.fsum(col) / len(col)
    dev = col - mean
    scale = float(np.max(np.abs(dev))) or 1.0
    std = scale * float(np.sqrt(np.mean((dev / scale) ** 2)))
    return ColumnStats(mean, std, float(np.linalg.norm(col)), bool(np.all(col == col[0])))


def row_label(key, spec: RowKeySpec):
    parts = dict(zip(spec.keys, key))
    label = str(parts.get("workload", "*"))
    if "frequency" in parts and parts["frequency"] is not None:
        label += f"@{parts['frequency']}MHz"
    if not spec.average_replicates:
        label += f"#{key[-1]}"
    return label


def _row_key(record, spec):
    key = []
    for k in spec.keys:
        if k == "workload":
            key.append(record.workload_id)
        elif k == "frequency":
            key.append(record.frequency_mhz)
        else:
            raise ValueError(f"unknown row key component {k!r}")
    if not spec.average_replicates:
        key.append(record.replicate)
    return tuple(key)


def _sort_token(key):
    # None sorts before any frequency
    return tuple((0, "") if v is None else (1, v) for v in key)


def group_rows(records: Iterable[RunRecord], spec: RowKeySpec = RowKeySpec()):
    """Group records into dictionary rows; returns ``[(key, [records])]`` in canonical order."""
    groups = defaultdict(list)
    for r in records:
        if spec.workloads is not None and r.workload_id not in spec.workloads:
            continue
        groups[_row_key(r, spec)].append(r)
    return [(k, groups[k]) for k in sorted(groups, key=_sort_token)]


def mean_of(values):
    values = list(values)
    return math.fsum(values) / len(values)


def build_dictionary(table: ProfileTable, kernel: str, row_key: RowKeySpec = RowKeySpec()) -> Dictionary:
    """Raw-count dictionary (rows = configurations, columns = events) for one kernel."""
    records = table.for_kernel(kernel)
    events = table.events_for(kernel)
    rows = group_rows(records, row_key)
    if not rows:
        raise EmptySelection(f"no rows of kernel {kernel!r} match the row selection")
    if not events:
        raise EmptySelection(f"kernel {kernel!r} has no recorded events")
    values = np.array([[mean_of(r.event_counts[e] for r in recs) for e in events] for _, recs in rows])
    return Dictionary(values, [row_label(k, row_key) for k, _ in rows], events,
                      [k for k, _ in rows])


def normalize_columns(d: Dictionary, mode: str = "unit_norm") -> Dictionary:
    """Drop constant columns, then scale the rest to unit Euclidean norm.

    In ``zscore`` mode columns are centred first. The original statistics of
    every retained column are kept in ``col_stats``.
    """
    if mode not in ("unit_norm", "zscore"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    stats = [_column_stats(d.values[:, j]) for j in range(d.shape[1])]
    keep = [j for j, s in enumerate(stats) if not s.is_constant]
    dropped = [d.col_labels[j] for j, s in enumerate(stats) if s.is_constant]
    if not keep:
        raise AllColumnsConstant(f"all {d.shape[1]} columns are constant")

    cols = d.values[:, keep].copy()
    if mode == "zscore":
        # dividing by the std is absorbed by the unit-norm scaling below
        cols -= np.array([stats[j].mean for j in keep])
    # pre-scale by the largest magnitude so the norm neither under- nor overflows
    cols /= np.max(np.abs(cols), axis=0)
    cols /= np.linalg.norm(cols, axis=0)
    return Dictionary(cols, list(d.row_labels), [d.col_labels[j] for j in keep], list(d.row_keys),
                      [stats[j] for j in keep], list(d.dropped) + dropped, mode)


def drop_columns(d: Dictionary, labels: Sequence[str]) -> Dictionary:
    labels = set(labels)
    keep = [c for c in d.col_labels if c not in labels]
    if not keep:
        raise EmptySelection("no columns left after exclusion")
    return d.select_columns(keep)
