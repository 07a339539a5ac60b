"""Target vectors explained by the sparse model.

Three targets are supported, each aligned row-for-row with the dictionary
built from the same table, kernel and :class:`RowKeySpec`:

``ts``
    average execution time divided by a maximum (global over every kernel
    and configuration by default), so values lie in (0, 1].
``util_loss``
    ``1 - ul`` where ``ul`` is the average SM utilization.
``score``
    ``1 - alpha(ul) / ts`` with ``alpha`` a three-level step function of
    utilization, min-max rescaled to [0, 1] by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AnalysisError, Misaligned, OutOfRange, ZeroMaxTime
from .profile import ProfileTable, RowKeySpec, group_rows, mean_of, row_label

TARGET_KINDS = ("ts", "util_loss", "score")

LOW_UTIL = 0.5
HIGH_UTIL = 0.8


@dataclass(frozen=True)
class AlphaBuckets:
    a1: float = 0.1
    a2: float = 0.5
    a3: float = 0.8
    boundaries: tuple = (LOW_UTIL, HIGH_UTIL)

    def __post_init__(self):
        lo, hi = self.boundaries
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"bucket boundaries must satisfy 0 < low < high < 1, got {self.boundaries}")
        if not 0.0 < self.a1 < lo:
            raise ValueError(f"a1={self.a1} must lie in the low-utilization range (0, {lo})")
        if not lo <= self.a2 < hi:
            raise ValueError(f"a2={self.a2} must lie in the moderate range [{lo}, {hi})")
        if not hi <= self.a3 <= 1.0:
            raise ValueError(f"a3={self.a3} must lie in the high range [{hi}, 1]")


@dataclass
class TargetVector:
    kind: str
    values: np.ndarray
    row_labels: list
    normalization: dict = field(default_factory=dict)
    raw: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) != len(self.row_labels):
            raise Misaligned("target values and row labels differ in length")

    def __len__(self):
        return len(self.values)

    def subset(self, indices):
        indices = list(indices)
        raw = None if self.raw is None else self.raw[indices]
        return TargetVector(self.kind, self.values[indices], [self.row_labels[i] for i in indices],
                            dict(self.normalization), raw)


def alpha_of(ul: float, buckets: AlphaBuckets = AlphaBuckets()) -> float:
    if not 0.0 <= ul <= 1.0:  # also rejects NaN
        raise OutOfRange(f"utilization {ul!r} outside [0, 1]")
    lo, hi = buckets.boundaries
    if ul < lo:
        return buckets.a1
    if ul < hi:
        return buckets.a2
    return buckets.a3


def _rows(table, kernel, row_key):
    return group_rows(table.for_kernel(kernel), row_key)


def _mean_times(table, kernel, row_key):
    rows = _rows(table, kernel, row_key)
    if not rows:
        raise AnalysisError(f"no rows of kernel {kernel!r} match the row selection")
    labels = [row_label(k, row_key) for k, _ in rows]
    return labels, np.array([mean_of(r.exec_time_s for r in recs) for _, recs in rows])


def global_max_time(table: ProfileTable, row_key: RowKeySpec = RowKeySpec()) -> float:
    """Largest averaged execution time over every kernel and configuration."""
    return float(max(_mean_times(table, k, row_key)[1].max() for k in table.kernels()
                     if _rows(table, k, row_key)))


def compute_ts(table: ProfileTable, kernel: str, scope: str = "global",
               row_key: RowKeySpec = RowKeySpec(), divisor: Optional[float] = None) -> TargetVector:
    """Normalized time; an explicit ``divisor`` overrides ``scope`` (used to share a scale)."""
    labels, times = _mean_times(table, kernel, row_key)
    if divisor is not None:
        scope = "shared"
    elif scope == "global":
        divisor = global_max_time(table, row_key)
    elif scope == "per_kernel":
        divisor = times.max()
    else:
        raise ValueError(f"unknown ts scope {scope!r}")
    if not divisor > 0:
        raise ZeroMaxTime(f"maximum execution time in {scope} scope is zero")
    return TargetVector("ts", times / divisor, labels,
                        {"method": "max", "scope": scope, "divisor": float(divisor)}, times)


def utilization(table: ProfileTable, kernel: str, row_key: RowKeySpec = RowKeySpec()) -> np.ndarray:
    return np.array([mean_of(r.sm_utilization for r in recs) for _, recs in _rows(table, kernel, row_key)])


def compute_util_loss(table: ProfileTable, kernel: str, row_key: RowKeySpec = RowKeySpec()) -> TargetVector:
    rows = _rows(table, kernel, row_key)
    ul = utilization(table, kernel, row_key)
    return TargetVector("util_loss", 1.0 - ul, [row_label(k, row_key) for k, _ in rows],
                        {"method": "complement"}, ul)


def raw_score(ts: float, ul: float, buckets: AlphaBuckets = AlphaBuckets()) -> float:
    if not ts > 0:
        raise OutOfRange(f"normalized time must be positive to form a score, got {ts!r}")
    return 1.0 - alpha_of(ul, buckets) / ts


def compute_score(ts: TargetVector, ul, buckets: AlphaBuckets = AlphaBuckets(),
                  renormalize: bool = True) -> TargetVector:
    if ts.kind != "ts":
        raise Misaligned(f"score needs a ts target, got {ts.kind!r}")
    ul = np.asarray(ul, dtype=float)
    if ul.shape != ts.values.shape:
        raise Misaligned(f"{len(ul)} utilization values for {len(ts)} rows")
    raw = np.array([raw_score(t, u, buckets) for t, u in zip(ts.values, ul)])
    norm = {"method": "none", "alphas": [buckets.a1, buckets.a2, buckets.a3]}
    values = raw
    if renormalize:
        lo, hi = float(raw.min()), float(raw.max())
        norm.update(method="minmax", min=lo, max=hi)
        if hi > lo:
            values = (raw - lo) / (hi - lo)
        else:
            values = np.zeros_like(raw)
            norm["degenerate"] = True
    return TargetVector("score", values, list(ts.row_labels), norm, raw)


def compute_target(table: ProfileTable, kernel: str, kind: str, row_key: RowKeySpec = RowKeySpec(),
                   buckets: AlphaBuckets = AlphaBuckets(), scope: str = "global",
                   renormalize: bool = True, divisor: Optional[float] = None) -> TargetVector:
    if kind == "ts":
        return compute_ts(table, kernel, scope, row_key, divisor)
    if kind == "util_loss":
        return compute_util_loss(table, kernel, row_key)
    if kind == "score":
        ts = compute_ts(table, kernel, scope, row_key, divisor)
        return compute_score(ts, utilization(table, kernel, row_key), buckets, renormalize)
    raise ValueError(f"unknown target {kind!r}; expected one of {TARGET_KINDS}")
