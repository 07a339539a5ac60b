"""Differential analysis between two kernels or code variants.

The difference dictionary ``delta = D1 - D2`` (and its negation) is explained
against the target difference ``dt = t1 - t2`` with the regular attribution
pipeline. Alongside the significance of each resource, the mean relative
change in its usage between the two sides is reported; the bar drawn for a
resource has the sign of that change and the height of its significance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDelta, DuplicateJoinKey, EmptyIntersection
from .machine import MachineModel, partition_columns
from .pipeline import Attribution, HyperParams, attribute
from .profile import Dictionary, ProfileTable, RowKeySpec, build_dictionary, mean_of
from .sparse import normalize_rsm
from .targets import AlphaBuckets, TargetVector, compute_target, global_max_time

EPS = 1e-12


@dataclass
class PairedDictionaries:
    d1: Dictionary
    d2: Dictionary
    t1: TargetVector
    t2: TargetVector
    labels: tuple
    dropped_rows: dict = field(default_factory=dict)
    dropped_columns: dict = field(default_factory=dict)

    @property
    def delta(self):
        return Dictionary(self.d1.values - self.d2.values, list(self.d1.row_labels),
                          list(self.d1.col_labels), list(self.d1.row_keys))

    @property
    def delta_prime(self):
        return Dictionary(self.d2.values - self.d1.values, list(self.d1.row_labels),
                          list(self.d1.col_labels), list(self.d1.row_keys))

    @property
    def dt(self):
        return self.t1.values - self.t2.values

    def swapped(self):
        return PairedDictionaries(self.d2, self.d1, self.t2, self.t1, self.labels[::-1],
                                  {"first": self.dropped_rows.get("second", []),
                                   "second": self.dropped_rows.get("first", [])},
                                  {"first_only": self.dropped_columns.get("second_only", []),
                                   "second_only": self.dropped_columns.get("first_only", [])})


def align_pairs(t1: ProfileTable, k1: str, t2: ProfileTable, k2: str,
                join_key: tuple = ("workload", "frequency"), target: str = "ts",
                buckets: AlphaBuckets = AlphaBuckets(), average_replicates: bool = True,
                labels: Optional[tuple] = None) -> PairedDictionaries:
    """Match rows of two kernels on ``join_key`` and intersect their events.

    Unmatched rows and one-sided events are dropped and listed in
    ``dropped_rows`` / ``dropped_columns``. Time-based targets of both sides
    share one divisor, the largest averaged time over both tables, and the
    score is left un-rescaled, so the target difference keeps its meaning.
    """
    spec = RowKeySpec(tuple(join_key), average_replicates)
    divisor = max(global_max_time(t1, spec), global_max_time(t2, spec))
    sides = []
    for name, table, kernel in (("first", t1, k1), ("second", t2, k2)):
        d = build_dictionary(table, kernel, spec)
        t = compute_target(table, kernel, target, spec, buckets, renormalize=False, divisor=divisor)
        index = {}
        for i, key in enumerate(d.row_keys):
            jk = key[:len(join_key)]
            if jk in index:
                raise DuplicateJoinKey(name, jk)
            index[jk] = i
        sides.append((d, t, index))
    (d1, tv1, i1), (d2, tv2, i2) = sides

    common_keys = [k for k in i1 if k in i2]
    cols = [c for c in d1.col_labels if c in set(d2.col_labels)]
    if not common_keys:
        raise EmptyIntersection(f"{k1} and {k2} share no {'/'.join(join_key)} configuration")
    if not cols:
        raise EmptyIntersection(f"{k1} and {k2} share no events")
    r1 = [i1[k] for k in common_keys]
    r2 = [i2[k] for k in common_keys]
    a = d1.select_rows(r1).select_columns(cols)
    b = d2.select_rows(r2).select_columns(cols)
    b.row_labels = list(a.row_labels)
    return PairedDictionaries(
        a, b, tv1.subset(r1), tv2.subset(r2),
        labels or (k1, k2),
        {"first": [d1.row_labels[i] for k, i in i1.items() if k not in i2],
         "second": [d2.row_labels[i] for k, i in i2.items() if k not in i1]},
        {"first_only": [c for c in d1.col_labels if c not in cols],
         "second_only": [c for c in d2.col_labels if c not in cols]},
    )


@dataclass
class UsageChange:
    first_mean: float
    second_mean: float
    rel_change: Optional[float]  # (m2 - m1) / min(m1, m2); None when undefined
    pct_change: Optional[float]  # (m2 - m1) / m1, the baseline-relative change
    undefined: bool

    @property
    def direction(self):
        return float(np.sign(self.second_mean - self.first_mean))


def relative_usage_change(p: PairedDictionaries, model: MachineModel) -> dict:
    """Mean usage change per resource group, second side relative to the first.

    ``rel_change`` divides by the smaller of the two means, which makes it
    antisymmetric under swapping the sides and equal to the baseline-relative
    change for increases (10 -> 15 gives +0.5). ``pct_change`` divides by the
    first side's mean. Groups with a (near) zero mean are flagged undefined.
    """
    out = {}
    for g, events in partition_columns(p.d1, model).members().items():
        idx = [p.d1.col_labels.index(e) for e in events]
        m1 = mean_of(p.d1.values[:, idx].ravel())
        m2 = mean_of(p.d2.values[:, idx].ravel())
        lo = min(m1, m2)
        rel = (m2 - m1) / max(lo, EPS) if lo > EPS else None
        pct = (m2 - m1) / max(m1, EPS) if m1 > EPS else None
        if m1 == m2:
            rel = pct = 0.0
        out[g] = UsageChange(m1, m2, rel, pct, rel is None)
    return out


@dataclass
class ResourceComparison:
    neg_rsm: float
    pos_rsm: float
    rel_change: Optional[float]
    pct_change: Optional[float]
    bar_value: float
    undefined: bool = False


@dataclass
class ComparativeResult:
    pair_label: tuple
    per_resource: dict
    rows: list
    dropped_rows: dict
    dropped_columns: dict
    dt_scale: float
    negative: Attribution = None
    positive: Attribution = None


def _scaled_dt(dt):
    scale = float(np.max(np.abs(dt)))
    if scale == 0.0:
        raise DegenerateDelta("target difference is zero on every aligned row")
    return dt / scale, scale


def comparative_rsm(p: PairedDictionaries, model: MachineModel,
                    params: HyperParams = HyperParams()) -> ComparativeResult:
    """Directional significance of each resource for the change in target.

    ``neg_rsm`` explains ``dt`` with ``D1 - D2``, ``pos_rsm`` with ``D2 - D1``;
    both are normalized to sum to one. ``dt`` is scaled by its largest
    magnitude first, which keeps prediction errors bounded without moving
    its zero.
    """
    delta = p.delta
    if not np.any(delta.values):
        raise DegenerateDelta("the two dictionaries are identical on the aligned rows")
    dt, scale = _scaled_dt(p.dt)
    neg = attribute(delta, dt, model, params)
    pos = attribute(p.delta_prime, dt, model, params)
    neg_n = normalize_rsm(neg.report).per_resource
    pos_n = normalize_rsm(pos.report).per_resource
    usage = relative_usage_change(p, model)

    per_resource = {}
    for g in neg_n:
        ch = usage[g]
        height = max(neg_n[g], pos_n.get(g, 0.0))
        per_resource[g] = ResourceComparison(neg_n[g], pos_n.get(g, 0.0), ch.rel_change, ch.pct_change,
                                             ch.direction * height + 0.0, ch.undefined)
    return ComparativeResult(tuple(p.labels), per_resource, list(p.d1.row_labels), p.dropped_rows,
                             p.dropped_columns, scale, neg, pos)
