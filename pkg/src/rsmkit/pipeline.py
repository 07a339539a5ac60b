"""normalize -> ensemble -> beliefs -> RSM, for one dictionary/target pair."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import EmptyGroupPartition, InvalidKappa, Misaligned
from .machine import MachineModel, Partition, partition_columns
from .profile import Dictionary, ProfileTable, RowKeySpec, build_dictionary, drop_columns, normalize_columns
from .sparse import (
    DEFAULT_DRAWS,
    DEFAULT_FIDELITY,
    DEFAULT_GAMMA,
    DEFAULT_KAPPA,
    DEFAULT_TAU,
    RsmReport,
    beliefs,
    ensemble_omp,
    normalize_rsm,
    resource_rsm,
)
from .targets import AlphaBuckets, TargetVector, compute_target


@dataclass(frozen=True)
class HyperParams:
    kappa: float = DEFAULT_KAPPA
    tau: int = DEFAULT_TAU
    draws: int = DEFAULT_DRAWS
    gamma: float = DEFAULT_GAMMA
    seed: int = 0
    fidelity_epsilon: float = DEFAULT_FIDELITY
    normalization: str = "unit_norm"
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise InvalidKappa(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if self.tau < 1 or self.draws < 1 or self.threads < 1:
            raise ValueError("tau, draws and threads must be positive")
        if not self.gamma > 0 or not self.fidelity_epsilon >= 0:
            raise ValueError("gamma must be positive and fidelity_epsilon non-negative")
        if self.normalization not in ("unit_norm", "zscore"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def replace(self, **changes):
        values = asdict(self)
        values.update({k: v for k, v in changes.items() if v is not None})
        return HyperParams(**values)

    def to_dict(self):
        # threads does not affect results, so it stays out of reports
        out = asdict(self)
        out.pop("threads")
        return out


def workload_groups(d: Dictionary, row_key: RowKeySpec, by: str = "workload") -> dict:
    """Row partition of ``d`` by one row-key component, e.g. ``workload``."""
    if by not in row_key.keys:
        raise ValueError(f"row key {row_key.keys} has no {by!r} component")
    pos = row_key.keys.index(by)
    groups = defaultdict(list)
    for i, key in enumerate(d.row_keys):
        groups[key[pos]].append(i)
    return {("" if k is None else str(k)): v for k, v in groups.items()}


@dataclass
class Attribution:
    report: RsmReport
    partition: Partition
    ensembles: dict = field(default_factory=dict)
    beliefs: dict = field(default_factory=dict)
    dictionaries: dict = field(default_factory=dict)


def attribute(d: Dictionary, t, model: MachineModel, params: HyperParams = HyperParams(),
              groups: Optional[Mapping[str, list]] = None) -> Attribution:
    """Resource significance of ``d``'s events for explaining ``t``.

    Excluded events are removed first. With ``groups`` (a row partition), the
    whole ensemble/belief computation runs per subset and the group values
    are averaged across subsets.
    """
    tv = np.asarray(getattr(t, "values", t), dtype=float)
    if tv.shape != (d.shape[0],):
        raise Misaligned(f"target has {tv.shape[0]} rows, dictionary has {d.shape[0]}")
    partition = partition_columns(d, model)
    members = partition.members()
    if not members:
        raise EmptyGroupPartition("every event is excluded by the machine model")
    analyzed = drop_columns(d, partition.excluded_labels)

    subsets = {None: list(range(d.shape[0]))} if groups is None else dict(groups)
    out = Attribution(None, partition)
    for w, rows in subsets.items():
        dn = normalize_columns(analyzed.select_rows(rows), params.normalization)
        tw = tv[rows]
        ens = ensemble_omp(dn, tw, params.kappa, params.tau, params.draws, params.seed,
                           params.fidelity_epsilon, params.threads)
        out.dictionaries[w] = dn
        out.ensembles[w] = ens
        out.beliefs[w] = beliefs(dn, tw, ens, params.gamma)
    out.report = resource_rsm(out.beliefs if groups is not None else out.beliefs[None], members)
    return out


@dataclass
class KernelAnalysis:
    kernel: str
    dictionary: Dictionary
    target: TargetVector
    attribution: Attribution
    report: RsmReport  # normalized


def analyze_kernel(table: ProfileTable, kernel: str, target: str, model: MachineModel,
                   params: HyperParams = HyperParams(), row_key: RowKeySpec = RowKeySpec(),
                   workload_key: Optional[str] = None, buckets: AlphaBuckets = AlphaBuckets(),
                   ts_scope: str = "global") -> KernelAnalysis:
    d = build_dictionary(table, kernel, row_key)
    t = compute_target(table, kernel, target, row_key, buckets, ts_scope)
    groups = workload_groups(d, row_key, workload_key) if workload_key else None
    att = attribute(d, t, model, params, groups)
    return KernelAnalysis(kernel, d, t, att, normalize_rsm(att.report))
