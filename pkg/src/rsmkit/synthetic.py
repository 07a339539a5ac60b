"""Synthetic GPU profiles with a known ground truth.

Event counts are independent log-normal draws per run; execution time is a
linear function of a chosen set of events (the *planted* events) plus
Gaussian noise. Variants of a profile can rescale one resource group's
events and recompute time from the same linear model, which gives
comparisons with a known direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .profile import ProfileTable, RunRecord

# Concrete event names per resource group, spelled as in the counter tables.
FIXTURE_EVENTS = {
    "FP64": ["inst_executed_fp64_pipe_s0", "inst_executed_fp64_pipe_s1"],
    "FMA": ["inst_executed_fma_pipe_s0", "not_predicated_off_thread_inst_executed"],
    "SMEM": ["shared_ld_transactions", "shared_st_transactions"],
    "TEX": ["l2_p0_read_tex_sector_queries", "l2_p1_write_tex_sector_queries"],
    "BANK": ["shared_ld_bank_conflict", "shared_st_bank_conflict"],
    "L2": ["l2_p0_total_read_sector_queries", "l2_p1_total_write_sector_queries"],
    "DRAM": ["fb_p0_read_sectors", "fb_p1_write_queries"],
    "SYSMEM": ["fb_p0_read_misses", "global_load"],
    "PCIE": ["pcie_rx_active_pulse", "pcie_tx_active_pulse"],
}

EXTRA_EVENTS = ["tex_cache_hit_rate", "elapsed_cycles_sm"]  # excluded / uncategorized


@dataclass
class TimeModel:
    """``time = scale * (intercept + sum_e weight_e * count_e / ref_e) + noise``."""

    weights: dict
    reference: dict
    intercept: float = 0.1
    scale: float = 1e-3
    noise: float = 0.0

    def signal(self, counts):
        return self.intercept + sum(w * counts[e] / self.reference[e] for e, w in self.weights.items())

    def time(self, counts, rng):
        eps = rng.normal(0.0, self.noise) if self.noise > 0 else 0.0
        return float(self.scale * max(self.signal(counts) + eps, 1e-6))


@dataclass
class SyntheticProfile:
    table: ProfileTable
    model: TimeModel
    planted: list = field(default_factory=list)


def _events(groups, extra):
    names = [e for g in groups for e in FIXTURE_EVENTS[g]]
    return names + list(extra)


def synthetic_profile(seed: int, planted_group: str = "DRAM", kernel: str = "kernel",
                      workloads: int = 5, frequencies=(975, 1110, 1245, 1380, 1530, 1597, 1702, 1815),
                      groups=tuple(FIXTURE_EVENTS), extra=(), noise: float = 0.01,
                      weights=None, sigma: float = 0.35) -> SyntheticProfile:
    """One kernel whose time is driven by ``planted_group`` (or explicit ``weights``).

    Counts are log-normal around per-event base levels; ``noise`` is the
    standard deviation of the additive noise in units of the signal, whose
    maximum is close to one.
    """
    rng = np.random.default_rng(seed)
    names = _events(groups, extra)
    base = {e: float(10 ** rng.uniform(4, 7)) for e in names}
    if weights is None:
        planted = FIXTURE_EVENTS[planted_group]
        w = rng.uniform(0.5, 1.0, len(planted))
        weights = dict(zip(planted, w / w.sum() * 0.8))
    model = TimeModel(dict(weights), {e: base[e] * np.exp(sigma) for e in weights}, noise=noise)

    records = []
    for wi in range(workloads):
        for f in frequencies:
            counts = {e: float(np.round(base[e] * rng.lognormal(0.0, sigma))) for e in names}
            ul = float(np.clip(0.25 + 0.6 * rng.random(), 0.0, 1.0))
            records.append(RunRecord(kernel, f"w{wi}", model.time(counts, rng), ul, counts, int(f)))
    return SyntheticProfile(ProfileTable(records, names), model, list(weights))


def scaled_variant(profile: SyntheticProfile, group: str, factor: float, seed: int = 0,
                   jitter: float = 0.0, kernel=None) -> ProfileTable:
    """Copy of ``profile.table`` with ``group``'s events multiplied by ``factor``.

    Time is recomputed from the profile's time model without new noise, so
    the change in time is caused by the rescaled events alone. ``jitter``
    multiplies every other event by ``1 + N(0, jitter)``.
    """
    rng = np.random.default_rng(seed)
    members = set(FIXTURE_EVENTS[group])
    model = replace(profile.model, noise=0.0)
    out = []
    for r in profile.table.records:
        counts = {}
        for e, v in r.event_counts.items():
            if e in members:
                counts[e] = float(np.round(v * factor))
            elif jitter > 0:
                counts[e] = float(np.round(v * max(1.0 + rng.normal(0.0, jitter), 0.0)))
            else:
                counts[e] = v
        # keep the original noise realisation: time moves only through the model
        base_signal = profile.model.signal(r.event_counts)
        residual = r.exec_time_s / model.scale - base_signal
        t = float(model.scale * max(model.signal(counts) + residual, 1e-6))
        out.append(replace(r, kernel_name=kernel or r.kernel_name, exec_time_s=t, event_counts=counts))
    return ProfileTable(out, list(profile.table.event_universe))


def merge_tables(*tables: ProfileTable) -> ProfileTable:
    records = [r for t in tables for r in t.records]
    universe = []
    for t in tables:
        universe += [e for e in t.event_universe if e not in universe]
    return ProfileTable(records, universe)
