"""Sparse attribution: OMP, ensemble OMP, event beliefs and resource significance.

The dictionary passed to the solvers is expected to have unit-norm columns
(see :func:`rsmkit.profile.normalize_columns`), so the inner product with the
residual is the correlation used for selection.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import AllZeroRsm, DimensionMismatch, EmptyGroupPartition, InvalidKappa

DEFAULT_KAPPA = 0.5
DEFAULT_TAU = 5
DEFAULT_DRAWS = 50_000
DEFAULT_GAMMA = 1.0
DEFAULT_FIDELITY = 1e-6

# Orthogonal component below this fraction of a column's norm means the
# column is (numerically) inside the span of the current support.
RANK_TOL = 1e-10
CHUNK = 1024


def _as_matrix(d):
    return np.asarray(getattr(d, "values", d), dtype=float)


def _as_vector(t):
    return np.asarray(getattr(t, "values", t), dtype=float)


def _check_dims(D, t):
    if D.ndim != 2 or t.ndim != 1 or D.shape[0] != t.shape[0]:
        raise DimensionMismatch(f"dictionary {D.shape} and target {t.shape} are not row-aligned")


def lstsq_qr(A, b):
    """Least-squares solve through a reduced QR factorization.

    Returns ``(x, rank_ok)``; ``rank_ok`` is False when ``A`` is numerically
    rank deficient, in which case ``x`` is meaningless.
    """
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(A, axis=0)
    if np.any(diag <= RANK_TOL * np.maximum(scale, 1e-300)):
        return None, False
    return solve_triangular(r, q.T @ b), True


def refit(D, t, support):
    """Least-squares coefficients on ``support``, solved in sorted column order.

    Solving on the sorted support makes the result a function of the support
    *set*, which is what lets identical ensemble draws share one refit.
    """
    order = sorted(support)
    x, ok = lstsq_qr(D[:, order], t)
    if not ok:
        return None
    by_col = dict(zip(order, x))
    return np.array([by_col[j] for j in support])


@dataclass
class SparseSolution:
    support: list
    coefficients: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: list = field(default_factory=list)

    def full(self, n_columns):
        a = np.zeros(n_columns)
        a[self.support] = self.coefficients
        return a


def omp(d, t, k_max: int, fidelity_epsilon: float = DEFAULT_FIDELITY) -> SparseSolution:
    """Orthogonal matching pursuit.

    Each step adds the unselected column with the largest ``|<d_i, r>|``
    (lowest index on ties) and refits every coefficient by least squares.
    Stops at ``k_max`` columns, when the residual norm drops to
    ``fidelity_epsilon * ||t||``, when nothing correlates with the residual,
    or when the newest column makes the support rank deficient (that column
    is dropped).
    """
    D, t = _as_matrix(d), _as_vector(t)
    _check_dims(D, t)
    C = D.shape[1]
    if not 1 <= k_max <= C:
        raise ValueError(f"k_max must be in [1, {C}], got {k_max}")

    stop = fidelity_epsilon * np.linalg.norm(t)
    support, coef = [], np.zeros(0)
    residual = t.copy()
    history = [float(np.linalg.norm(residual))]
    iterations = 0
    while len(support) < k_max and history[-1] > stop:
        corr = np.abs(D.T @ residual)
        corr[support] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 0.0:
            break
        iterations += 1
        x = refit(D, t, support + [j])
        if x is None:
            break
        support.append(j)
        coef = x
        residual = t - D[:, support] @ coef
        history.append(float(np.linalg.norm(residual)))
    return SparseSolution(support, coef, history[-1], iterations, history)


@dataclass
class EnsembleResult:
    avg_coefficients: np.ndarray
    selection_frequency: np.ndarray
    draws: int
    seed: int
    sparsity_kappa: float
    tau: int
    k_max: int
    unique_supports: int = 0

    def params(self):
        return {"kappa": self.sparsity_kappa, "tau": self.tau, "draws": self.draws,
                "seed": self.seed, "k_max": self.k_max}


def k_max_for(kappa: float, n_columns: int) -> int:
    if not (0.0 < kappa <= 1.0):
        raise InvalidKappa(f"kappa must lie in (0, 1], got {kappa!r}")
    return max(1, math.floor(kappa * n_columns))


def draw_uniforms(seed: int, draws: int, k_max: int) -> np.ndarray:
    """Uniform variates, one row per draw.

    Row ``i`` depends only on ``(seed, i, k_max)``: the generator fills rows in
    order, so adding draws never changes earlier ones.
    """
    return np.random.Generator(np.random.PCG64(seed)).random((draws, k_max))


def _draw_chunk(D, t, k_max, tau, u, stop):
    """Run ``len(u)`` randomized pursuits in lock-step; returns the support mask."""
    B = u.shape[0]
    N, C = D.shape
    residual = np.tile(t, (B, 1))
    basis = np.zeros((B, k_max, N))
    chosen = np.zeros((B, C), dtype=bool)
    active = np.ones(B, dtype=bool)
    if np.linalg.norm(t) <= stop:
        return chosen
    width = min(tau, C)
    for step in range(k_max):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        r = residual[idx]
        corr = np.abs(r @ D)
        corr[chosen[idx]] = -1.0
        # stable sort on -|corr| keeps the lowest column index first on ties
        cand = np.argsort(-corr, axis=1, kind="stable")[:, :width]
        w = np.take_along_axis(corr, cand, axis=1)
        w = np.where(w > 0.0, w, 0.0)
        total = w.sum(axis=1)
        cdf = np.cumsum(w, axis=1)
        pos = (cdf <= (u[idx, step] * total)[:, None]).sum(axis=1)
        pos = np.minimum(pos, width - 1)
        j = cand[np.arange(idx.size), pos]

        v = D[:, j].T.copy()
        Q = basis[idx, :step]
        for _ in range(2):  # Gram-Schmidt twice for orthogonality
            v -= np.einsum("bk,bkn->bn", np.einsum("bkn,bn->bk", Q, v), Q)
        nrm = np.linalg.norm(v, axis=1)
        good = (total > 0.0) & (nrm > RANK_TOL * np.linalg.norm(D[:, j], axis=0))
        q = v[good] / nrm[good, None]
        r_new = r[good] - np.einsum("bn,bn->b", q, r[good])[:, None] * q

        gi = idx[good]
        basis[gi, step] = q
        residual[gi] = r_new
        chosen[gi, j[good]] = True
        active[idx[~good]] = False
        active[gi[np.linalg.norm(r_new, axis=1) <= stop]] = False
    return chosen


def ensemble_omp(d, t, kappa: float = DEFAULT_KAPPA, tau: int = DEFAULT_TAU, draws: int = DEFAULT_DRAWS,
                 seed: int = 0, fidelity_epsilon: float = DEFAULT_FIDELITY, threads: int = 1) -> EnsembleResult:
    """Randomized OMP repeated ``draws`` times and averaged.

    At each step the candidate set is the ``tau`` columns most correlated with
    the residual; one is sampled with probability proportional to
    ``|<d_i, r>|``. Each draw is refit by least squares on its final support
    and the full-length coefficient vectors are averaged (unselected entries
    count as zero).

    The result is bitwise reproducible for a fixed seed whatever ``threads``
    is: draws are processed in fixed-size chunks, each draw consumes its own
    row of uniforms, and the average is taken per distinct support with an
    exactly rounded sum.
    """
    D, t = _as_matrix(d), _as_vector(t)
    _check_dims(D, t)
    C = D.shape[1]
    k_max = k_max_for(kappa, C)
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if draws < 1:
        raise ValueError(f"draws must be >= 1, got {draws}")

    u = draw_uniforms(seed, draws, k_max)
    stop = fidelity_epsilon * np.linalg.norm(t)
    masks = np.zeros((draws, C), dtype=bool)

    def run(start):
        stop_at = min(start + CHUNK, draws)
        masks[start:stop_at] = _draw_chunk(D, t, k_max, tau, u[start:stop_at], stop)

    starts = range(0, draws, CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)

    counts = masks.sum(axis=0)
    supports, multiplicity = np.unique(np.packbits(masks, axis=1), axis=0, return_counts=True)
    terms = []
    for packed, m in zip(supports, multiplicity):
        cols = np.flatnonzero(np.unpackbits(packed)[:C])
        a = np.zeros(C)
        if cols.size:
            x = refit(D, t, list(cols))
            if x is not None:
                a[cols] = x
        terms.append((m / draws) * a)
    terms = np.array(terms)
    avg = np.array([math.fsum(terms[:, j]) for j in range(C)])
    return EnsembleResult(avg, counts / draws, draws, seed, kappa, tau, k_max, len(supports))


# --- beliefs and resource significance -----------------------------------------

@dataclass
class BeliefVector:
    labels: list
    errors: np.ndarray
    beliefs: np.ndarray
    gamma: float

    def as_dict(self):
        return dict(zip(self.labels, (float(b) for b in self.beliefs)))


def beliefs(d, t, ens: EnsembleResult, gamma: float = DEFAULT_GAMMA) -> BeliefVector:
    """Per-event prediction error ``||t - d_i a_i||^2`` and belief ``exp(-gamma e_i)``.

    ``a_i`` is the ensemble-averaged coefficient. Columns that were dropped as
    constant (``d.dropped``) are reported with infinite error and belief 0.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    D, tv = _as_matrix(d), _as_vector(t)
    _check_dims(D, tv)
    a = np.asarray(ens.avg_coefficients, dtype=float)
    if a.shape != (D.shape[1],):
        raise DimensionMismatch("ensemble coefficients do not match dictionary columns")
    errors = np.sum((tv[:, None] - D * a) ** 2, axis=0)
    labels = list(getattr(d, "col_labels", range(D.shape[1])))
    dropped = list(getattr(d, "dropped", []))
    errors = np.concatenate([errors, np.full(len(dropped), np.inf)])
    return BeliefVector(labels + dropped, errors, np.exp(-gamma * errors), gamma)


def group_rsm(values) -> float:
    """Noisy-OR of member beliefs: ``1 - prod(1 - b_i)``."""
    return 1.0 - math.prod(1.0 - float(b) for b in values)


@dataclass
class RsmReport:
    per_resource: dict
    per_event: dict
    members: dict
    workload_breakdown: Optional[dict] = None
    normalized: bool = False
    unnormalized: Optional[dict] = None


def resource_rsm(b, members: Mapping[str, list]) -> RsmReport:
    """Resource significance per group, averaged over workloads.

    ``b`` is a single :class:`BeliefVector` or a mapping workload -> belief
    vector, each computed on that workload's rows. ``members`` maps group ->
    event names (see :meth:`Partition.members`); an event missing from a belief
    vector counts as belief 0.
    """
    members = {g: list(evs) for g, evs in members.items() if evs}
    if not members:
        raise EmptyGroupPartition("no resource group has any analyzed event")
    per_workload = dict(b) if isinstance(b, Mapping) else {None: b}
    if not per_workload:
        raise EmptyGroupPartition("no workload subsets to aggregate")

    breakdown = {}
    event_sum = {}
    for w, bv in per_workload.items():
        lookup = bv.as_dict()
        breakdown[w] = {g: group_rsm(lookup.get(e, 0.0) for e in evs) for g, evs in members.items()}
        for g, evs in members.items():
            for e in evs:
                event_sum.setdefault(e, []).append(lookup.get(e, 0.0))
    W = len(breakdown)
    per_resource = {g: math.fsum(breakdown[w][g] for w in breakdown) / W for g in members}
    per_event = {e: math.fsum(v) / W for e, v in event_sum.items()}
    return RsmReport(per_resource, per_event, members,
                     breakdown if W > 1 or None not in breakdown else None)


def normalize_rsm(report: RsmReport) -> RsmReport:
    total = math.fsum(report.per_resource.values())
    if not total > 0:
        raise AllZeroRsm("every resource has zero significance")
    scaled = {g: v / total for g, v in report.per_resource.items()}
    return RsmReport(scaled, dict(report.per_event), dict(report.members), report.workload_breakdown,
                     True, dict(report.per_resource))
