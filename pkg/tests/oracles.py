"""Independent reference implementations used to check the package.

They are written for clarity, not speed, and share no code with ``rsmkit``.
"""

from itertools import combinations

import numpy as np


def best_subset(D, t, k):
    """Exhaustive search for the size-``k`` support with the smallest residual."""
    best = (np.inf, None, None)
    for cols in combinations(range(D.shape[1]), k):
        x, *_ = np.linalg.lstsq(D[:, cols], t, rcond=None)
        err = float(np.sum((t - D[:, cols] @ x) ** 2))
        if err < best[0] - 1e-12:
            best = (err, cols, x)
    return best


def naive_omp(D, t, k):
    """Textbook OMP: pick the most correlated column, refit with lstsq."""
    support = []
    r = t.copy()
    x = np.zeros(0)
    for _ in range(k):
        if np.linalg.norm(r) <= 1e-12 * max(np.linalg.norm(t), 1.0):
            break
        c = np.abs(D.T @ r)
        c[support] = -np.inf
        support.append(int(np.argmax(c)))
        x, *_ = np.linalg.lstsq(D[:, support], t, rcond=None)
        r = t - D[:, support] @ x
    return support, x


def noisy_or(beliefs):
    p = 1.0
    for b in beliefs:
        p *= 1.0 - b
    return 1.0 - p


def alpha_table(ul):
    """The utilization step function, spelled out."""
    if ul < 0.5:
        return 0.1
    if ul < 0.8:
        return 0.5
    return 0.8


def coherence(D):
    G = np.abs(D.T @ D)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def incoherent_dictionary(seed, n=20, c_max=10, k_max=3, spread=0.15):
    """Noiseless planted problem that OMP is guaranteed to solve.

    Columns are a perturbed orthonormal set, rescaled to unit norm, with
    mutual coherence below ``1 / (2k - 1)``; under that condition greedy
    pursuit recovers every k-sparse representation exactly.
    """
    rng = np.random.default_rng(seed)
    c = int(rng.integers(k_max + 1, c_max + 1))
    k = int(rng.integers(1, k_max + 1))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    D = q[:, :c] + spread * rng.normal(size=(n, c)) / np.sqrt(n)
    D /= np.linalg.norm(D, axis=0)
    support = sorted(rng.choice(c, size=k, replace=False).tolist())
    coef = rng.uniform(0.5, 3.0, k) * rng.choice([-1.0, 1.0], k)
    return D, D[:, support] @ coef, support, coef
