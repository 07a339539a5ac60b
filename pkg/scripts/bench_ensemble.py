"""Wall-clock timing of ensemble OMP at default settings.

    python3 scripts/bench_ensemble.py --rows 40 --cols 20 --threads 1 8
"""

import argparse
import time

import numpy as np

from rsmkit.sparse import ensemble_omp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=40)
    ap.add_argument("--cols", type=int, default=20)
    ap.add_argument("--draws", type=int, default=50_000)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 8])
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    D = rng.normal(size=(args.rows, args.cols))
    D /= np.linalg.norm(D, axis=0)
    t = D[:, :3] @ np.array([1.0, -0.5, 0.25]) + rng.normal(0, 0.01, args.rows)
    ref = None
    for n in args.threads:
        start = time.perf_counter()
        res = ensemble_omp(D, t, draws=args.draws, seed=1, threads=n)
        elapsed = time.perf_counter() - start
        same = ref is None or res.avg_coefficients.tobytes() == ref
        ref = ref or res.avg_coefficients.tobytes()
        print(f"threads={n}: {elapsed:.2f}s  bitwise-equal={same}")


if __name__ == "__main__":
    main()
