"""Regenerate the bundled synthetic fixture under fixtures/.

Two kernels share one profile: ``hydro`` is driven by system-memory traffic
and bank conflicts, ``mesh`` by double-precision and FMA work. A second CSV
holds an ``hydro`` variant whose SYSMEM events are halved, for comparisons.
The ``dram_*`` files are a DRAM-bound kernel and two variants with its DRAM
events doubled and halved, used by the comparative direction checks.

    python3 scripts/make_fixture.py [--out fixtures]
"""

import argparse
import os

from rsmkit.profile import write_profile_csv
from rsmkit.synthetic import EXTRA_EVENTS, FIXTURE_EVENTS, merge_tables, scaled_variant, synthetic_profile


def weights(spec):
    return {e: w for g, w in spec.items() for e in FIXTURE_EVENTS[g]}


def build():
    hydro = synthetic_profile(11, kernel="hydro", extra=EXTRA_EVENTS,
                              weights=weights({"SYSMEM": 0.3, "BANK": 0.25}))
    mesh = synthetic_profile(12, kernel="mesh", extra=EXTRA_EVENTS,
                             weights=weights({"FMA": 0.3, "FP64": 0.2}))
    baseline = merge_tables(hydro.table, mesh.table)
    optimized = scaled_variant(hydro, "SYSMEM", 0.5, seed=13, jitter=0.02)
    return baseline, optimized


def build_dram():
    dram = synthetic_profile(21, weights=weights({"DRAM": 0.2, "BANK": 0.2, "L2": 0.2}))
    doubled = scaled_variant(dram, "DRAM", 2.0, seed=22, jitter=0.03, kernel="variant")
    halved = scaled_variant(dram, "DRAM", 0.5, seed=22, jitter=0.03, kernel="variant")
    return dram.table, doubled, halved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    args = parser.parse_args()
    baseline, optimized = build()
    dram, doubled, halved = build_dram()
    os.makedirs(args.out, exist_ok=True)
    for name, table in (("profile.csv", baseline), ("profile_opt.csv", optimized), ("dram_base.csv", dram),
                        ("dram_x2.csv", doubled), ("dram_x05.csv", halved)):
        path = os.path.join(args.out, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(write_profile_csv(table))
        print(path)


if __name__ == "__main__":
    main()
