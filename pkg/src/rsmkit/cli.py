"""``rsmkit analyze``: run the configured analyses and write the report and charts.

Outputs in the output directory:

* ``report.json``: the canonical, byte-reproducible result;
* ``sunburst_<task>.svg`` and ``compare_<pair>.svg``: views derived from it;
* ``run_meta.json``: timestamp and environment of the run.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 analysis error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import platform
import re
import sys

import numpy as np

from . import __version__
from .comparative import align_pairs, comparative_rsm
from .config import TaskConfig, load_config
from .errors import AnalysisError, ConfigError, DataError, RsmError
from .machine import load_model, model_to_dict
from .pipeline import analyze_kernel
from .profile import parse_profile_csv
from .report import (
    build_sunburst,
    comparison_to_dict,
    dumps,
    render_comparison,
    render_sunburst,
    SunburstNode,
    validate_report,
    write_atomic,
)
from .suggest import load_rules, suggest

log = logging.getLogger("rsmkit")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ANALYSIS = 0, 2, 3, 4


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _read_text(path, what, error):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise error(f"cannot read {what} {path}: {exc.strerror}") from None


class _Tables:
    """Profile CSVs loaded once per resolved path."""

    def __init__(self, cfg: TaskConfig):
        self.cfg = cfg
        self._cache = {}

    def get(self, data):
        path = self.cfg.resolve(data or self.cfg.data)
        if path not in self._cache:
            try:
                with open(path, "rb") as fh:
                    raw = fh.read()
            except OSError as exc:
                raise DataError(f"cannot read profile CSV {path}: {exc.strerror}") from None
            log.info("loading %s", path)
            self._cache[path] = parse_profile_csv(raw, self.cfg.columns)
        return self._cache[path]


def _kernels_for(task, table):
    if task.kernels == "all":
        return table.kernels()
    missing = [k for k in task.kernels if k not in table.kernels()]
    if missing:
        raise ConfigError(f"task {task.name!r} names kernel(s) absent from the data: {', '.join(missing)}")
    return list(task.kernels)


def _kernel_entry(ka, fired):
    rep = ka.report
    att = ka.attribution
    dropped = sorted({c for dn in att.dictionaries.values() for c in dn.dropped})
    ensembles = {}
    for w, ens in att.ensembles.items():
        labels = att.dictionaries[w].col_labels
        ensembles["all" if w is None else w] = {
            "k_max": ens.k_max,
            "unique_supports": ens.unique_supports,
            "coefficients": {c: float(a) for c, a in zip(labels, ens.avg_coefficients) if a != 0.0},
            "selection_frequency": {c: float(f) for c, f in zip(labels, ens.selection_frequency) if f > 0},
        }
    events = [e for evs in rep.members.values() for e in evs]
    return {
        "rows": list(ka.target.row_labels),
        "target": {"kind": ka.target.kind, "values": ka.target.values,
                   "normalization": ka.target.normalization},
        "rsm": rep.per_resource,
        "rsm_unnormalized": rep.unnormalized,
        "members": rep.members,
        "event_beliefs": {e: rep.per_event.get(e, 0.0) for e in events},
        "excluded_events": att.partition.excluded_labels,
        "dropped_columns": dropped,
        "workload_rsm": rep.workload_breakdown or {},
        "ensembles": ensembles,
        "suggestions": {
            "dominant": fired.dominant,
            "fired": [{"id": f.rule.id, "label": f.rule.label, "groups": f.groups, "rsm": f.rsm,
                       "tuning_opportunity": f.rule.tuning_opportunity,
                       "transformation": f.rule.transformation, "expected": f.rule.expected}
                      for f in fired.fired],
        },
    }


def run(cfg: TaskConfig) -> dict:
    """Execute every task and comparison of ``cfg``; returns the report document."""
    model_text = _read_text(cfg.resolve(cfg.model), "machine model", ConfigError) if cfg.model else None
    model = load_model(model_text)
    rules_text = _read_text(cfg.resolve(cfg.rules), "ruleset", ConfigError) if cfg.rules else None
    rules = load_rules(rules_text, model)
    tables = _Tables(cfg)

    tasks_out = {}
    for name, task in cfg.tasks.items():
        table = tables.get(task.data)
        kernels = {}
        reports = {}
        for kernel in _kernels_for(task, table):
            log.info("task %s: kernel %s (target %s)", name, kernel, task.target)
            ka = analyze_kernel(table, kernel, task.target, model, task.hyperparams, task.row_key,
                                task.workload_key, task.alphas, task.ts_scope)
            fired = suggest(ka.report, rules, cfg.top_k, cfg.threshold, kernel)
            kernels[kernel] = _kernel_entry(ka, fired)
            reports[kernel] = ka.report
        tasks_out[name] = {
            "target": task.target,
            "workload_key": task.workload_key,
            "hyperparams": task.hyperparams.to_dict(),
            "kernels": kernels,
            "sunburst": build_sunburst(f"{cfg.application}:{name}", reports).to_dict(),
        }

    comparisons = []
    for comp in cfg.comparisons:
        ta, tb = cfg.tasks[comp.first[0]], cfg.tasks[comp.second[0]]
        if ta.row_key.keys != tb.row_key.keys:
            raise ConfigError(f"comparison {comp.name}: tasks join on different row keys")
        table_a, table_b = tables.get(ta.data), tables.get(tb.data)
        for task, table, kernel in ((ta, table_a, comp.first[1]), (tb, table_b, comp.second[1])):
            if kernel not in table.kernels():
                raise ConfigError(f"comparison {comp.name}: kernel {kernel!r} absent from the data of task {task.name!r}")
        log.info("comparison %s", comp.name)
        pair = align_pairs(table_a, comp.first[1], table_b, comp.second[1], ta.row_key.keys, ta.target,
                           ta.alphas, ta.row_key.average_replicates, comp.labels)
        result = comparative_rsm(pair, model, ta.hyperparams)
        comparisons.append({"name": comp.name, "target": ta.target,
                            "hyperparams": ta.hyperparams.to_dict(), **comparison_to_dict(result)})

    doc = {
        "format": "rsmkit-report",
        "version": __version__,
        "seed": cfg.seed,
        "data": cfg.data,
        "model": model_to_dict(model),
        "hyperparams": cfg.hyperparams.to_dict(),
        "suggest": {"top_k": cfg.top_k, "threshold": cfg.threshold},
        "tasks": tasks_out,
        "comparisons": comparisons,
    }
    doc = json.loads(dumps(doc))
    validate_report(doc)
    return doc


def render_all(doc: dict, out_dir: str) -> list:
    """Write every SVG derivable from a report document; returns the paths."""
    written = []
    for name, task in doc["tasks"].items():
        path = os.path.join(out_dir, f"sunburst_{safe_name(name)}.svg")
        write_atomic(path, render_sunburst(SunburstNode.from_dict(task["sunburst"])))
        written.append(path)
    for comp in doc["comparisons"]:
        path = os.path.join(out_dir, f"compare_{safe_name(comp['name'])}.svg")
        write_atomic(path, render_comparison(comp))
        written.append(path)
    return written


def _meta(argv):
    return {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "rsmkit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": list(argv),
    }


def build_parser():
    parser = argparse.ArgumentParser(prog="rsmkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="run the analyses of a task configuration")
    a.add_argument("config", nargs="?", help="task configuration (YAML)")
    a.add_argument("--out", help="output directory (overrides output_dir)")
    a.add_argument("--seed", type=int)
    a.add_argument("--draws", type=int, help="ensemble draws R")
    a.add_argument("--kappa", type=float, help="sparsity fraction of the event count")
    a.add_argument("--tau", type=int, help="candidates sampled from at each step")
    a.add_argument("--gamma", type=float, help="belief temperature")
    a.add_argument("--threads", type=int, help="worker threads for the ensemble (results do not change)")
    a.add_argument("--render-only", metavar="REPORT", help="regenerate SVGs from an existing report.json")
    return parser


def analyze(args, argv) -> int:
    if args.render_only:
        try:
            with open(args.render_only, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read report {args.render_only}: {exc}") from None
        try:
            validate_report(doc)
        except Exception as exc:  # jsonschema.ValidationError
            raise DataError(f"{args.render_only} is not a valid report: {getattr(exc, 'message', exc)}") from None
        out_dir = args.out or os.path.dirname(os.path.abspath(args.render_only))
        for path in render_all(doc, out_dir):
            print(path)
        return EXIT_OK
    if not args.config:
        raise ConfigError("analyze needs a config file (or --render-only REPORT)")
    cfg = load_config(args.config).with_overrides(
        seed=args.seed, output_dir=None, threads=args.threads,
        draws=args.draws, kappa=args.kappa, tau=args.tau, gamma=args.gamma)
    out_dir = args.out or cfg.resolve(cfg.output_dir)
    doc = run(cfg)
    os.makedirs(out_dir, exist_ok=True)
    write_atomic(os.path.join(out_dir, "report.json"), dumps(doc))
    render_all(doc, out_dir)
    write_atomic(os.path.join(out_dir, "run_meta.json"), json.dumps(_meta(argv), indent=2) + "\n")
    print(os.path.join(out_dir, "report.json"))
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    codes = ((ConfigError, EXIT_CONFIG), (DataError, EXIT_DATA), (AnalysisError, EXIT_ANALYSIS))
    try:
        return analyze(args, argv)
    except RsmError as exc:
        code = next((c for cls, c in codes if isinstance(exc, cls)), EXIT_ANALYSIS)
        print(f"rsmkit: error: {exc}", file=sys.stderr)
        return code

if __name__ == "__main__":
    sys.exit(main())
