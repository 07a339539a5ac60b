"""Task-configuration files for the ``analyze`` command.

A configuration names a profile CSV, an optional machine model and ruleset,
and a set of analyses (*tasks*), each picking kernels and a target. Pairs of
``task:kernel`` references define comparisons. See ``docs/config.md`` for a
commented example.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Union

import yaml

from .errors import ConfigError
from .pipeline import HyperParams
from .profile import ColumnSchema, RowKeySpec
from .suggest import DEFAULT_THRESHOLD, DEFAULT_TOP_K
from .targets import TARGET_KINDS, AlphaBuckets

TOP_KEYS = {"data", "model", "rules", "output_dir", "seed", "defaults", "columns", "tasks",
            "comparisons", "suggest", "application"}
TASK_KEYS = {"data", "kernels", "target", "workload_key", "row_keys", "average_replicates",
             "hyperparams", "ts_scope", "alphas"}
HYPER_KEYS = {"kappa", "tau", "draws", "gamma", "fidelity_epsilon", "normalization"}
ROW_KEY_PARTS = ("workload", "frequency")


class _UniqueKeyLoader(yaml.SafeLoader):
    """SafeLoader that refuses duplicate mapping keys instead of keeping the last."""


def _construct_mapping(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (line {key_node.start_mark.line + 1})")
        seen.add(key)
    return loader.construct_mapping(node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


@dataclass
class TaskSpec:
    name: str
    kernels: Union[list, str]  # explicit list or "all"
    target: str
    hyperparams: HyperParams
    workload_key: Optional[str] = None
    row_key: RowKeySpec = RowKeySpec()
    data: Optional[str] = None
    ts_scope: str = "global"
    alphas: AlphaBuckets = AlphaBuckets()


@dataclass
class ComparisonSpec:
    first: tuple  # (task, kernel)
    second: tuple

    @property
    def name(self):
        return f"{self.first[0]}-{self.first[1]}__vs__{self.second[0]}-{self.second[1]}"

    @property
    def labels(self):
        return (f"{self.first[0]}:{self.first[1]}", f"{self.second[0]}:{self.second[1]}")


@dataclass
class TaskConfig:
    data: str
    tasks: dict
    model: Optional[str] = None
    rules: Optional[str] = None
    comparisons: list = field(default_factory=list)
    output_dir: str = "out"
    seed: int = 0
    hyperparams: HyperParams = HyperParams()
    columns: ColumnSchema = ColumnSchema()
    top_k: int = DEFAULT_TOP_K
    threshold: float = DEFAULT_THRESHOLD
    application: str = "application"
    base_dir: str = "."

    def resolve(self, path):
        """Paths in the config are relative to the config file's directory."""
        if path is None:
            return None
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))

    def with_overrides(self, seed=None, output_dir=None, threads=None, **hyper):
        """Apply command-line overrides to the defaults and to every task."""
        changes = dict(hyper, seed=seed, threads=threads)
        tasks = {n: TaskSpec(t.name, t.kernels, t.target, _checked(t.hyperparams.replace, **changes),
                             t.workload_key, t.row_key, t.data, t.ts_scope, t.alphas)
                 for n, t in self.tasks.items()}
        return TaskConfig(self.data, tasks, self.model, self.rules, list(self.comparisons),
                          output_dir if output_dir is not None else self.output_dir,
                          seed if seed is not None else self.seed,
                          _checked(self.hyperparams.replace, **changes), self.columns,
                          self.top_k, self.threshold, self.application, self.base_dir)

    def echo(self) -> dict:
        """Resolved settings as echoed into the report (paths as written)."""
        return {
            "data": self.data, "model": self.model, "rules": self.rules, "seed": self.seed,
            "top_k": self.top_k, "threshold": self.threshold,
        }


def _checked(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid hyperparameters: {exc}") from None


def _mapping(value, where):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value


def _check_keys(doc, allowed, where):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")


def _hyperparams(doc, base: HyperParams, where):
    doc = _mapping(doc, where)
    _check_keys(doc, HYPER_KEYS, where)
    return _checked(base.replace, **doc)


def _parse_ref(ref, tasks):
    if not isinstance(ref, str) or ref.count(":") != 1:
        raise ConfigError(f"comparison side {ref!r} must look like 'task:kernel'")
    task, kernel = (s.strip() for s in ref.split(":"))
    if task not in tasks:
        raise ConfigError(f"comparison references undefined task {task!r}")
    spec = tasks[task]
    if spec.kernels != "all" and kernel not in spec.kernels:
        raise ConfigError(f"comparison references kernel {kernel!r} not analyzed by task {task!r}")
    return task, kernel


def _parse_comparison(entry, tasks):
    if isinstance(entry, str):
        parts = [p.strip() for p in entry.split(",")]
    elif isinstance(entry, (list, tuple)):
        parts = list(entry)
    elif isinstance(entry, dict) and set(entry) == {"first", "second"}:
        parts = [entry["first"], entry["second"]]
    else:
        raise ConfigError(f"cannot read comparison {entry!r}")
    if len(parts) != 2:
        raise ConfigError(f"comparison {entry!r} must name exactly two sides")
    first, second = (_parse_ref(p, tasks) for p in parts)
    if tasks[first[0]].target != tasks[second[0]].target:
        raise ConfigError(f"comparison {entry!r} mixes targets "
                          f"{tasks[first[0]].target!r} and {tasks[second[0]].target!r}")
    return ComparisonSpec(first, second)


def _task(name, doc, defaults):
    doc = _mapping(doc, f"task {name!r}")
    _check_keys(doc, TASK_KEYS, f"task {name!r}")
    target = doc.get("target")
    if target not in TARGET_KINDS:
        raise ConfigError(f"task {name!r}: unknown target {target!r}; expected one of {', '.join(TARGET_KINDS)}")
    kernels = doc.get("kernels", "all")
    if kernels != "all":
        if isinstance(kernels, str):
            kernels = [kernels]
        if not isinstance(kernels, list) or not kernels or not all(isinstance(k, str) for k in kernels):
            raise ConfigError(f"task {name!r}: kernels must be 'all' or a non-empty list of names")
        if len(set(kernels)) != len(kernels):
            raise ConfigError(f"task {name!r}: kernel listed twice")
    row_keys = tuple(doc.get("row_keys", ROW_KEY_PARTS))
    if not row_keys or any(k not in ROW_KEY_PARTS for k in row_keys) or len(set(row_keys)) != len(row_keys):
        raise ConfigError(f"task {name!r}: row_keys must be a subset of {ROW_KEY_PARTS}")
    workload_key = doc.get("workload_key")
    if workload_key is not None and workload_key not in row_keys:
        raise ConfigError(f"task {name!r}: workload_key {workload_key!r} is not one of row_keys {row_keys}")
    scope = doc.get("ts_scope", "global")
    if scope not in ("global", "per_kernel"):
        raise ConfigError(f"task {name!r}: ts_scope must be 'global' or 'per_kernel'")
    alphas = _mapping(doc.get("alphas"), f"task {name!r} alphas")
    try:
        buckets = AlphaBuckets(**{k: (tuple(v) if k == "boundaries" else v) for k, v in alphas.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"task {name!r}: invalid alphas: {exc}") from None
    return TaskSpec(name, kernels, target, _hyperparams(doc.get("hyperparams"), defaults, f"task {name!r} hyperparams"),
                    workload_key, RowKeySpec(row_keys, bool(doc.get("average_replicates", True))),
                    doc.get("data"), scope, buckets)


def parse_config(text: str, base_dir: str = ".") -> TaskConfig:
    try:
        doc = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    doc = _mapping(doc, "config")
    _check_keys(doc, TOP_KEYS, "config")
    if not isinstance(doc.get("data"), str):
        raise ConfigError("config needs a 'data' path to a profile CSV")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    defaults = _hyperparams(doc.get("defaults"), HyperParams(seed=seed), "defaults")

    tasks_doc = _mapping(doc.get("tasks"), "tasks")
    if not tasks_doc:
        raise ConfigError("config defines no tasks")
    tasks = {}
    for name, tdoc in tasks_doc.items():
        if not isinstance(name, str) or not name or ":" in name or "," in name:
            raise ConfigError(f"invalid task name {name!r}")
        tasks[name] = _task(name, tdoc, defaults)

    comparisons = [_parse_comparison(e, tasks) for e in (doc.get("comparisons") or [])]
    columns = _mapping(doc.get("columns"), "columns")
    try:
        schema = ColumnSchema(**columns)
    except TypeError as exc:
        raise ConfigError(f"invalid columns section: {exc}") from None
    sug = _mapping(doc.get("suggest"), "suggest")
    _check_keys(sug, {"top_k", "threshold"}, "suggest")
    top_k = sug.get("top_k", DEFAULT_TOP_K)
    threshold = sug.get("threshold", DEFAULT_THRESHOLD)
    if not isinstance(top_k, int) or top_k < 1 or not isinstance(threshold, (int, float)) or threshold < 0:
        raise ConfigError("suggest.top_k must be a positive integer and threshold non-negative")

    return TaskConfig(doc["data"], tasks, doc.get("model"), doc.get("rules"), comparisons,
                      str(doc.get("output_dir", "out")), seed, defaults, schema, top_k, float(threshold),
                      str(doc.get("application", "application")), base_dir)


def load_config(path) -> TaskConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))
