"""Rule engine turning dominant resources into optimization suggestions."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from .errors import ConfigError, UnknownGroupInRule, UnnormalizedReport
from .machine import MachineModel
from .sparse import RsmReport

DEFAULT_TOP_K = 3
DEFAULT_THRESHOLD = 0.15


@dataclass(frozen=True)
class SuggestionRule:
    id: str
    trigger_groups: tuple
    tuning_opportunity: str = ""
    transformation: str = ""
    expected: dict = field(default_factory=dict, compare=False)
    label: str = ""
    also_trigger_from_above: bool = False
    # triggers plus, when enabled, every slower group; filled in by load_rules
    effective_triggers: tuple = ()


@dataclass
class FiredRule:
    rule: SuggestionRule
    groups: list
    rsm: list

    @property
    def strength(self):
        return max(self.rsm)


@dataclass
class SuggestionReport:
    kernel: str
    fired: list
    threshold_used: float
    top_k: int
    dominant: list

    @property
    def rule_ids(self):
        return [f.rule.id for f in self.fired]


def default_rules_text() -> str:
    return resources.files("rsmkit").joinpath("data").joinpath("rules.yaml").read_text("utf-8")


def load_rules(config=None, model: Optional[MachineModel] = None) -> list:
    """Parse and validate a ruleset; ``None`` loads the default A-E rules.

    Triggers are checked against ``model`` when given, and slower groups are
    folded into ``effective_triggers`` for rules that ask for it.
    """
    if config is not None and hasattr(config, "read"):
        config = config.read()
    if isinstance(config, bytes):
        config = config.decode("utf-8")
    if config is None:
        config = default_rules_text()
    try:
        doc = yaml.safe_load(config) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"rules file is not valid YAML: {exc}") from None
    entries = doc.get("rules", []) if isinstance(doc, dict) else doc
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise ConfigError("rules must be a list")

    rules, ids = [], set()
    for e in entries:
        if not isinstance(e, dict) or "id" not in e:
            raise ConfigError("each rule needs an id")
        rid = str(e["id"])
        if rid in ids:
            raise ConfigError(f"duplicate rule id {rid!r}")
        ids.add(rid)
        triggers = tuple(str(g) for g in e.get("trigger_groups") or ())
        if not triggers:
            raise ConfigError(f"rule {rid!r} has no trigger groups")
        effective = list(triggers)
        if model is not None:
            for g in triggers:
                if g not in model.group_names:
                    raise UnknownGroupInRule(rid, g)
            if e.get("also_trigger_from_above"):
                for g in triggers:
                    effective += [s for s in model.slower_than(g) if s not in effective]
        rules.append(SuggestionRule(
            rid, triggers, str(e.get("tuning_opportunity", "")).strip(),
            str(e.get("transformation", "")).strip(), dict(e.get("expected") or {}),
            str(e.get("label", "")), bool(e.get("also_trigger_from_above", False)), tuple(effective)))
    return rules


def dominant_resources(per_resource: dict, top_k: int, threshold: float) -> list:
    ranked = sorted(per_resource.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(g, v) for g, v in ranked[:top_k] if v >= threshold]


def suggest(report: RsmReport, rules: list, top_k: int = DEFAULT_TOP_K,
            threshold: float = DEFAULT_THRESHOLD, kernel: str = "") -> SuggestionReport:
    """Fire every rule with a trigger among the dominant resources.

    The dominant set is the ``top_k`` highest-RSM resources that also reach
    ``threshold``. Fired rules are ordered by their strongest matched RSM,
    then by id.
    """
    if not report.normalized:
        raise UnnormalizedReport("suggestions need a normalized RSM report")
    dominant = dominant_resources(report.per_resource, top_k, threshold)
    dom = dict(dominant)
    fired = []
    for rule in rules:
        triggers = rule.effective_triggers or rule.trigger_groups
        matched = [g for g in triggers if g in dom]
        if matched:
            fired.append(FiredRule(rule, matched, [dom[g] for g in matched]))
    fired.sort(key=lambda f: (-f.strength, f.rule.id))
    return SuggestionReport(kernel, fired, threshold, top_k, [g for g, _ in dominant])
