"""Abstract machine model: resource groups and event categorization.

Event patterns use a deliberately small notation:

* ``[a,b,c]`` matches any one of the listed literals,
* ``*`` matches any run of characters (including none),
* everything else is literal.

Patterns are anchored at both ends and matched case-insensitively, so
``l2_[p,subp][0,1]_total_[read,write]_sector_queries`` names exactly eight
events. A pattern without ``*`` therefore names a finite set of events, which
keeps a model file auditable.

Rule precedence when categorizing an event is fixed:
exclusions, then manual overrides, then miss promotions, then group patterns.
Within one tier the first matching pattern wins, and :func:`load_model`
rejects models where two patterns of the same tier could match one event but
disagree on the destination group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import product
from typing import Optional

import yaml

from .errors import AmbiguousRule, DuplicateGroup, ModelError, UnknownPromotionTarget

UNCAT = "UNCAT"


@lru_cache(maxsize=None)
def expand_pattern(pattern: str) -> tuple:
    """Expand bracket alternations; the results contain only literals and ``*``."""
    pieces = []
    pos = 0
    for m in re.finditer(r"\[([^\[\]]*)\]", pattern):
        pieces.append((pattern[pos:m.start()],))
        options = tuple(o.strip() for o in m.group(1).split(","))
        if not all(options):
            raise ModelError(f"empty alternative in pattern {pattern!r}")
        pieces.append(options)
        pos = m.end()
    pieces.append((pattern[pos:],))
    expanded = tuple("".join(p).lower() for p in product(*pieces))
    if any(ch in e for e in expanded for ch in "[]"):
        raise ModelError(f"unbalanced bracket in pattern {pattern!r}")
    return expanded


@lru_cache(maxsize=None)
def _compiled(pattern: str):
    alts = "|".join(".*".join(re.escape(part) for part in e.split("*")) for e in expand_pattern(pattern))
    return re.compile(f"(?:{alts})\\Z")


def pattern_matches(pattern: str, name: str) -> bool:
    return _compiled(pattern).match(name.lower()) is not None


def _globs_intersect(p: str, q: str) -> bool:
    # two star-only globs share a string iff they can be aligned
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(p) and j == len(q):
            return True
        if i < len(p) and p[i] == "*":
            return go(i + 1, j) or (j < len(q) and go(i, j + 1))
        if j < len(q) and q[j] == "*":
            return go(i, j + 1) or (i < len(p) and go(i + 1, j))
        if i < len(p) and j < len(q) and p[i] == q[j]:
            return go(i + 1, j + 1)
        return False

    return go(0, 0)


def patterns_overlap(a: str, b: str) -> bool:
    """True when some event name matches both patterns."""
    return any(_globs_intersect(x, y) for x in expand_pattern(a) for y in expand_pattern(b))


@dataclass(frozen=True)
class ResourceGroup:
    name: str
    patterns: tuple
    description: str = ""


@dataclass(frozen=True)
class Category:
    kind: str  # "group" | "excluded" | "uncategorized"
    group: Optional[str] = None
    rule: Optional[str] = None

    @property
    def is_group(self):
        return self.kind == "group"


EXCLUDED = Category("excluded")
UNCATEGORIZED = Category("uncategorized")


@dataclass(frozen=True)
class MachineModel:
    groups: tuple
    hierarchy_order: tuple = ()
    miss_promotions: tuple = ()  # ((pattern, group), ...)
    manual_overrides: tuple = ()  # ((pattern, group), ...)
    exclusions: tuple = ("*hit*",)
    name: str = "custom"
    notes: tuple = field(default=(), compare=False)

    @property
    def group_names(self):
        return [g.name for g in self.groups]

    def group(self, name):
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def slower_than(self, name):
        """Groups after ``name`` in the memory hierarchy (fastest first)."""
        if name not in self.hierarchy_order:
            return []
        return list(self.hierarchy_order[self.hierarchy_order.index(name) + 1:])

    def validate(self):
        names = set()
        for g in self.groups:
            if g.name in names:
                raise DuplicateGroup(g.name)
            if g.name == UNCAT:
                raise ModelError(f"{UNCAT} is reserved for uncategorized events")
            if not g.patterns:
                raise ModelError(f"group {g.name!r} has no patterns")
            names.add(g.name)
        for pattern, target in self.miss_promotions + self.manual_overrides:
            if target not in names:
                raise UnknownPromotionTarget(pattern, target)
        for name in self.hierarchy_order:
            if name not in names:
                raise ModelError(f"hierarchy names undefined group {name!r}")
        if len(set(self.hierarchy_order)) != len(self.hierarchy_order):
            raise ModelError("hierarchy lists a group twice")

        for g in self.groups:
            for p in g.patterns:
                expand_pattern(p)
        _check_tier([(p, g.name) for g in self.groups for p in g.patterns])
        _check_tier(list(self.miss_promotions))
        _check_tier(list(self.manual_overrides))
        return self


def _check_tier(rules):
    for i, (p, gp) in enumerate(rules):
        for q, gq in rules[i + 1:]:
            if gp != gq and patterns_overlap(p, q):
                raise AmbiguousRule(p, q)


def categorize_event(name: str, model: MachineModel) -> Category:
    if not name:
        raise ValueError("event name must be non-empty")
    for p in model.exclusions:
        if pattern_matches(p, name):
            return Category("excluded", rule=p)
    for p, g in model.manual_overrides:
        if pattern_matches(p, name):
            return Category("group", g, p)
    for p, g in model.miss_promotions:
        if pattern_matches(p, name):
            return Category("group", g, p)
    for grp in model.groups:
        for p in grp.patterns:
            if pattern_matches(p, name):
                return Category("group", grp.name, p)
    return UNCATEGORIZED


@dataclass
class Partition:
    labels: list
    groups: dict  # group -> column indices, model order, non-empty only
    uncategorized: list
    excluded: list

    def members(self, include_uncategorized=True):
        """group -> event names; uncategorized events form the ``UNCAT`` pseudo-group."""
        out = {g: [self.labels[i] for i in idx] for g, idx in self.groups.items()}
        if include_uncategorized and self.uncategorized:
            out[UNCAT] = [self.labels[i] for i in self.uncategorized]
        return out

    @property
    def excluded_labels(self):
        return [self.labels[i] for i in self.excluded]

    @property
    def uncategorized_labels(self):
        return [self.labels[i] for i in self.uncategorized]


def partition_columns(d, model: MachineModel) -> Partition:
    labels = list(d.col_labels if hasattr(d, "col_labels") else d)
    groups = {g: [] for g in model.group_names}
    uncat, excluded = [], []
    for i, name in enumerate(labels):
        cat = categorize_event(name, model)
        if cat.kind == "group":
            groups[cat.group].append(i)
        elif cat.kind == "excluded":
            excluded.append(i)
        else:
            uncat.append(i)
    return Partition(labels, {g: idx for g, idx in groups.items() if idx}, uncat, excluded)


# --- model files ---------------------------------------------------------------

def _pairs(section, what):
    if section is None:
        return ()
    if isinstance(section, dict):
        return tuple((str(k), str(v)) for k, v in section.items())
    if isinstance(section, list):
        out = []
        for item in section:
            if not isinstance(item, dict) or "pattern" not in item or "group" not in item:
                raise ModelError(f"{what} entries need 'pattern' and 'group'")
            out.append((str(item["pattern"]), str(item["group"])))
        return tuple(out)
    raise ModelError(f"{what} must be a mapping or a list")


def model_from_dict(doc: dict) -> MachineModel:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a mapping")
    unknown = set(doc) - {"name", "groups", "hierarchy", "promotions", "overrides", "exclusions", "notes"}
    if unknown:
        raise ModelError(f"unknown model sections {sorted(unknown)}")
    groups = []
    for entry in doc.get("groups") or []:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ModelError("each group needs a name")
        patterns = entry.get("patterns") or []
        if isinstance(patterns, str):
            patterns = [patterns]
        groups.append(ResourceGroup(str(entry["name"]), tuple(str(p) for p in patterns),
                                    str(entry.get("description", ""))))
    if not groups:
        raise ModelError("model defines no groups")
    exclusions = doc.get("exclusions")
    model = MachineModel(
        groups=tuple(groups),
        hierarchy_order=tuple(str(h) for h in doc.get("hierarchy") or ()),
        miss_promotions=_pairs(doc.get("promotions"), "promotions"),
        manual_overrides=_pairs(doc.get("overrides"), "overrides"),
        exclusions=("*hit*",) if exclusions is None else tuple(str(e) for e in exclusions),
        name=str(doc.get("name", "custom")),
        notes=tuple(str(n) for n in doc.get("notes") or ()),
    )
    return model.validate()


DEFAULT_MODEL_RESOURCE = "volta_model.yaml"


def default_model_text() -> str:
    return resources.files("rsmkit").joinpath("data").joinpath(DEFAULT_MODEL_RESOURCE).read_text("utf-8")


def load_model(config=None) -> MachineModel:
    """Load a model from YAML text/bytes/file object; empty or ``None`` gives the Volta default."""
    if config is not None and hasattr(config, "read"):
        config = config.read()
    if isinstance(config, bytes):
        config = config.decode("utf-8")
    if config is None or not config.strip():
        config = default_model_text()
    try:
        doc = yaml.safe_load(config)
    except yaml.YAMLError as exc:
        raise ModelError(f"model file is not valid YAML: {exc}") from None
    return model_from_dict(doc)


def model_to_dict(model: MachineModel) -> dict:
    return {
        "name": model.name,
        "groups": [{"name": g.name, "description": g.description, "patterns": list(g.patterns)}
                   for g in model.groups],
        "hierarchy": list(model.hierarchy_order),
        "promotions": [{"pattern": p, "group": g} for p, g in model.miss_promotions],
        "overrides": [{"pattern": p, "group": g} for p, g in model.manual_overrides],
        "exclusions": list(model.exclusions),
    }
