"""Report assembly: sunburst hierarchy, JSON serialization and SVG charts.

SVG output is plain SVG 1.1 built from strings. Every drawn quantity carries
its source value in a ``data-value`` attribute so it can be traced back to
``report.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .machine import UNCAT

LEVELS = ("application", "kernel", "resource", "event")


@dataclass
class SunburstNode:
    label: str
    level: str
    value: float
    children: list = field(default_factory=list)
    flag: Optional[str] = None

    def to_dict(self):
        out = {"label": self.label, "level": self.level, "value": self.value}
        if self.flag:
            out["flag"] = self.flag
        out["children"] = [c.to_dict() for c in self.children]
        return out

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["label"], doc["level"], float(doc["value"]),
                   [cls.from_dict(c) for c in doc.get("children", [])], doc.get("flag"))

    def depth(self):
        return 1 + max((c.depth() for c in self.children), default=0)


def _ordered(nodes):
    return sorted(nodes, key=lambda n: (-n.value, n.label))


def build_sunburst(app: str, reports: dict) -> SunburstNode:
    """Application -> kernel -> resource -> event tree from normalized RSM reports.

    A resource's value is its normalized RSM; its events split that value in
    proportion to their beliefs. Zero-valued nodes are left out.
    """
    kernels = []
    for kernel, rep in reports.items():
        resources_ = []
        for g, v in rep.per_resource.items():
            if v <= 0:
                continue
            evs = rep.members.get(g, [])
            total = math.fsum(rep.per_event.get(e, 0.0) for e in evs)
            events = []
            if total > 0:
                events = [SunburstNode(e, "event", v * rep.per_event.get(e, 0.0) / total)
                          for e in evs if rep.per_event.get(e, 0.0) > 0]
            value = math.fsum(e.value for e in events) if events else v
            resources_.append(SunburstNode(g, "resource", value, _ordered(events),
                                           "uncategorized" if g == UNCAT else None))
        kernels.append(SunburstNode(kernel, "kernel", math.fsum(r.value for r in resources_),
                                    _ordered(resources_)))
    return SunburstNode(app, "application", math.fsum(k.value for k in kernels), _ordered(kernels))


# --- JSON -------------------------------------------------------------------------

def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(report) -> str:
    return json.dumps(jsonable(report), indent=2, allow_nan=False) + "\n"


def write_atomic(path, data):
    """Write via a temporary file in the same directory, then rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_schema() -> dict:
    text = resources.files("rsmkit").joinpath("data").joinpath("report.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_report(doc) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match the shipped schema."""
    import jsonschema

    jsonschema.validate(doc, report_schema())


# --- SVG ----------------------------------------------------------------------------

PALETTE = {
    "FP64": "#4e79a7", "FMA": "#59a14f", "SMEM": "#edc948", "TEX": "#b07aa1",
    "BANK": "#ff9da7", "L2": "#f28e2b", "DRAM": "#e15759", "SYSMEM": "#9c755f",
    "PCIE": "#76b7b2", UNCAT: "#bab0ac",
}


def color_for(name):
    if name in PALETTE:
        return PALETTE[name]
    h = hashlib.md5(name.encode("utf-8")).hexdigest()
    return "#" + h[:6]


def _lighten(hex_color, amount=0.45):
    r, g, b = (int(hex_color[i:i + 2], 16) for i in (1, 3, 5))
    mix = lambda c: round(c + (255 - c) * amount)  # noqa: E731
    return f"#{mix(r):02x}{mix(g):02x}{mix(b):02x}"


def _f(x):
    return f"{x:.3f}"


def _svg_open(width, height, title):
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg version="1.1" xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _point(cx, cy, r, angle):
    return cx + r * math.cos(angle), cy + r * math.sin(angle)


def _sector_path(cx, cy, r_in, r_out, a0, a1):
    if a1 - a0 >= 2 * math.pi - 1e-9:
        parts = [f"M {_f(cx + r_out)} {_f(cy)} A {_f(r_out)} {_f(r_out)} 0 1 1 {_f(cx - r_out)} {_f(cy)} "
                 f"A {_f(r_out)} {_f(r_out)} 0 1 1 {_f(cx + r_out)} {_f(cy)} Z"]
        if r_in > 0:
            parts.append(f"M {_f(cx + r_in)} {_f(cy)} A {_f(r_in)} {_f(r_in)} 0 1 0 {_f(cx - r_in)} {_f(cy)} "
                         f"A {_f(r_in)} {_f(r_in)} 0 1 0 {_f(cx + r_in)} {_f(cy)} Z")
        return " ".join(parts)
    large = 1 if a1 - a0 > math.pi else 0
    x0, y0 = _point(cx, cy, r_out, a0)
    x1, y1 = _point(cx, cy, r_out, a1)
    x2, y2 = _point(cx, cy, r_in, a1)
    x3, y3 = _point(cx, cy, r_in, a0)
    return (f"M {_f(x0)} {_f(y0)} A {_f(r_out)} {_f(r_out)} 0 {large} 1 {_f(x1)} {_f(y1)} "
            f"L {_f(x2)} {_f(y2)} A {_f(r_in)} {_f(r_in)} 0 {large} 0 {_f(x3)} {_f(y3)} Z")


def render_sunburst(tree: SunburstNode, style: Optional[dict] = None) -> bytes:
    style = {"size": 640, "hole": 70, "min_label_angle": 0.18, **(style or {})}
    size = style["size"]
    cx = cy = size / 2
    depth = max(tree.depth(), 1)
    ring = (size / 2 - 10 - style["hole"]) / max(depth - 1, 1)
    out = _svg_open(size, size, f"Resource significance: {tree.label}")
    labels = []

    def radii(level):
        if level == 0:
            return 0.0, style["hole"]
        return style["hole"] + (level - 1) * ring, style["hole"] + level * ring

    def draw(node, level, a0, a1, color):
        r_in, r_out = radii(level)
        if node.level == "kernel":
            fill = "#d9d9d9"
        elif node.level == "resource":
            fill = color_for(node.label)
        elif node.level == "event":
            fill = _lighten(color)
        else:
            fill = "#f0f0f0"
        attrs = (f' data-label={quoteattr(node.label)} data-level="{node.level}"'
                 f' data-value="{node.value!r}"')
        if node.flag:
            attrs += f' data-flag="{escape(node.flag)}"'
        out.append(f'<path d="{_sector_path(cx, cy, r_in, r_out, a0, a1)}" fill="{fill}" '
                   f'fill-rule="evenodd" stroke="#ffffff" stroke-width="1"{attrs}>'
                   f"<title>{escape(node.label)}: {node.value:.4g}</title></path>")
        if a1 - a0 >= style["min_label_angle"]:
            mid = (a0 + a1) / 2
            r_mid = (r_in + r_out) / 2 if level else 0.0
            x, y = _point(cx, cy, r_mid, mid)
            text = node.label if len(node.label) <= 18 else node.label[:17] + "…"
            labels.append(f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="10" '
                          f'text-anchor="middle" dominant-baseline="middle">{escape(text)}</text>')
        if node.value > 0 and node.children:
            start = a0
            for child in node.children:
                span = (a1 - a0) * child.value / node.value
                draw(child, level + 1, start, start + span,
                     color_for(child.label) if child.level == "resource" else color)
                start += span

    draw(tree, 0, -math.pi / 2, 3 * math.pi / 2, "#cccccc")
    out.extend(labels)
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def render_comparison(comparison: dict, style: Optional[dict] = None) -> bytes:
    """Bar chart of ``bar_value`` per resource on a [-1, 1] axis with a zero baseline.

    ``comparison`` is the JSON form written to ``report.json``.
    """
    style = {"width": 720, "height": 420, "margin": 60, **(style or {})}
    w, h, m = style["width"], style["height"], style["margin"]
    plot_h = h - 2 * m
    half = plot_h / 2
    base = m + half
    resources_ = list(comparison["resources"].items())
    slot = (w - 2 * m) / max(len(resources_), 1)
    title = " vs ".join(comparison["pair"])
    out = _svg_open(w, h, f"Comparative resource usage: {title}")
    out.append(f'<text x="{_f(w / 2)}" y="{_f(m / 2)}" font-family="sans-serif" font-size="14" '
               f'text-anchor="middle">{escape(title)}</text>')
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        y = base - tick * half
        out.append(f'<line x1="{_f(m)}" y1="{_f(y)}" x2="{_f(w - m)}" y2="{_f(y)}" '
                   f'stroke="{"#000000" if tick == 0 else "#dddddd"}" stroke-width="1"/>')
        out.append(f'<text x="{_f(m - 6)}" y="{_f(y)}" font-family="sans-serif" font-size="10" '
                   f'text-anchor="end" dominant-baseline="middle">{tick:+.1f}</text>')
    for i, (group, vals) in enumerate(resources_):
        value = vals["bar_value"] or 0.0
        value = max(-1.0, min(1.0, value))
        x = m + i * slot + slot * 0.15
        bw = slot * 0.7
        height = abs(value) * half
        y = base - height if value >= 0 else base
        out.append(f'<rect class="bar" x="{_f(x)}" y="{_f(y)}" width="{_f(bw)}" height="{_f(height)}" '
                   f'fill="{color_for(group)}" data-label={quoteattr(group)} data-value="{value!r}">'
                   f"<title>{escape(group)}: {value:+.3f}</title></rect>")
        out.append(f'<text x="{_f(x + bw / 2)}" y="{_f(h - m + 16)}" font-family="sans-serif" '
                   f'font-size="11" text-anchor="middle">{escape(group)}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def render_svg(obj, style: Optional[dict] = None) -> bytes:
    """Render a sunburst tree or a comparison (object or its JSON form)."""
    if isinstance(obj, SunburstNode):
        return render_sunburst(obj, style)
    if isinstance(obj, dict) and "level" in obj and "children" in obj:
        return render_sunburst(SunburstNode.from_dict(obj), style)
    if isinstance(obj, dict) and "resources" in obj:
        return render_comparison(obj, style)
    from .comparative import ComparativeResult

    if isinstance(obj, ComparativeResult):
        return render_comparison(comparison_to_dict(obj), style)
    raise TypeError(f"cannot render {type(obj).__name__}")


def comparison_to_dict(result) -> dict:
    return {
        "pair": list(result.pair_label),
        "rows": list(result.rows),
        "dropped_rows": result.dropped_rows,
        "dropped_columns": result.dropped_columns,
        "dt_scale": result.dt_scale,
        "resources": {
            g: {"neg_rsm": r.neg_rsm, "pos_rsm": r.pos_rsm, "rel_change": r.rel_change,
                "pct_change": r.pct_change, "bar_value": r.bar_value, "undefined": r.undefined}
            for g, r in result.per_resource.items()
        },
    }
