"""Timeline exports: usage-type frequency/probability tables per interval as
CSV, JSON, or a stacked-bar SVG with one representative context per type.

The three formats carry exactly the same numbers; the SVG is a convenience
renderer over the same table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clustering import IntervalDistribution, UsageTypeModel, interval_distributions
from .store import UsageBundle

# colour-blind-safe cycle, repeated if a word has more than 10 usage types
PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee",
    "#aa3377", "#bbbbbb", "#994455", "#997700", "#004488",
)


@dataclass
class TimelineTable:
    word: str
    k: int
    intervals: list[int]
    freq: np.ndarray        # T x K ints
    prob: list[list[float] | None]
    representatives: list[str | None]


def representative_usage(bundle: UsageBundle, model: UsageTypeModel, usage_type: int) -> int:
    """Index of the usage closest to the type's centroid (standardised space)."""
    members = np.flatnonzero(model.assignments == usage_type)
    if members.size == 0:
        raise ValueError(f"usage type {usage_type} has no members")
    z = model.transform(bundle.vectors[members])
    diff = z - model.centroids[usage_type]
    return int(members[np.argmin(np.einsum("nd,nd->n", diff, diff))])


def timeline_table(bundle: UsageBundle, model: UsageTypeModel) -> TimelineTable:
    dists = interval_distributions(bundle, model)
    reps: list[str | None] = []
    for usage_type in range(model.k):
        if bundle.contexts is None:
            reps.append(None)
        else:
            reps.append(bundle.contexts[representative_usage(bundle, model, usage_type)])
    return TimelineTable(
        word=bundle.word,
        k=model.k,
        intervals=[d.interval for d in dists],
        freq=np.stack([d.freq for d in dists]),
        prob=[None if d.is_empty else d.prob.tolist() for d in dists],
        representatives=reps,
    )


def render_csv(table: TimelineTable, config: dict) -> str:
    lines = ["# config: " + json.dumps(config, sort_keys=True, separators=(",", ":"))]
    header = (
        ["interval"]
        + [f"freq_{k}" for k in range(table.k)]
        + [f"prob_{k}" for k in range(table.k)]
    )
    lines.append(",".join(header))
    for i, interval in enumerate(table.intervals):
        cells = [str(interval)] + [str(int(c)) for c in table.freq[i]]
        if table.prob[i] is None:
            cells += [""] * table.k
        else:
            cells += [repr(p) for p in table.prob[i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_json(table: TimelineTable, config: dict) -> str:
    doc = {
        "word": table.word,
        "k": table.k,
        "intervals": table.intervals,
        "freq": table.freq.tolist(),
        "prob": table.prob,
        "representatives": table.representatives,
        "config": config,
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def render_svg(table: TimelineTable, config: dict) -> str:
    """Stacked-bar timeline: one column per interval, one band per usage type.

    Band heights are cumulative fractions of the column height, so each
    non-empty column sums exactly to the full bar height.
    """
    bar_w, bar_gap, bar_h = 46, 10, 260
    margin_left, margin_top, axis_h = 50, 20, 40
    legend_w = 380
    chart_w = len(table.intervals) * (bar_w + bar_gap)
    width = margin_left + chart_w + legend_w
    height = margin_top + bar_h + axis_h + max(0, table.k - 8) * 22

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        "<metadata>" + _esc(json.dumps(config, sort_keys=True, separators=(",", ":"))) + "</metadata>",
        f'<text x="{margin_left}" y="14" font-family="sans-serif" font-size="13" font-weight="bold">'
        f"{_esc(table.word)}: usage-type timeline</text>",
    ]
    for i, interval in enumerate(table.intervals):
        x = margin_left + i * (bar_w + bar_gap)
        prob = table.prob[i]
        if prob is not None:
            cumulative = 0.0
            for usage_type in range(table.k):
                frac = prob[usage_type]
                y_top = margin_top + bar_h * (1.0 - cumulative - frac)
                h = bar_h * frac
                cumulative += frac
                if h <= 0.0:
                    continue
                colour = PALETTE[usage_type % len(PALETTE)]
                parts.append(
                    f'<rect x="{x}" y="{y_top:.4f}" width="{bar_w}" height="{h:.4f}" '
                    f'fill="{colour}"><title>type {usage_type}: {prob[usage_type]!r}'
                    f"</title></rect>"
                )
        else:
            parts.append(
                f'<rect x="{x}" y="{margin_top}" width="{bar_w}" height="{bar_h}" '
                f'fill="none" stroke="#999" stroke-dasharray="4 3"/>'
            )
        parts.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{margin_top + bar_h + 16}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{interval}</text>'
        )
    legend_x = margin_left + chart_w + 20
    for usage_type in range(table.k):
        y = margin_top + 10 + usage_type * 22
        colour = PALETTE[usage_type % len(PALETTE)]
        rep = table.representatives[usage_type]
        label = f"type {usage_type}"
        if rep:
            snippet = rep if len(rep) <= 58 else rep[:55] + "..."
            label += f": {snippet}"
        parts.append(f'<rect x="{legend_x}" y="{y - 9}" width="12" height="12" fill="{colour}"/>')
        parts.append(
            f'<text x="{legend_x + 18}" y="{y + 1}" font-family="sans-serif" font-size="10">'
            f"{_esc(label)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


RENDERERS = {"csv": render_csv, "json": render_json, "svg": render_svg}


def export_timeline(
    bundle: UsageBundle, model: UsageTypeModel, fmt: str, config: dict
) -> str:
    if fmt not in RENDERERS:
        raise ValueError(f"format must be one of {sorted(RENDERERS)}, got {fmt!r}")
    return RENDERERS[fmt](timeline_table(bundle, model), config)
