"""Hierarchy report serialization: canonical JSON and DOT diagrams."""

from __future__ import annotations

import json
from fractions import Fraction

from .hierarchy import DepthOrder, HierarchyReport
from .scale import ScaledQuantity, rational_str

SCHEMA_VERSION = 1

__all__ = ["report_to_dict", "dumps_report", "dumps_dot", "quantity_label"]


def _quantity(q):
    if isinstance(q, DepthOrder):
        return {"order": rational_str(q.order)}
    return {"coeff": rational_str(q.coeff), "order": rational_str(q.order)}


def quantity_label(q):
    """Human-facing label like '2*eps^-2'."""
    def short(f):
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    if isinstance(q, DepthOrder):
        return f"eps^{short(q.order)}"
    return f"{short(q.coeff)}*eps^{short(q.order)}"


def report_to_dict(report: HierarchyReport) -> dict:
    levels = []
    for level in report.levels:
        nu = len(level.metastates)
        rates = [[rational_str(level.limit_rates.get((i, j), Fraction(0)))
                  for j in range(nu)] for i in range(nu)]
        probs = [[rational_str(level.hit_prob[(i, j)])
                  if (i, j) in level.hit_prob else None
                  for j in range(nu)] for i in range(nu)]
        levels.append({
            "level": level.level,
            "theta": _quantity(level.theta),
            "metastates": [list(g) for g in level.metastates],
            "delta": list(level.delta),
            "depths": [_quantity(level.depths[i]) for i in range(nu)],
            "active": sorted(level.active),
            "lambda": [rational_str(level.lam[i]) for i in range(nu)],
            "p": probs,
            "rates": rates,
            "parents": [list(level.parent_map[i]) if level.level > 1 else None
                        for i in range(nu)],
            "notes": list(level.notes),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "fingerprint": report.fingerprint,
        "anchor": report.anchor,
        "depth_count": report.depth_count,
        "levels": levels,
        "terminal": [list(g) for g in report.terminal],
        "note": report.note,
    }


def dumps_report(report: HierarchyReport) -> str:
    return json.dumps(report_to_dict(report), indent=1) + "\n"


def _mu_order_label(metastate, mu):
    q = mu.mu[metastate[0]]
    return f"mu~eps^{q.order}"


def dumps_dot(report: HierarchyReport, mu=None) -> str:
    """One digraph per level plus a refinement tree across levels."""
    chunks = []
    for level in report.levels:
        nu = len(level.metastates)
        lines = [f"digraph level{level.level} {{",
                 f'  label="level {level.level}, theta = '
                 f'{quantity_label(level.theta)}";']
        for i, group in enumerate(level.metastates):
            name = ",".join(group)
            extra = ""
            if mu is not None:
                extra = f"\\n{_mu_order_label(group, mu)}"
            shape = "doublecircle" if i in level.active else "ellipse"
            lines.append(f'  n{level.level}_{i} [label="{{{name}}}{extra}" '
                         f'shape={shape}];')
        for (i, j), r in sorted(level.limit_rates.items()):
            if r:
                lines.append(f'  n{level.level}_{i} -> n{level.level}_{j} '
                             f'[label="{r}"];')
        lines.append("}")
        chunks.append("\n".join(lines))

    lines = ["digraph refinement {"]
    for level in report.levels:
        for i, group in enumerate(level.metastates):
            name = ",".join(group)
            lines.append(f'  n{level.level}_{i} [label="{{{name}}}"];')
        if level.level > 1:
            for i in range(len(level.metastates)):
                for parent in level.parent_map[i]:
                    lines.append(f'  n{level.level - 1}_{parent} -> '
                                 f'n{level.level}_{i};')
    lines.append("}")
    chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"
