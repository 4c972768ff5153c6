"""Figures for replay metrics."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .replay.runner import ReplayMetrics  # noqa: E402

COLORS = {"context": "#4c72b0", "group": "#dd8452", "public": "#8c8c8c"}


def access_figure(rows: Sequence[ReplayMetrics], path, title: str = "Property accesses per replay"):
    """Stacked bars of context, group and public accesses, one per replay,
    with the context/group split annotated on top. Returns the written path."""
    if not rows:
        raise ValueError("nothing to plot")
    path = Path(path)
    names = [m.name for m in rows]
    ctx = [m.context_accesses for m in rows]
    grp = [m.group_accesses for m in rows]
    pub = [m.public_accesses for m in rows]
    x = range(len(rows))

    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(rows) + 2), 3.6))
    ax.bar(x, ctx, color=COLORS["context"], label="context")
    ax.bar(x, grp, bottom=ctx, color=COLORS["group"], label="group")
    ax.bar(x, pub, bottom=[c + g for c, g in zip(ctx, grp)], color=COLORS["public"], label="public")
    for i, m in enumerate(rows):
        top = m.context_accesses + m.group_accesses + m.public_accesses
        ax.annotate(f"{m.context_pct:.1f}/{m.group_pct:.1f}", (i, top), ha="center", va="bottom",
                    fontsize=8, xytext=(0, 2), textcoords="offset points")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=30 if len(rows) > 4 else 0, ha="right" if len(rows) > 4 else "center")
    ax.set_ylabel("accesses")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
