"""Render replay metrics as a fixed-width table or CSV."""

from __future__ import annotations

import csv
import io
from typing import Iterable

from .runner import ReplayMetrics

# (header, attribute, is_percentage)
COLUMNS = [
    ("Project", "name", False),
    ("Model Elements", "model_elements", False),
    ("Total Commands", "total_commands", False),
    ("Creation Commands", "creation_commands", False),
    ("Update Commands", "update_commands", False),
    ("Rule Evaluations", "rule_evaluations", False),
    ("Context Accesses", "context_accesses", False),
    ("Group Accesses", "group_accesses", False),
    ("Context %", "context_pct", True),
    ("Group %", "group_pct", True),
    ("Public Accesses", "public_accesses", False),
    ("Evaluation Time (ms)", "wall_time_ms", False),
]
TIME_COLUMN = "wall_time_ms"


def _columns(timing: bool):
    return [c for c in COLUMNS if timing or c[1] != TIME_COLUMN]


def _cell(m: ReplayMetrics, attr: str, pct: bool) -> str:
    v = getattr(m, attr)
    if pct:
        return f"{v:.2f}"
    if attr == TIME_COLUMN:
        return f"{v:.1f}"
    return str(v)


def render_csv(rows: Iterable[ReplayMetrics], timing: bool = True) -> str:
    cols = _columns(timing)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([c[0] for c in cols])
    for m in rows:
        w.writerow([_cell(m, attr, pct) for _, attr, pct in cols])
    return buf.getvalue()


def render_table(rows: Iterable[ReplayMetrics], timing: bool = True) -> str:
    cols = _columns(timing)
    body = [[_cell(m, attr, pct) for _, attr, pct in cols] for m in rows]
    widths = [max([len(c[0])] + [len(r[i]) for r in body]) for i, c in enumerate(cols)]

    def line(cells):
        out = [cells[0].ljust(widths[0])]
        out += [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(out).rstrip()

    lines = [line([c[0] for c in cols]), "  ".join("-" * w for w in widths)]
    lines += [line(r) for r in body]
    return "\n".join(lines) + "\n"


def report(rows: Iterable[ReplayMetrics], fmt: str = "table", timing: bool = True) -> str:
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to report")
    if fmt == "csv":
        return render_csv(rows, timing)
    if fmt == "table":
        return render_table(rows, timing)
    raise ValueError(f"unknown report format {fmt!r}")


def parse_csv(text: str) -> list[ReplayMetrics]:
    """Read a CSV report back. Columns missing from the report keep their
    defaults; derived fields that were not exported are zero."""
    by_header = {c[0]: c for c in COLUMNS}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {"public_pct": 0.0}
        for header, raw in rec.items():
            _, attr, pct = by_header[header]
            if attr == "name":
                kw[attr] = raw
            elif pct or attr == TIME_COLUMN:
                kw[attr] = float(raw)
            else:
                kw[attr] = int(raw)
        kw.setdefault(TIME_COLUMN, 0.0)
        out.append(ReplayMetrics(**kw))
    return out
