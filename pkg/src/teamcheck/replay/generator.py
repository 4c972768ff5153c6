"""Deterministic synthetic UML-style corpora.

Stands in for real model files. Elements are spread over partitions (one
per engineer); ``link_density`` is the probability that a link points into
another partition, which is what makes group accesses necessary.
"""

from __future__ import annotations

import random
from typing import Optional

from ..store import FieldDecl, TypeDecl
from .corpus import CorpusModel, Element, bundled_types

# share of each element kind, summing to 1
MIX = [
    ("uml:Class", "C", 0.18),
    ("uml:Interface", "I", 0.07),
    ("uml:Operation", "O", 0.22),
    ("uml:Parameter", "P", 0.25),
    ("uml:Property", "F", 0.12),
    ("uml:Lifeline", "L", 0.06),
    ("uml:Message", "M", 0.05),
    ("uml:Transition", "T", 0.05),
]

# free-text attributes used to reach an exact command count
OPTIONAL_FIELDS = ("documentation", "stereotype", "alias", "author", "status",
                   "version", "keywords", "note")

_OP_NAMES = ("open", "close", "grab", "release", "move", "rotate", "stop", "reset",
             "calibrate", "read", "write", "lock", "unlock", "home", "scan", "report")
_DATA_TYPES = ("int", "float", "string", "bool", "Pose", "Angle")


def corpus_types() -> list[TypeDecl]:
    out = []
    for t in bundled_types():
        extra = tuple(FieldDecl(n) for n in OPTIONAL_FIELDS if t.field(n) is None)
        out.append(TypeDecl(t.type_id, t.name, t.fields + extra))
    return out


def _quotas(n: int) -> dict[str, int]:
    if n >= len(MIX):
        base = {name: 1 for name, _, _ in MIX}
        rest = n - len(MIX)
    else:
        base = {name: 0 for name, _, _ in MIX}
        rest = n
    raw = [(name, share * rest) for name, _, share in MIX]
    counts = {name: int(v) for name, v in raw}
    left = rest - sum(counts.values())
    by_frac = sorted(raw, key=lambda kv: (-(kv[1] - int(kv[1])), kv[0]))
    for name, _ in by_frac[:left]:
        counts[name] += 1
    return {k: base[k] + counts[k] for k in base}


class _Builder:
    def __init__(self, rng: random.Random, n_partitions: int, density: float, violations: float):
        self.rng = rng
        self.density = density
        self.violations = violations
        self.labels = [f"p{i + 1}" for i in range(n_partitions)]
        self.elements: list[Element] = []
        self.by_type: dict[str, list[Element]] = {}

    def pick(self, type_name: str, near: Element) -> Optional[Element]:
        pool = self.by_type.get(type_name, [])
        same = [e for e in pool if e.partition == near.partition and e is not near]
        other = [e for e in pool if e.partition != near.partition]
        cross = self.density > 0 and self.rng.random() < self.density
        cands = other if cross else same
        if not cands and self.density > 0:
            cands = same or other
        return self.rng.choice(cands) if cands else None

    def link(self, src: Element, name: str, dst: Optional[Element]) -> None:
        if dst is not None:
            src.links.setdefault(name, []).append(dst.element_id)

    def bad(self) -> bool:
        return self.rng.random() < self.violations


def generate_corpus(seed: int, n_elements: int, n_partitions: int, link_density: float,
                    commands: Optional[int] = None, violation_rate: float = 0.05) -> CorpusModel:
    """Build a corpus; with ``commands`` the attribute count is padded so the
    command stream has exactly that many commands."""
    if n_partitions < 1 or n_elements < n_partitions:
        raise ValueError("need n_elements >= n_partitions >= 1")
    if not 0.0 <= link_density <= 1.0:
        raise ValueError("link_density must be in [0, 1]")
    rng = random.Random(seed)
    b = _Builder(rng, n_partitions, link_density, violation_rate)

    quotas = _quotas(n_elements)
    order = []
    for type_name, prefix, _ in MIX:
        order += [(type_name, f"{prefix}{i + 1}") for i in range(quotas[type_name])]
    # every partition gets at least one element
    parts = [b.labels[i % n_partitions] for i in range(n_elements)]
    rng.shuffle(parts)
    for (type_name, eid), part in zip(order, parts):
        el = Element(eid, type_name, part)
        b.elements.append(el)
        b.by_type.setdefault(type_name, []).append(el)

    T = b.by_type.get
    for i, c in enumerate(T("uml:Class", [])):
        c.attributes["name"] = f"Class{i + 1}"
        c.attributes["visibility"] = "public"
    for i, it in enumerate(T("uml:Interface", [])):
        it.attributes["name"] = f"IFace{i + 1}"
        it.attributes["visibility"] = "public"
        b.link(it, "generalizations", b.pick("uml:Interface", it) if rng.random() < 0.4 else None)
        if b.bad():
            b.link(it, "generalizations", b.pick("uml:Interface", it))

    owners_names: dict[str, list[str]] = {}
    for op in T("uml:Operation", []):
        owner_type = "uml:Interface" if rng.random() < 0.25 and T("uml:Interface") else "uml:Class"
        owner = b.pick(owner_type, op)
        used = owners_names.setdefault(owner.element_id if owner else "", [])
        if used and b.bad():
            name = rng.choice(used)
        else:
            name = f"{rng.choice(_OP_NAMES)}{len(used) + 1}"
        used.append(name)
        op.attributes["name"] = name
        visible = "public"
        if owner is not None and owner.type_name == "uml:Interface" and b.bad():
            visible = "private"
        op.attributes["visibility"] = visible
        b.link(owner, "operations", op) if owner else None

    ops = T("uml:Operation", [])
    for i, p in enumerate(T("uml:Parameter", [])):
        op = b.pick("uml:Operation", p)
        p.attributes["dataType"] = rng.choice(_DATA_TYPES)
        if op is None:
            p.attributes["name"] = f"arg{i + 1}"
            p.attributes["direction"] = "in"
            continue
        has_ret = bool(op.links.get("returnParams"))
        if (not has_ret and rng.random() < 0.25) or (has_ret and b.bad()):
            p.attributes["name"] = "result"
            p.attributes["direction"] = "return"
            b.link(op, "returnParams", p)
            continue
        n = len(op.links.get("params", []))
        name = f"arg{n}" if n and b.bad() else f"arg{n + 1}"
        p.attributes["name"] = name
        p.attributes["direction"] = "in"
        b.link(op, "params", p)

    for i, f in enumerate(T("uml:Property", [])):
        owner = b.pick("uml:Class", f)
        f.attributes["name"] = f"field{i + 1}"
        f.attributes["dataType"] = rng.choice(_DATA_TYPES)
        f.attributes["visibility"] = "private"
        if owner is not None:
            existing = [b_el for b_el in owner.links.get("fields", [])]
            if existing and b.bad():
                f.attributes["name"] = next(e.attributes["name"] for e in T("uml:Property")
                                            if e.element_id == existing[0])
            b.link(owner, "fields", f)
        if b.bad() and T("uml:Interface"):
            b.link(b.pick("uml:Interface", f), "attributes", f)

    def ops_of(cls: Optional[Element]) -> list[str]:
        if cls is None:
            return []
        ids = set(cls.links.get("operations", []))
        return [o.attributes["name"] for o in ops if o.element_id in ids]

    lifelines = T("uml:Lifeline", [])
    for i, ll in enumerate(lifelines):
        ll.attributes["name"] = f"lifeline{i + 1}"
        if not b.bad():
            b.link(ll, "class", b.pick("uml:Class", ll))
    for i, m in enumerate(T("uml:Message", [])):
        m.attributes["name"] = f"msg{i + 1}"
        recv = b.pick("uml:Lifeline", m)
        b.link(m, "receiver", recv)
        cls = None
        if recv is not None and recv.links.get("class"):
            cls = next(c for c in T("uml:Class") if c.element_id == recv.links["class"][0])
        names = ops_of(cls)
        m.attributes["action"] = rng.choice(names) if names and not b.bad() else f"undefined{i + 1}"
    for i, t in enumerate(T("uml:Transition", [])):
        t.attributes["name"] = f"tr{i + 1}"
        owner = b.pick("uml:Class", t)
        b.link(t, "owner", owner)
        names = ops_of(owner)
        t.attributes["action"] = rng.choice(names) if names and not b.bad() else f"undefined{i + 1}"
        if not b.bad():
            b.link(t, "message", b.pick("uml:Message", t))

    for c in T("uml:Class", []):
        if rng.random() < 0.3:
            b.link(c, "generalizations", b.pick("uml:Class", c))

    # single-valued links hold at most one target
    for el in b.elements:
        for name in ("class", "receiver", "owner", "message"):
            if name in el.links:
                el.links[name] = el.links[name][:1]

    model = CorpusModel(corpus_types(), b.elements)
    if commands is not None:
        _pad(model, commands)
    return model


def command_count(model: CorpusModel) -> int:
    return (len(model.elements) + sum(len(e.attributes) for e in model.elements)
            + model.link_count)


def _pad(model: CorpusModel, target: int) -> None:
    budget = target - command_count(model)
    if budget < 0:
        raise ValueError(f"corpus needs at least {command_count(model)} commands, asked for {target}")
    if budget > len(OPTIONAL_FIELDS) * len(model.elements):
        raise ValueError(f"cannot pad corpus to {target} commands")
    k = 0
    while budget:
        for el in model.elements:
            if not budget:
                break
            name = OPTIONAL_FIELDS[k]
            if name not in el.attributes:
                el.attributes[name] = f"{name} of {el.element_id}"
                budget -= 1
        k += 1
