"""Turn a corpus into store commands and replay them through a live engine."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from ..batch import batch_check
from ..engine import Engine
from ..rules.catalog import CatalogRule
from ..store import PUBLIC, UPDATE, Ref, Store, TypeDecl
from .corpus import CorpusModel

CREATION = "create"


class ReplayError(Exception):
    pass


@dataclass(frozen=True)
class Command:
    work_area: str          # partition label
    artifact_id: str
    prop: str
    value: Any
    kind: str = UPDATE      # CREATION carries the type name as value

    @property
    def creation(self) -> bool:
        return self.kind == CREATION


@dataclass
class CommandStream:
    commands: list[Command]
    types: list[TypeDecl]
    partitions: list[str]

    @property
    def creation_count(self) -> int:
        return sum(1 for c in self.commands if c.creation)

    @property
    def update_count(self) -> int:
        return len(self.commands) - self.creation_count

    def __len__(self) -> int:
        return len(self.commands)


def to_commands(model: CorpusModel) -> CommandStream:
    """One creation per element, then one update per attribute and per link
    entry. A many-valued link grows one target at a time."""
    creations, updates = [], []
    for el in model.elements:
        creations.append(Command(el.partition, el.element_id, "type", el.type_name, CREATION))
    for el in model.elements:
        decl = model.type(el.type_name)
        for name, value in el.attributes.items():
            updates.append(Command(el.partition, el.element_id, name, value))
        for name, targets in el.links.items():
            fd = decl.field(name) if decl else None
            many = fd.many if fd is not None else len(targets) > 1
            for i, t in enumerate(targets):
                value = tuple(Ref(x) for x in targets[:i + 1]) if many else Ref(t)
                updates.append(Command(el.partition, el.element_id, name, value))
    return CommandStream(creations + updates, list(model.types), list(model.partitions))


@dataclass
class ReplayMetrics:
    name: str
    model_elements: int
    total_commands: int
    creation_commands: int
    update_commands: int
    rule_evaluations: int
    context_accesses: int
    group_accesses: int
    public_accesses: int
    context_pct: float
    group_pct: float
    public_pct: float
    wall_time_ms: float = 0.0
    failing: int = 0


@dataclass
class ReplayResult:
    metrics: ReplayMetrics
    store: Store
    engine: Engine
    mismatches: list = field(default_factory=list)


def _pct(part: int, whole: int) -> float:
    return round(100.0 * part / whole, 2) if whole else 0.0


def run_replay(stream: CommandStream, catalog: Iterable[CatalogRule],
               group_spec: Optional[Sequence[str]] = None, name: str = "replay",
               verify: bool = False) -> ReplayResult:
    """Replay a command stream into a fresh store.

    Each partition becomes a private work area under public. With
    ``group_spec`` (partition labels) the engine runs in group mode over
    those work areas, otherwise along the hierarchy.
    """
    store = Store()
    for t in stream.types:
        store.declare_type(t.name, t.fields, t.type_id)
    for cmd in stream.commands:
        if cmd.creation and cmd.value not in store.types:
            store.declare_type(cmd.value)      # element type without a TYPE section
    ids = {}
    for label in stream.partitions:
        ids[label] = store.create_work_area(PUBLIC, label=label).work_area_id
    group = None
    if group_spec:
        missing = [g for g in group_spec if g not in ids]
        if missing:
            raise ReplayError(f"unknown partition label(s): {', '.join(missing)}")
        group = store.define_group("replay", [ids[g] for g in group_spec])
    engine = Engine(store, group)
    # rules for types the corpus never declares have no instances
    engine.register_catalog([r for r in catalog if r.type_name in store.types])
    engine.tally = type(engine.tally)()   # count the replay only

    started = time.perf_counter()
    for cmd in stream.commands:
        wa = ids.get(cmd.work_area)
        if wa is None:
            raise ReplayError(f"command for undeclared work area {cmd.work_area!r}")
        if cmd.creation:
            store.create_artifact(wa, cmd.artifact_id, cmd.value)
        else:
            store.put(wa, cmd.artifact_id, cmd.prop, cmd.value)
    wall = (time.perf_counter() - started) * 1000.0

    tally = engine.tally
    ctx_pct, grp_pct = tally.percentages()
    verdicts = engine.verdicts(group)
    metrics = ReplayMetrics(
        name=name,
        model_elements=stream.creation_count,
        total_commands=len(stream),
        creation_commands=stream.creation_count,
        update_commands=stream.update_count,
        rule_evaluations=tally.rule_evaluations,
        context_accesses=tally.context_accesses,
        group_accesses=tally.group_accesses,
        public_accesses=tally.public_accesses,
        context_pct=round(ctx_pct, 2),
        group_pct=round(grp_pct, 2),
        public_pct=_pct(tally.public_accesses, tally.total),
        wall_time_ms=round(wall, 3),
        failing=sum(1 for v in verdicts.values() if v is False),
    )
    result = ReplayResult(metrics, store, engine)
    if verify:
        expected = batch_check(store, engine.crds.values(), group)
        result.mismatches = sorted(
            k for k in set(expected) | set(verdicts)
            if (expected.get(k) if expected.get(k) != "error" else None) != verdicts.get(k))
    return result
