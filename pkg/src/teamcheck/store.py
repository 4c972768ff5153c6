"""Event-sourced artifact storage organised as a hierarchy of work areas.

Artifacts are not stored as records. Each artifact is the sum of the
property changes visible from a work area: the work area's own changes,
then its parent's, and so on up to the public root. Private work areas keep
only the latest change per property; the public work area keeps the whole
history.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional

log = logging.getLogger(__name__)

PUBLIC = "public"
TYPE_PROPERTY = "type"

CREATE = "create"
UPDATE = "update"
DELETE = "delete"
CHANGE_TYPES = (CREATE, UPDATE, DELETE)

VALUE_KINDS = ("string", "integer", "real", "boolean", "link")
SINGLE = "single"
MANY = "many"

# origins reported by ResolvedValue
CONTEXT = "context"
GROUP = "group"
ANCESTOR = "hierarchy-ancestor"
PUBLIC_ORIGIN = "public"
ABSENT = "absent"


class StoreError(Exception):
    pass


class UnknownWorkArea(StoreError):
    pass


class UnknownGroup(StoreError):
    pass


class KindMismatch(StoreError):
    pass


@dataclass(frozen=True, order=True)
class Ref:
    """A link value: the identifier of another artifact."""

    id: str

    def __str__(self) -> str:
        return self.id


class _Tombstone:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "TOMBSTONE"

    def __reduce__(self):
        return (_Tombstone, ())


TOMBSTONE = _Tombstone()


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str = "string"
    cardinality: str = SINGLE

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.kind!r}")
        if self.cardinality not in (SINGLE, MANY):
            raise ValueError(f"unknown cardinality {self.cardinality!r}")

    @property
    def many(self) -> bool:
        return self.cardinality == MANY

    def spec(self) -> str:
        s = f"{self.name}:{self.kind}"
        return s + ":many" if self.many else s

    @classmethod
    def parse(cls, text: str) -> "FieldDecl":
        parts = text.split(":")
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        if len(parts) == 3 and parts[2] in (MANY, SINGLE):
            return cls(parts[0], parts[1], parts[2])
        raise ValueError(f"bad field declaration {text!r}")


@dataclass(frozen=True)
class TypeDecl:
    type_id: str
    name: str
    fields: tuple[FieldDecl, ...] = ()

    def field(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class Change:
    artifact_id: str
    property: str
    value: Any
    change_type: str
    timestamp: int
    work_area: str

    @property
    def live(self) -> bool:
        return self.change_type != DELETE

    @property
    def coordinate(self) -> tuple[str, str]:
        return (self.artifact_id, self.property)


@dataclass(frozen=True)
class ChangeEvent:
    change: Change
    sequence: int


@dataclass(frozen=True)
class Group:
    group_id: str
    members: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, wa: str) -> bool:
        return wa in self.members


@dataclass(frozen=True)
class ResolvedValue:
    value: Any
    origin: str
    source_work_area: Optional[str] = None
    source_timestamp: Optional[int] = None

    @property
    def absent(self) -> bool:
        return self.origin == ABSENT


NOT_FOUND = ResolvedValue(None, ABSENT)


@dataclass(eq=False)
class WorkArea:
    work_area_id: str
    parent: Optional[str]
    created_at: int
    label: Optional[str] = None
    # (artifact, property) -> Change for private areas, list[Change] for public
    changes: dict = field(default_factory=dict)
    # artifact -> property names with an entry here
    props: dict = field(default_factory=dict)

    @property
    def visibility(self) -> str:
        return "public" if self.parent is None else "private"

    @property
    def public(self) -> bool:
        return self.parent is None

    def local(self, coord: tuple[str, str]) -> Optional[Change]:
        entry = self.changes.get(coord)
        if entry is None:
            return None
        if self.parent is None:
            return entry[-1]
        return entry

    def history(self, coord: tuple[str, str]) -> list[Change]:
        entry = self.changes.get(coord)
        if entry is None:
            return []
        return list(entry) if self.parent is None else [entry]

    def entries(self) -> Iterator[Change]:
        """Latest local change for every coordinate, in coordinate order."""
        for coord in sorted(self.changes):
            yield self.local(coord)

    def _record(self, change: Change) -> None:
        coord = change.coordinate
        if self.parent is None:
            self.changes.setdefault(coord, []).append(change)
        else:
            self.changes[coord] = change
        self.props.setdefault(change.artifact_id, set()).add(change.property)

    def _clear(self) -> None:
        self.changes.clear()
        self.props.clear()

    def __len__(self) -> int:
        return len(self.changes)


class Store:
    """The artifact storage: work-area tree, groups, type declarations.

    All mutations go through this object. Events are delivered to
    subscribers in sequence order after the mutation that produced them.
    Writes made by a subscriber while an event is being delivered are
    applied at once; their events queue behind the current one.
    """

    def __init__(self):
        self.tick = 0
        self.sequence = 0
        self.work_areas: dict[str, WorkArea] = {PUBLIC: WorkArea(PUBLIC, None, 0, PUBLIC)}
        self.groups: dict[str, Group] = {}
        self.types: dict[str, TypeDecl] = {}
        self._types_by_id: dict[str, TypeDecl] = {}
        self._subscribers: list[Callable[[ChangeEvent], None]] = []
        self._commit_listeners: list[Callable] = []
        self._outbox: deque[ChangeEvent] = deque()
        self._dispatching = False
        self._wa_counter = 0
        # persistence journal, see teamcheck.changelog
        self.journal: list[tuple] = []
        self.journal.append(("workarea", PUBLIC, PUBLIC, None, 0))

    # -- subscription ---------------------------------------------------

    def subscribe(self, callback: Callable[[ChangeEvent], None]) -> None:
        self._subscribers.append(callback)

    def unsubscribe(self, callback) -> None:
        self._subscribers.remove(callback)

    def add_commit_listener(self, callback) -> None:
        """``callback(sources, target, events)`` runs after a commit is applied
        and before its events are delivered."""
        self._commit_listeners.append(callback)

    def _emit(self, events: list[ChangeEvent]) -> None:
        self._outbox.extend(events)
        if self._dispatching:
            return
        self._dispatching = True
        try:
            while self._outbox:
                event = self._outbox.popleft()
                for cb in list(self._subscribers):
                    cb(event)
        finally:
            self._dispatching = False
            self._outbox.clear()

    # -- work areas, groups, types ---------------------------------------

    @property
    def public(self) -> WorkArea:
        return self.work_areas[PUBLIC]

    def work_area(self, wa_id: str) -> WorkArea:
        try:
            return self.work_areas[wa_id]
        except KeyError:
            raise UnknownWorkArea(wa_id) from None

    def find_work_area(self, name: str) -> WorkArea:
        """Look a work area up by id or by label."""
        if name in self.work_areas:
            return self.work_areas[name]
        for wa in self.work_areas.values():
            if wa.label == name:
                return wa
        raise UnknownWorkArea(name)

    def create_work_area(self, parent: str = PUBLIC, label: Optional[str] = None,
                         work_area_id: Optional[str] = None) -> WorkArea:
        if parent not in self.work_areas:
            raise UnknownWorkArea(parent)
        if work_area_id is None:
            self._wa_counter += 1
            work_area_id = f"WA{self._wa_counter}"
            while work_area_id in self.work_areas:
                self._wa_counter += 1
                work_area_id = f"WA{self._wa_counter}"
        elif work_area_id in self.work_areas:
            raise StoreError(f"work area {work_area_id!r} already exists")
        if label is not None:
            for other in self.work_areas.values():
                if other.label == label:
                    raise StoreError(f"work area label {label!r} already in use")
        wa = WorkArea(work_area_id, parent, self.tick, label)
        self.work_areas[work_area_id] = wa
        self.journal.append(("workarea", work_area_id, label, parent, self.tick))
        return wa

    def ancestors(self, wa_id: str) -> list[str]:
        """Parent chain of *wa_id*, nearest first, ending with public."""
        chain = []
        wa = self.work_area(wa_id)
        while wa.parent is not None:
            chain.append(wa.parent)
            wa = self.work_areas[wa.parent]
        return chain

    def children(self, wa_id: str) -> list[str]:
        return sorted(w.work_area_id for w in self.work_areas.values() if w.parent == wa_id)

    def define_group(self, name: str, members: Iterable[str] = ()) -> Group:
        members = frozenset(members)
        for m in members:
            if m not in self.work_areas:
                raise UnknownWorkArea(m)
            if m == PUBLIC:
                raise StoreError("the public work area cannot be a group member")
        if name in self.groups:
            raise StoreError(f"group {name!r} already defined")
        group = Group(name, members)
        self.groups[name] = group
        self.journal.append(("group", name, tuple(sorted(members))))
        return group

    def group(self, group: "Group | str") -> Group:
        if isinstance(group, Group):
            return group
        try:
            return self.groups[group]
        except KeyError:
            raise UnknownGroup(group) from None

    def declare_type(self, name: str, fields: Iterable[FieldDecl] = (),
                     type_id: Optional[str] = None) -> TypeDecl:
        """Declare an artifact type and materialise it as a public artifact.

        The type artifact carries ``name`` and ``fields`` properties so rules
        can navigate ``self.type.name`` like any other link.
        """
        fields = tuple(fields)
        if name in self.types:
            raise StoreError(f"type {name!r} already declared")
        seen = set()
        for f in fields:
            if f.name == TYPE_PROPERTY:
                raise StoreError(f"field name {TYPE_PROPERTY!r} is reserved for the artifact type link")
            if f.name in seen:
                raise StoreError(f"duplicate field {f.name!r} in type {name!r}")
            seen.add(f.name)
        decl = TypeDecl(type_id or f"type:{name}", name, fields)
        if decl.type_id in self._types_by_id:
            raise StoreError(f"type id {decl.type_id!r} already in use")
        self._register_type(decl)
        self.journal.append(("type", decl))
        self.put(PUBLIC, decl.type_id, "name", name)
        self.put(PUBLIC, decl.type_id, "fields", tuple(f.spec() for f in fields))
        return decl

    def _register_type(self, decl: TypeDecl) -> None:
        self.types[decl.name] = decl
        self._types_by_id[decl.type_id] = decl

    def type_by_id(self, type_id: str) -> Optional[TypeDecl]:
        return self._types_by_id.get(type_id)

    def type_of(self, wa_id: str, artifact_id: str) -> Optional[TypeDecl]:
        value = self.resolve_property(wa_id, artifact_id, TYPE_PROPERTY).value
        if isinstance(value, Ref):
            return self._types_by_id.get(value.id)
        return None

    # -- mutation ---------------------------------------------------------

    def _next_tick(self) -> int:
        self.tick += 1
        return self.tick

    def _validate(self, wa_id: str, artifact_id: str, prop: str, value: Any) -> None:
        if prop == TYPE_PROPERTY:
            if not isinstance(value, Ref):
                raise KindMismatch(f"{artifact_id}.type must be a link")
            return
        decl = self.type_of(wa_id, artifact_id)
        if decl is None:
            return
        fd = decl.field(prop)
        if fd is None:
            return
        if fd.many:
            if not isinstance(value, tuple):
                raise KindMismatch(f"{artifact_id}.{prop} expects a list of {fd.kind}")
            items = value
        else:
            if isinstance(value, tuple):
                raise KindMismatch(f"{artifact_id}.{prop} expects a single {fd.kind}")
            items = (value,)
        for item in items:
            if value_kind(item) != fd.kind and not (fd.kind == "real" and value_kind(item) == "integer"):
                raise KindMismatch(
                    f"{artifact_id}.{prop} expects {fd.kind}, got {value_kind(item)}")

    def apply_change(self, wa_id: str, artifact_id: str, prop: str, value: Any,
                     change_type: str = UPDATE) -> ChangeEvent:
        wa = self.work_area(wa_id)
        if change_type not in CHANGE_TYPES:
            raise StoreError(f"unknown change type {change_type!r}")
        if change_type == DELETE:
            if value is not None and value is not TOMBSTONE:
                raise StoreError("a delete carries no value")
            value = TOMBSTONE
        else:
            if value is None or value is TOMBSTONE:
                raise StoreError("create/update needs a value")
            if isinstance(value, list):
                value = tuple(value)
            self._validate(wa_id, artifact_id, prop, value)
            if change_type == CREATE:
                prior = wa.local((artifact_id, prop))
                if prior is not None and prior.live:
                    raise StoreError(
                        f"create of live property {artifact_id}.{prop} in {wa_id}")
        change = Change(artifact_id, prop, value, change_type, self._next_tick(), wa_id)
        wa._record(change)
        event = self._journal_change(change)
        self._emit([event])
        return event

    def _journal_change(self, change: Change) -> ChangeEvent:
        self.sequence += 1
        event = ChangeEvent(change, self.sequence)
        self.journal.append(("change", event))
        return event

    def put(self, wa_id: str, artifact_id: str, prop: str, value: Any) -> ChangeEvent:
        """Create or update, depending on whether the property is live locally."""
        prior = self.work_area(wa_id).local((artifact_id, prop))
        ct = UPDATE if prior is not None and prior.live else CREATE
        return self.apply_change(wa_id, artifact_id, prop, value, ct)

    def delete(self, wa_id: str, artifact_id: str, prop: str) -> ChangeEvent:
        return self.apply_change(wa_id, artifact_id, prop, None, DELETE)

    def create_artifact(self, wa_id: str, artifact_id: str, type_name: str) -> ChangeEvent:
        """Create an artifact by writing its ``type`` link."""
        try:
            decl = self.types[type_name]
        except KeyError:
            raise StoreError(f"unknown type {type_name!r}") from None
        return self.apply_change(wa_id, artifact_id, TYPE_PROPERTY, Ref(decl.type_id), CREATE)

    def _restamp(self, target: WorkArea, src: Change) -> Change:
        prior = target.local(src.coordinate)
        if not src.live:
            ct = DELETE
        elif prior is not None and prior.live:
            ct = UPDATE
        else:
            ct = CREATE
        change = Change(src.artifact_id, src.property, src.value, ct,
                        self._next_tick(), target.work_area_id)
        target._record(change)
        return change

    def commit(self, wa_id: str) -> list[ChangeEvent]:
        """Push every change of a private work area into its parent."""
        wa = self.work_area(wa_id)
        if wa.public:
            raise StoreError("the public work area has no parent to commit to")
        parent = self.work_areas[wa.parent]
        staged = list(wa.entries())
        return self._publish([wa], parent, staged)

    def commit_group(self, group: "Group | str") -> list[ChangeEvent]:
        """Stage all member changes (latest timestamp wins) and publish them
        to the public work area as one batch."""
        group = self.group(group)
        if not group.members:
            raise StoreError("cannot bulk-commit an empty group")
        staging: dict[tuple[str, str], Change] = {}
        for m in sorted(group.members):
            for ch in self.work_area(m).entries():
                cur = staging.get(ch.coordinate)
                if cur is None or ch.timestamp > cur.timestamp:
                    staging[ch.coordinate] = ch
        staged = [staging[c] for c in sorted(staging)]
        sources = [self.work_areas[m] for m in sorted(group.members)]
        return self._publish(sources, self.public, staged)

    def _publish(self, sources: list[WorkArea], target: WorkArea,
                 staged: list[Change]) -> list[ChangeEvent]:
        for src in sources:
            src._clear()
            self.journal.append(("clear", src.work_area_id))
        events = [self._journal_change(self._restamp(target, ch)) for ch in staged]
        src_ids = [s.work_area_id for s in sources]
        for cb in list(self._commit_listeners):
            cb(src_ids, target.work_area_id, events)
        self._emit(events)
        return events

    # -- resolution --------------------------------------------------------

    def locate(self, ctx: str, artifact_id: str, prop: str,
               group: Optional[Group] = None) -> tuple[Optional[Change], str]:
        """Find the change that determines a property from *ctx*'s view.

        Returns the deciding change (possibly a tombstone) and the search
        step that found it: context, group, or an ancestor/public.
        """
        coord = (artifact_id, prop)
        wa = self.work_area(ctx)
        ch = wa.local(coord)
        if ch is not None:
            return ch, CONTEXT
        if group is not None and group.members:
            best = None
            for m in group.members:
                if m == ctx:
                    continue
                cand = self.work_areas[m].local(coord)
                if cand is not None and (best is None or cand.timestamp > best.timestamp):
                    best = cand
            if best is not None:
                return best, GROUP
        while wa.parent is not None:
            wa = self.work_areas[wa.parent]
            ch = wa.local(coord)
            if ch is not None:
                return ch, PUBLIC_ORIGIN if wa.parent is None else ANCESTOR
        return None, ABSENT

    def _resolved(self, found: tuple[Optional[Change], str]) -> ResolvedValue:
        ch, origin = found
        if ch is None:
            return NOT_FOUND
        if not ch.live:
            return ResolvedValue(None, ABSENT, ch.work_area, ch.timestamp)
        return ResolvedValue(ch.value, origin, ch.work_area, ch.timestamp)

    def resolve(self, ctx: str, artifact_id: str, prop: str,
                group: Optional[Group] = None) -> ResolvedValue:
        """Grouped resolution when *group* is given, hierarchical otherwise."""
        return self._resolved(self.locate(ctx, artifact_id, prop, group))

    def resolve_property(self, wa_id: str, artifact_id: str, prop: str) -> ResolvedValue:
        return self._resolved(self.locate(wa_id, artifact_id, prop))

    def resolve_property_grouped(self, ctx: str, group: "Group | str",
                                 artifact_id: str, prop: str) -> ResolvedValue:
        return self._resolved(self.locate(ctx, artifact_id, prop, self.group(group)))

    def reachable(self, ctx: str, group: Optional[Group] = None) -> list[str]:
        """Work areas consulted from *ctx*: itself, group members, ancestors."""
        out = [ctx]
        if group is not None:
            out += sorted(m for m in group.members if m != ctx and m not in out)
        out += [a for a in self.ancestors(ctx) if a not in out]
        return out

    def materialize_artifact(self, ctx: str, artifact_id: str,
                             group: "Group | str | None" = None) -> dict[str, ResolvedValue]:
        """Resolve every property ever written for an artifact from *ctx*."""
        group = self.group(group) if group is not None else None
        names: set[str] = set()
        for wa_id in self.reachable(ctx, group):
            names |= self.work_areas[wa_id].props.get(artifact_id, set())
        if not names:
            raise StoreError(f"artifact {artifact_id!r} unknown from {ctx}")
        out = {}
        for name in sorted(names):
            rv = self._resolved(self.locate(ctx, artifact_id, name, group))
            if not rv.absent:
                out[name] = rv
        return out

    def artifacts(self, wa_id: str) -> list[str]:
        """Artifacts with at least one local entry in the work area."""
        return sorted(self.work_area(wa_id).props)

    def local_types(self, wa_id: str) -> Iterator[tuple[str, TypeDecl]]:
        """Artifacts whose ``type`` is set (live) locally in *wa_id*."""
        wa = self.work_area(wa_id)
        for aid in sorted(wa.props):
            ch = wa.local((aid, TYPE_PROPERTY))
            if ch is not None and ch.live and isinstance(ch.value, Ref):
                decl = self._types_by_id.get(ch.value.id)
                if decl is not None:
                    yield aid, decl


def value_kind(value: Any) -> str:
    if value is TOMBSTONE or value is None:
        return "none"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "real"
    if isinstance(value, Ref):
        return "link"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"unsupported property value {value!r}")
