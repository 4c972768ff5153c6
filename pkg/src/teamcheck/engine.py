"""Incremental consistency checking on top of a :class:`~teamcheck.store.Store`.

The engine subscribes to the store's change events. Rule definitions (CRDs)
and their per-artifact instantiations (CREs) are themselves artifacts in the
store: a CRE's verdicts are ordinary properties written into the work area
the CRE lives in, so they version and commit like everything else.

A CRE lives in every work area that holds a live local ``type`` change for
its subject. It is always evaluated from the perspective of that home work
area, either along the hierarchy or, in group mode, group-first.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .rules import RuleAst, RuleEvaluationError, Scope, evaluate, parse_rule
from .rules.catalog import CatalogRule
from .store import (
    PUBLIC, TYPE_PROPERTY, Change, ChangeEvent, FieldDecl, Group, Ref,
    ResolvedValue, Store, StoreError,
)

log = logging.getLogger(__name__)

CRD_TYPE = "cc:CRD"
CRE_TYPE = "cc:CRE"
CRD_PREFIX = "crd:"
CRE_PREFIX = "cre:"
RESULT = "result"
GROUP_RESULT = "groupResult:"

HIERARCHY = "hierarchy"


class EngineError(Exception):
    pass


def cre_id_for(rule_id: str, subject: str) -> str:
    return f"{CRE_PREFIX}{rule_id}:{subject}"


def result_property(group: Optional[Group]) -> str:
    return RESULT if group is None else GROUP_RESULT + group.group_id


def mode_label(group: Optional[Group]) -> str:
    return HIERARCHY if group is None else f"group({group.group_id})"


def is_engine_artifact(artifact_id: str) -> bool:
    return artifact_id.startswith(CRE_PREFIX) or artifact_id.startswith(CRD_PREFIX)


@dataclass(frozen=True)
class CRD:
    crd_id: str
    rule_id: str
    type_name: str
    type_id: str
    text: str
    ast: RuleAst


@dataclass(eq=False)
class CRE:
    cre_id: str
    crd: CRD
    subject: str
    home: str
    scope: Scope = field(default_factory=Scope)

    @property
    def key(self) -> tuple[str, str]:
        return (self.cre_id, self.home)


@dataclass(frozen=True)
class Feedback:
    sequence: int
    cre: str
    subject: str
    crd: str
    rule_id: str
    work_area: str
    new_result: bool
    previous_result: Optional[bool]
    mode: str
    trigger: Optional[Change] = None

    def short(self) -> str:
        line = f"{self.rule_id} {self.subject} {'hold' if self.new_result else 'break'}"
        return line if self.mode == HIERARCHY else f"{line} {self.mode}"

    def line(self) -> str:
        def word(v):
            return "none" if v is None else ("hold" if v else "break")
        t = self.trigger
        where = "-" if t is None else f"{t.work_area}:{t.artifact_id}.{t.property}@{t.timestamp}"
        return "\t".join([str(self.sequence), self.cre, self.subject, self.crd,
                          f"{word(self.previous_result)}->{word(self.new_result)}",
                          self.mode, where])


@dataclass(frozen=True)
class Diagnostic:
    cre: Optional[str]
    message: str
    trigger: Optional[Change] = None


@dataclass
class AccessTally:
    rule_evaluations: int = 0
    context_accesses: int = 0
    group_accesses: int = 0
    public_accesses: int = 0

    @property
    def total(self) -> int:
        return self.context_accesses + self.group_accesses + self.public_accesses

    def percentages(self) -> tuple[float, float]:
        """Context and group shares of context+group accesses."""
        denom = self.context_accesses + self.group_accesses
        if denom == 0:
            return 0.0, 0.0
        return (100.0 * self.context_accesses / denom, 100.0 * self.group_accesses / denom)

    def count(self, rv: ResolvedValue, ctx: str, group: Optional[Group]) -> None:
        src = rv.source_work_area
        if src == ctx:
            self.context_accesses += 1
        elif group is not None and src in group.members:
            self.group_accesses += 1
        else:
            self.public_accesses += 1

    def export(self) -> str:
        ctx_pct, grp_pct = self.percentages()
        pub_pct = 100.0 * self.public_accesses / self.total if self.total else 0.0
        return "\n".join([
            f"ruleEvaluations={self.rule_evaluations}",
            f"contextAccesses={self.context_accesses}",
            f"groupAccesses={self.group_accesses}",
            f"publicAccesses={self.public_accesses}",
            f"contextPct={ctx_pct:.2f}",
            f"groupPct={grp_pct:.2f}",
            f"publicPct={pub_pct:.2f}",
        ]) + "\n"


class Engine:
    """Consistency checker attached to one store.

    ``group`` selects the active mode: ``None`` maintains hierarchy results,
    a :class:`Group` maintains that group's results for every CRE living in
    a private work area. CREs living in the public work area are always
    checked along the hierarchy.
    """

    def __init__(self, store: Store, group: "Group | str | None" = None):
        self.store = store
        self.group = store.group(group) if group is not None else None
        self.crds: dict[str, CRD] = {}
        self._by_type: dict[str, list[CRD]] = {}
        self.instances: dict[tuple[str, str], CRE] = {}
        self._homed: dict[tuple[str, str], dict[str, CRE]] = {}
        self._index: dict[tuple[str, str], set[tuple[str, str]]] = {}
        self.feedback: list[Feedback] = []
        self.diagnostics: list[Diagnostic] = []
        self.tally = AccessTally()
        self._feedback_listeners: list[Callable[[Feedback], None]] = []
        self._bulk: set[int] = set()
        self._bulk_done: set[tuple[str, str]] = set()
        self._ensure_types()
        self._rebuild()
        store.subscribe(self._on_event)
        store.add_commit_listener(self._on_commit)

    # -- setup --------------------------------------------------------------

    def _ensure_types(self) -> None:
        s = self.store
        if CRD_TYPE not in s.types:
            s.declare_type(CRD_TYPE, [FieldDecl("ruleId"), FieldDecl("targetType", "link"),
                                      FieldDecl("text")])
        if CRE_TYPE not in s.types:
            s.declare_type(CRE_TYPE, [FieldDecl("crd", "link"), FieldDecl("subject", "link"),
                                      FieldDecl(RESULT, "boolean")])

    def _rebuild(self) -> None:
        """Recover CRDs and CREs from a store that already has content."""
        crd_type = self.store.types[CRD_TYPE].type_id
        for aid, decl in self.store.local_types(PUBLIC):
            if decl.type_id != crd_type:
                continue
            get = lambda p: self.store.resolve_property(PUBLIC, aid, p).value
            target = self.store.type_by_id(get("targetType").id)
            crd = CRD(aid, get("ruleId"), target.name, target.type_id, get("text"),
                      parse_rule(get("text")))
            self._add_crd(crd)
        for wa in sorted(self.store.work_areas):
            for aid, decl in list(self.store.local_types(wa)):
                for crd in self._by_type.get(decl.type_id, ()):
                    self.reevaluate(self._instantiate(crd, aid, wa), self.group, quiet=True)
        self.tally = AccessTally()

    def _add_crd(self, crd: CRD) -> None:
        self.crds[crd.crd_id] = crd
        self._by_type.setdefault(crd.type_id, []).append(crd)

    def on_feedback(self, callback: Callable[[Feedback], None]) -> None:
        self._feedback_listeners.append(callback)

    def register_crd(self, type_name: str, text: str, rule_id: Optional[str] = None) -> CRD:
        """Define a rule for a type and check every existing instance."""
        decl = self.store.types.get(type_name)
        if decl is None:
            raise EngineError(f"unknown type {type_name!r}")
        ast = parse_rule(text)
        rule_id = rule_id or f"R{len(self.crds) + 1:02d}"
        crd_id = CRD_PREFIX + rule_id
        if crd_id in self.crds:
            raise EngineError(f"rule {rule_id!r} already registered")
        s = self.store
        s.put(PUBLIC, crd_id, TYPE_PROPERTY, Ref(s.types[CRD_TYPE].type_id))
        s.put(PUBLIC, crd_id, "ruleId", rule_id)
        s.put(PUBLIC, crd_id, "targetType", Ref(decl.type_id))
        s.put(PUBLIC, crd_id, "text", text)
        crd = CRD(crd_id, rule_id, type_name, decl.type_id, text, ast)
        self._add_crd(crd)
        for wa in sorted(s.work_areas):
            for aid, d in list(s.local_types(wa)):
                if d.type_id == decl.type_id:
                    self.reevaluate(self._instantiate(crd, aid, wa), self.group)
        return crd

    def register_catalog(self, rules: Iterable[CatalogRule]) -> list[CRD]:
        out = []
        for r in rules:
            if CRD_PREFIX + r.rule_id not in self.crds:
                out.append(self.register_crd(r.type_name, r.text, r.rule_id))
        return out

    # -- CRE bookkeeping ----------------------------------------------------

    def _instantiate(self, crd: CRD, subject: str, home: str) -> CRE:
        cre_id = cre_id_for(crd.rule_id, subject)
        key = (cre_id, home)
        if key in self.instances:
            return self.instances[key]
        cre = CRE(cre_id, crd, subject, home)
        self.instances[key] = cre
        self._homed.setdefault((subject, home), {})[crd.crd_id] = cre
        s = self.store
        header = {TYPE_PROPERTY: Ref(s.types[CRE_TYPE].type_id),
                  "crd": Ref(crd.crd_id), "subject": Ref(subject)}
        wa = s.work_area(home)
        for prop, value in header.items():
            cur = wa.local((cre_id, prop))
            if cur is None or not cur.live or cur.value != value:
                s.put(home, cre_id, prop, value)
        return cre

    def _forget(self, cre: CRE) -> None:
        self.instances.pop(cre.key, None)
        homed = self._homed.get((cre.subject, cre.home))
        if homed is not None:
            homed.pop(cre.crd.crd_id, None)
            if not homed:
                del self._homed[(cre.subject, cre.home)]
        self._set_scope(cre, Scope())

    def _remove(self, cre: CRE) -> None:
        self._forget(cre)
        wa = self.store.work_area(cre.home)
        for prop in sorted(wa.props.get(cre.cre_id, ())):
            cur = wa.local((cre.cre_id, prop))
            if cur is not None and cur.live:
                self.store.delete(cre.home, cre.cre_id, prop)

    def _set_scope(self, cre: CRE, scope: Scope) -> None:
        old, new = cre.scope.coords, scope.coords
        for c in old - new:
            keys = self._index.get(c)
            if keys is not None:
                keys.discard(cre.key)
                if not keys:
                    del self._index[c]
        for c in new - old:
            self._index.setdefault(c, set()).add(cre.key)
        cre.scope = scope

    def _sync(self, subject: str, wa_id: str) -> list[CRE]:
        """Match the CREs living in *wa_id* to the subject's local type."""
        ch = self.store.work_area(wa_id).local((subject, TYPE_PROPERTY))
        wanted: list[CRD] = []
        if ch is not None and ch.live and isinstance(ch.value, Ref):
            wanted = self._by_type.get(ch.value.id, [])
        existing = dict(self._homed.get((subject, wa_id), {}))
        wanted_ids = {c.crd_id for c in wanted}
        for crd_id in sorted(set(existing) - wanted_ids):
            self._remove(existing[crd_id])
        return [self._instantiate(crd, subject, wa_id) for crd in wanted
                if crd.crd_id not in existing]

    def _mode_group(self, cre: CRE, group: Optional[Group]) -> Optional[Group]:
        if cre.home == PUBLIC:
            return None
        return group

    def homed_in(self, wa_id: str) -> list[CRE]:
        return sorted((c for c in self.instances.values() if c.home == wa_id),
                      key=lambda c: (c.subject, c.crd.crd_id))

    # -- change analysis ------------------------------------------------------

    def _on_event(self, event: ChangeEvent) -> None:
        try:
            self.on_change(event, self.group)
        except Exception as exc:   # keep the store's dispatch loop alive
            log.exception("engine fault on event %s", event.sequence)
            self.diagnostics.append(Diagnostic(None, f"internal fault: {exc!r}", event.change))

    def on_change(self, event: ChangeEvent, active_group: Optional[Group] = None) -> None:
        ch = event.change
        broad = event.sequence in self._bulk
        if broad:
            self._bulk.discard(event.sequence)
        try:
            if is_engine_artifact(ch.artifact_id):
                return
            done: set[tuple[str, str]] = set()
            if ch.property == TYPE_PROPERTY:
                for cre in self._sync(ch.artifact_id, ch.work_area):
                    self.reevaluate(cre, active_group, ch)
                    done.add(cre.key)
            for key in sorted(self._index.get(ch.coordinate, ())):
                cre = self.instances.get(key)
                if cre is None or key in done:
                    continue
                if broad:
                    if key in self._bulk_done:
                        continue
                    self._bulk_done.add(key)
                elif not self._sees(cre, ch, self._mode_group(cre, active_group)):
                    continue
                self.reevaluate(cre, active_group, ch)
        finally:
            if not self._bulk:
                self._bulk_done.clear()

    def _sees(self, cre: CRE, ch: Change, group: Optional[Group]) -> bool:
        """Does the CRE's home now resolve the changed coordinate from the
        work area that made the change?  If the home (or a nearer area) holds
        its own entry, the change is shadowed and cannot alter the verdict."""
        found, _ = self.store.locate(cre.home, ch.artifact_id, ch.property, group)
        return found is not None and found.work_area == ch.work_area

    def _on_commit(self, sources: list[str], target: str, events: list[ChangeEvent]) -> None:
        self._bulk.update(e.sequence for e in events)
        moved = []
        for src in sources:
            for cre in [c for c in self.instances.values() if c.home == src]:
                self._forget(cre)
                tkey = (cre.cre_id, target)
                if tkey not in self.instances:
                    cre.home = target
                    self.instances[tkey] = cre
                    self._homed.setdefault((cre.subject, target), {})[cre.crd.crd_id] = cre
                    scope, cre.scope = cre.scope, Scope()
                    self._set_scope(cre, scope)
                moved.append(tkey)
        for key in sorted(set(moved)):
            cre = self.instances[key]
            self._bulk_done.add(key)
            self.reevaluate(cre, self.group)

    # -- data gathering, evaluation, results ----------------------------------

    def gather(self, cre: CRE, context: Optional[str] = None,
               group: Optional[Group] = None) -> dict[tuple[str, str], ResolvedValue]:
        """Resolve every coordinate the rule navigates, context first, then
        group (latest timestamp), then the hierarchy."""
        ctx = context or cre.home
        data: dict[tuple[str, str], ResolvedValue] = {}
        store, tally = self.store, self.tally

        def reader(aid: str, prop: str):
            rv = data.get((aid, prop))
            if rv is None:
                rv = store.resolve(ctx, aid, prop, group)
                data[(aid, prop)] = rv
                tally.count(rv, ctx, group)
            return rv.value

        try:
            evaluate(cre.crd.ast, cre.subject, reader)
        except RuleEvaluationError:
            pass
        return data

    def reevaluate(self, cre: CRE, group: Optional[Group] = None,
                   trigger: Optional[Change] = None, quiet: bool = False) -> Optional[Feedback]:
        """Re-navigate and re-check one CRE, store the verdict, and return
        feedback if the verdict flipped."""
        grp = self._mode_group(cre, group)
        data = self.gather(cre, cre.home, grp)
        try:
            verdict, scope = evaluate(cre.crd.ast, cre.subject, lambda a, p: data[(a, p)].value)
        except RuleEvaluationError as exc:
            merged = Scope(cre.scope.coords, cre.scope.absent)
            merged.update(exc.scope)
            self._set_scope(cre, merged)
            self.diagnostics.append(Diagnostic(cre.cre_id, str(exc), trigger))
            return None
        self.tally.rule_evaluations += 1
        self._set_scope(cre, scope)
        previous = self.stored_result(cre, grp)
        if quiet and previous == verdict.holds:
            return None
        self.store_result(cre, verdict.holds, grp)
        if previous == verdict.holds:
            return None
        fb = Feedback(len(self.feedback) + 1, cre.cre_id, cre.subject, cre.crd.crd_id,
                      cre.crd.rule_id, cre.home, verdict.holds, previous, mode_label(grp), trigger)
        self.feedback.append(fb)
        for cb in list(self._feedback_listeners):
            cb(fb)
        return fb

    def stored_result(self, cre: CRE, group: Optional[Group] = None) -> Optional[bool]:
        ch = self.store.work_area(cre.home).local((cre.cre_id, result_property(group)))
        if ch is None or not ch.live:
            return None
        return ch.value

    def store_result(self, cre: CRE, verdict: bool, group: Optional[Group] = None) -> None:
        """Write a verdict into the CRE's home work area. Group results go to
        a per-group property and leave the hierarchy result alone."""
        if cre.key not in self.instances:
            raise EngineError(f"unknown CRE {cre.cre_id} in {cre.home}")
        self.store.put(cre.home, cre.cre_id, result_property(group), bool(verdict))

    # -- queries --------------------------------------------------------------

    def check(self, wa_id: str, group: "Group | str | None" = None) -> list[tuple[str, str, Optional[bool]]]:
        """Evaluate every CRE living in *wa_id* now, in the given mode."""
        self.store.work_area(wa_id)
        grp = self.store.group(group) if group is not None else None
        for cre in self.homed_in(wa_id):
            self.reevaluate(cre, grp)
        return self.report_inconsistencies(wa_id, grp)

    def report_inconsistencies(self, wa_id: str, group: "Group | str | None" = None
                               ) -> list[tuple[str, str, Optional[bool]]]:
        self.store.work_area(wa_id)
        grp = self.store.group(group) if group is not None else None
        out = []
        for cre in self.homed_in(wa_id):
            out.append((cre.subject, cre.crd.crd_id, self.stored_result(cre, self._mode_group(cre, grp))))
        return out

    def verdicts(self, group: "Group | str | None" = None) -> dict[tuple[str, str], Optional[bool]]:
        """Stored verdict of every CRE under the given mode, keyed by
        (creId, home work area)."""
        grp = self.store.group(group) if group is not None else None
        return {key: self.stored_result(cre, self._mode_group(cre, grp))
                for key, cre in sorted(self.instances.items())}

    def write_feedback(self, fh) -> None:
        for fb in self.feedback:
            fh.write(fb.line() + "\n")
