"""Independent reference implementations used by the tests.

Nothing here calls into the store's resolution code: the brute-force
resolver works from a flat list of every change ever applied.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Optional

from teamcheck.store import PUBLIC, TOMBSTONE, Ref, Store

DELETED = object()


@dataclass
class LoggedStore:
    """A store plus a plain record of what was done to it."""

    store: Store
    parents: dict[str, Optional[str]] = field(default_factory=lambda: {PUBLIC: None})
    log: list[tuple[int, str, str, str, Any]] = field(default_factory=list)   # tick, wa, aid, prop, value

    def add_wa(self, parent: str = PUBLIC, label: Optional[str] = None) -> str:
        wa = self.store.create_work_area(parent, label=label).work_area_id
        self.parents[wa] = parent
        return wa

    def put(self, wa: str, aid: str, prop: str, value: Any) -> None:
        ev = self.store.put(wa, aid, prop, value)
        self.log.append((ev.change.timestamp, wa, aid, prop, value))

    def delete(self, wa: str, aid: str, prop: str) -> None:
        ev = self.store.delete(wa, aid, prop)
        self.log.append((ev.change.timestamp, wa, aid, prop, DELETED))


def brute_latest(log, wa: str, aid: str, prop: str):
    """Latest (tick, value) written to a coordinate in one work area."""
    best = None
    for tick, w, a, p, v in log:
        if w == wa and a == aid and p == prop and (best is None or tick > best[0]):
            best = (tick, v)
    return best


def brute_resolve(log, parents: dict, ctx: str, aid: str, prop: str,
                  members: Optional[frozenset] = None):
    """(value or None, source work area or None) by exhaustive scan."""
    hit = brute_latest(log, ctx, aid, prop)
    if hit is not None:
        return _value(hit), ctx
    if members:
        cands = []
        for m in members:
            if m == ctx:
                continue
            h = brute_latest(log, m, aid, prop)
            if h is not None:
                cands.append((h[0], m, h))
        if cands:
            _, m, h = max(cands)
            return _value(h), m
    wa = parents[ctx]
    while wa is not None:
        hit = brute_latest(log, wa, aid, prop)
        if hit is not None:
            return _value(hit), wa
        wa = parents[wa]
    return None, None


class BruteIndex:
    """Same answers as :func:`brute_resolve`, with the per-area latest
    change found by one pass over the log instead of a scan per query."""

    def __init__(self, log, parents: dict):
        self.parents = parents
        self.latest: dict = {}
        for tick, w, a, p, v in log:
            cur = self.latest.get((w, a, p))
            if cur is None or tick > cur[0]:
                self.latest[(w, a, p)] = (tick, v)

    def resolve(self, ctx, aid, prop, members=None):
        hit = self.latest.get((ctx, aid, prop))
        if hit is not None:
            return _value(hit), ctx
        if members:
            best = None
            for m in members:
                h = self.latest.get((m, aid, prop)) if m != ctx else None
                if h is not None and (best is None or h[0] > best[1][0]):
                    best = (m, h)
            if best is not None:
                return _value(best[1]), best[0]
        wa = self.parents[ctx]
        while wa is not None:
            hit = self.latest.get((wa, aid, prop))
            if hit is not None:
                return _value(hit), wa
            wa = self.parents[wa]
        return None, None


def _value(hit):
    return None if hit[1] is DELETED else hit[1]


def pairwise_distinct(keys: list) -> bool:
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if keys[i] == keys[j]:
                return False
    return True


# -- random stores -------------------------------------------------------------

def random_tree(rng: random.Random, ls: LoggedStore, n: int) -> list[str]:
    was = [PUBLIC]
    for _ in range(n):
        was.append(ls.add_wa(rng.choice(was)))
    return was


def random_resolution_store(rng: random.Random, max_was: int = 5, max_artifacts: int = 50,
                            max_props: int = 10):
    ls = LoggedStore(Store())
    was = random_tree(rng, ls, rng.randint(1, max_was - 1))
    artifacts = [f"a{i}" for i in range(rng.randint(1, max_artifacts))]
    props = [f"p{i}" for i in range(rng.randint(1, max_props))]
    for _ in range(rng.randint(0, 4 * len(artifacts))):
        wa, aid, prop = rng.choice(was), rng.choice(artifacts), rng.choice(props)
        if rng.random() < 0.15:
            ls.delete(wa, aid, prop)
        else:
            ls.put(wa, aid, prop, rng.randint(0, 5))
    groups = []
    private = was[1:]
    for gi in range(rng.randint(0, 3)):
        members = rng.sample(private, rng.randint(0, len(private)))
        groups.append(ls.store.define_group(f"g{gi}", members))
    return ls, was, artifacts, props, groups


# -- random UML change sequences ----------------------------------------------

UML_KINDS = {
    "uml:Class": {"name": "string", "operations": "many", "fields": "many", "generalizations": "many"},
    "uml:Interface": {"name": "string", "operations": "many", "attributes": "many", "generalizations": "many"},
    "uml:Operation": {"name": "string", "visibility": "vis", "params": "many", "returnParams": "many"},
    "uml:Parameter": {"name": "string", "dataType": "string"},
    "uml:Property": {"name": "string"},
    "uml:Lifeline": {"name": "string", "class": "one"},
    "uml:Message": {"action": "string", "receiver": "one"},
    "uml:Transition": {"action": "string", "message": "one", "owner": "one"},
}
NAMES = ("a", "b", "c")


class UmlScenario:
    """Drives random but type-correct changes over a small artifact pool.

    Each artifact has a fixed type; writes go to a random work area, so the
    same artifact can be created independently in several areas.
    """

    def __init__(self, rng: random.Random, store: Store, was: list[str], n_artifacts: int = 10,
                 owners: Optional[dict[str, str]] = None):
        self.rng = rng
        self.store = store
        self.was = was
        types = list(UML_KINDS)
        self.types = {f"x{i}": types[i % len(types)] for i in range(n_artifacts)}
        self.ids = list(self.types)
        self.owners = owners or {}   # artifact -> the only work area allowed to touch it

    def _where(self, aid: str) -> str:
        return self.owners.get(aid) or self.rng.choice(self.was)

    def _value(self, kind: str):
        rng = self.rng
        if kind == "string":
            return rng.choice(NAMES)
        if kind == "vis":
            return rng.choice(("public", "public", "private"))
        if kind == "one":
            return Ref(rng.choice(self.ids))
        k = rng.randint(0, 3)
        return tuple(Ref(rng.choice(self.ids)) for _ in range(k))

    def step(self) -> tuple[str, str, str, Any]:
        """Apply one random change; returns (wa, aid, prop, value|None)."""
        rng = self.rng
        aid = rng.choice(self.ids)
        wa = self._where(aid)
        tname = self.types[aid]
        local = self.store.work_area(wa).local((aid, "type"))
        r = rng.random()
        if r < 0.25 and (local is None or not local.live):
            self.store.create_artifact(wa, aid, tname)
            return wa, aid, "type", tname
        if r < 0.30 and local is not None and local.live:
            self.store.delete(wa, aid, "type")
            return wa, aid, "type", None
        prop, kind = rng.choice(sorted(UML_KINDS[tname].items()))
        cur = self.store.work_area(wa).local((aid, prop))
        if r < 0.40 and cur is not None and cur.live:
            self.store.delete(wa, aid, prop)
            return wa, aid, prop, None
        value = self._value(kind)
        self.store.put(wa, aid, prop, value)
        return wa, aid, prop, value
