"""From-scratch consistency checking, used to cross-check the engine.

Nothing here looks at scopes or events: the expected set of CREs is derived
from the store's contents and every verdict is recomputed by direct
resolution.
"""

from __future__ import annotations

from typing import Iterable, Optional, Union

from .engine import CRD, cre_id_for
from .rules import RuleEvaluationError, evaluate
from .store import PUBLIC, Group, Store

ERROR = "error"


def expected_instances(store: Store, crds: Iterable[CRD]) -> dict[tuple[str, str], tuple[CRD, str]]:
    """(creId, home) -> (CRD, subject) for every artifact with a local type."""
    by_type: dict[str, list[CRD]] = {}
    for crd in crds:
        by_type.setdefault(crd.type_id, []).append(crd)
    out = {}
    for wa in store.work_areas:
        for aid, decl in store.local_types(wa):
            for crd in by_type.get(decl.type_id, ()):
                out[(cre_id_for(crd.rule_id, aid), wa)] = (crd, aid)
    return dict(sorted(out.items()))


def check_one(store: Store, crd: CRD, subject: str, home: str,
              group: Optional[Group] = None) -> Union[bool, str]:
    grp = None if home == PUBLIC else group
    try:
        verdict, _ = evaluate(crd.ast, subject,
                              lambda a, p: store.resolve(home, a, p, grp).value)
    except RuleEvaluationError:
        return ERROR
    return verdict.holds


def batch_check(store: Store, crds: Iterable[CRD],
                group: "Group | str | None" = None) -> dict[tuple[str, str], Union[bool, str]]:
    grp = store.group(group) if group is not None else None
    return {key: check_one(store, crd, subject, key[1], grp)
            for key, (crd, subject) in expected_instances(store, crds).items()}
