"""Rule evaluation with read-set capture.

Evaluation is resolution-agnostic: the caller passes a *reader*,
``reader(artifact_id, property) -> value | None``, where ``None`` means the
property is absent from the caller's point of view. Every read is recorded
in a :class:`Scope`, absent reads included, so that a later creation of the
missing property can trigger re-evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Optional

from ..store import Ref
from .syntax import (
    Clause, Comparison, CountAtMost, Literal, Path, Quantified, RuleAst, Unique,
)

Reader = Callable[[str, str], Any]
Coordinate = tuple[str, str]


class RuleEvaluationError(Exception):
    """The rule cannot be applied to the data (e.g. ``<=`` on strings).

    Distinct from a false verdict. ``scope`` holds the reads made before the
    failure.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.scope: Scope = Scope()


class Scope:
    """Set of (artifact, property) coordinates read during an evaluation."""

    __slots__ = ("coords", "absent")

    def __init__(self, coords: Iterable[Coordinate] = (), absent: Iterable[Coordinate] = ()):
        self.coords: set[Coordinate] = set(coords)
        self.absent: set[Coordinate] = set(absent)

    def add(self, artifact_id: str, prop: str, absent: bool = False) -> None:
        coord = (artifact_id, prop)
        self.coords.add(coord)
        if absent:
            self.absent.add(coord)

    def update(self, other: "Scope") -> None:
        self.coords |= other.coords
        self.absent |= other.absent

    def __contains__(self, coord) -> bool:
        return coord in self.coords

    def __iter__(self) -> Iterator[Coordinate]:
        return iter(sorted(self.coords))

    def __len__(self) -> int:
        return len(self.coords)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scope):
            return NotImplemented
        return self.coords == other.coords and self.absent == other.absent

    def __repr__(self) -> str:
        return f"Scope({sorted(self.coords)!r}, absent={sorted(self.absent)!r})"


@dataclass(frozen=True)
class Verdict:
    holds: bool
    failed_clause: Optional[int] = None
    dangling: bool = False


@dataclass
class _Walk:
    values: list
    absent_mid: bool = False
    absent_last: bool = False

    @property
    def absent(self) -> bool:
        return self.absent_mid or self.absent_last


def _walk(roots: list, segments: tuple[str, ...], reader: Reader, scope: Scope) -> _Walk:
    frontier = roots
    out = _Walk(frontier)
    last = len(segments) - 1
    visited: set[tuple[str, int]] = set()
    for i, seg in enumerate(segments):
        nxt = []
        for v in frontier:
            if not isinstance(v, Ref):
                raise RuleEvaluationError(f"cannot navigate '.{seg}' from non-link value {v!r}")
            key = (v.id, i)
            if key in visited:
                continue
            visited.add(key)
            val = reader(v.id, seg)
            scope.add(v.id, seg, val is None)
            if val is None:
                if i == last:
                    out.absent_last = True
                else:
                    out.absent_mid = True
            elif isinstance(val, tuple):
                nxt.extend(val)
            else:
                nxt.append(val)
        frontier = nxt
    out.values = frontier
    return out


def navigate(path: Path, start: str, reader: Reader,
             env: Optional[dict] = None) -> tuple[list, Scope]:
    """Follow *path* from artifact *start*; returns the values at the end of
    the path and the coordinates touched on the way."""
    scope = Scope()
    walk = _nav(path, {"self": Ref(start), **(env or {})}, reader, scope)
    return walk.values, scope


def _nav(path: Path, env: dict, reader: Reader, scope: Scope) -> _Walk:
    return _walk([env[path.root]], path.segments, reader, scope)


def _eq(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    return type(a) is type(b) and a == b


def _num(v: Any, op: str):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RuleEvaluationError(f"operator {op} needs numbers, got {v!r}")
    return v


class _Evaluator:
    def __init__(self, reader: Reader):
        self.reader = reader
        self.scope = Scope()

    def clause(self, c: Clause, env: dict) -> tuple[bool, bool]:
        """Return ``(holds, dangling)``."""
        if isinstance(c, Comparison):
            return self.comparison(c, env)
        if isinstance(c, Quantified):
            coll = _nav(c.collection, env, self.reader, self.scope)
            results = [self.clause(c.body, {**env, c.variable: v}) for v in coll.values]
            if c.kind == "forall":
                holds = all(h for h, _ in results)
                dangling = any(d for _, d in results)
            else:
                holds = any(h for h, _ in results)
                dangling = not holds and any(d for _, d in results)
            if coll.absent_mid:
                return False, True
            return holds and not dangling, dangling
        if isinstance(c, Unique):
            coll = _nav(c.collection, env, self.reader, self.scope)
            keys, dangling = [], coll.absent_mid
            for v in coll.values:
                key = []
                for kp in c.keys:
                    kw = _walk([v], kp.segments, self.reader, self.scope)
                    dangling = dangling or kw.absent
                    key.append(tuple(kw.values))
                keys.append(tuple(key))
            if dangling:
                return False, True
            return len(set(keys)) == len(keys), False
        if isinstance(c, CountAtMost):
            coll = _nav(c.collection, env, self.reader, self.scope)
            if coll.absent_mid:
                return False, True
            return len(coll.values) <= c.bound, False
        raise TypeError(f"unknown clause {c!r}")

    def comparison(self, c: Comparison, env: dict) -> tuple[bool, bool]:
        left = _nav(c.left, env, self.reader, self.scope)
        if isinstance(c.right, Literal) and c.right.value is None:
            if c.op not in ("=", "!="):
                raise RuleEvaluationError(f"operator {c.op} cannot compare with null")
            present = bool(left.values)
            return (present if c.op == "!=" else not present), False
        if isinstance(c.right, Literal):
            rvals, r_absent = [c.right.value], False
        else:
            right = _nav(c.right, env, self.reader, self.scope)
            rvals, r_absent = right.values, right.absent
        if left.absent or r_absent or not left.values or not rvals:
            return False, True
        if c.op in ("=", "!="):
            match = any(_eq(a, b) for a in left.values for b in rvals)
            return (match if c.op == "=" else not match), False
        if c.op == "<=":
            return all(_num(a, c.op) <= _num(b, c.op) for a in left.values for b in rvals), False
        return all(_num(a, c.op) >= _num(b, c.op) for a in left.values for b in rvals), False


def evaluate(ast: RuleAst, self_id: str, reader: Reader) -> tuple[Verdict, Scope]:
    """Evaluate all clauses against artifact *self_id*.

    The verdict is the conjunction of the clauses; every clause is still
    evaluated so the returned scope covers all of them.
    """
    ev = _Evaluator(reader)
    env = {"self": Ref(self_id)}
    failed, dangling = None, False
    try:
        for i, clause in enumerate(ast.clauses):
            holds, d = ev.clause(clause, env)
            dangling = dangling or d
            if not holds and failed is None:
                failed = i
    except RuleEvaluationError as exc:
        exc.scope = ev.scope
        raise
    return Verdict(failed is None, failed, dangling), ev.scope
