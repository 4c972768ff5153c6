"""Line-delimited change-log persistence for a :class:`~teamcheck.store.Store`.

Every change is written as one tab-separated record::

    sequence  tick  workArea  artifact  property  changeType  kind  value

Structural events (work areas, types, groups, commit clears) are written as
``@``-prefixed directive lines so the file can be replayed top to bottom.
Tabs, newlines and backslashes inside fields are backslash-escaped; inside a
list value the item separator ``,`` is escaped as well.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

from .store import (
    TOMBSTONE, Change, ChangeEvent, FieldDecl, Group, Ref, Store, StoreError,
    TypeDecl, WorkArea, value_kind,
)

HEADER = "# teamcheck change log v1"


class ChangeLogError(StoreError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_ESC = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESC = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r", ",": ","}


def escape(text: str, item: bool = False) -> str:
    out = []
    for ch in text:
        if ch in _ESC:
            out.append(_ESC[ch])
        elif item and ch == ",":
            out.append("\\,")
        else:
            out.append(ch)
    return "".join(out)


def unescape(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            if nxt not in _UNESC:
                raise ValueError(f"bad escape \\{nxt}")
            out.append(_UNESC[nxt])
        else:
            out.append(ch)
    return "".join(out)


def split_items(text: str) -> list[str]:
    """Split on unescaped commas, keeping escapes for :func:`unescape`."""
    items, cur, i = [], [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            cur.append(text[i:i + 2])
            i += 2
            continue
        if ch == ",":
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    items.append("".join(cur))
    return items


def _scalar_text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _scalar_parse(kind: str, text: str) -> Any:
    if kind == "string":
        return text
    if kind == "integer":
        return int(text)
    if kind == "real":
        return float(text)
    if kind == "boolean":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    if kind == "link":
        return Ref(text)
    raise ValueError(f"unknown kind {kind!r}")


def encode_value(value: Any) -> tuple[str, str]:
    """Return ``(kind, text)`` for a property value."""
    if value is TOMBSTONE:
        return "none", ""
    if isinstance(value, tuple):
        if not value:
            return "[]", ""
        kind = value_kind(value[0])
        if any(value_kind(v) != kind for v in value):
            raise ValueError("mixed-kind list values cannot be persisted")
        return kind + "[]", ",".join(escape(_scalar_text(v), item=True) for v in value)
    return value_kind(value), escape(_scalar_text(value))


def decode_value(kind: str, text: str) -> Any:
    if kind == "none":
        return TOMBSTONE
    if kind == "[]":
        return ()
    if kind.endswith("[]"):
        base = kind[:-2]
        return tuple(_scalar_parse(base, unescape(t)) for t in split_items(text))
    return _scalar_parse(kind, unescape(text))


def _opt(text: str | None) -> str:
    return "-" if text is None else escape(text)


def _unopt(text: str) -> str | None:
    return None if text == "-" else unescape(text)


def format_entry(entry: tuple) -> str:
    tag = entry[0]
    if tag == "change":
        ev: ChangeEvent = entry[1]
        ch = ev.change
        kind, text = encode_value(ch.value)
        return "\t".join([str(ev.sequence), str(ch.timestamp), escape(ch.work_area),
                          escape(ch.artifact_id), escape(ch.property), ch.change_type,
                          kind, text])
    if tag == "workarea":
        _, wa_id, label, parent, created = entry
        return "\t".join(["@workarea", escape(wa_id), _opt(label), _opt(parent), str(created)])
    if tag == "type":
        decl: TypeDecl = entry[1]
        return "\t".join(["@type", escape(decl.type_id), escape(decl.name)]
                         + [escape(f.spec()) for f in decl.fields])
    if tag == "group":
        _, gid, members = entry
        return "\t".join(["@group", escape(gid)] + [escape(m) for m in members])
    if tag == "clear":
        return "\t".join(["@clear", escape(entry[1])])
    raise ValueError(f"unknown journal entry {tag!r}")


def dumps(store: Store) -> str:
    lines = [HEADER]
    lines += [format_entry(e) for e in store.journal]
    return "\n".join(lines) + "\n"


def save(store: Store, path: str | os.PathLike) -> None:
    """Write the store's full log, replacing *path* atomically."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(store))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def loads(text: str) -> Store:
    store = Store()
    store.journal = []
    store.work_areas.clear()
    for no, raw in enumerate(text.splitlines(), 1):
        if not raw or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        try:
            if parts[0].startswith("@"):
                _directive(store, parts)
            else:
                _record(store, parts)
        except ChangeLogError:
            raise
        except (ValueError, IndexError, StoreError) as exc:
            raise ChangeLogError(str(exc), no) from None
    if "public" not in store.work_areas:
        raise ChangeLogError("no public work area", 0)
    return store


def load(path: str | os.PathLike) -> Store:
    return loads(Path(path).read_text(encoding="utf-8"))


def _directive(store: Store, parts: list[str]) -> None:
    tag = parts[0]
    if tag == "@workarea":
        wa_id, label, parent, created = unescape(parts[1]), _unopt(parts[2]), _unopt(parts[3]), int(parts[4])
        if parent is not None and parent not in store.work_areas:
            raise ValueError(f"unknown parent {parent!r}")
        store.work_areas[wa_id] = WorkArea(wa_id, parent, created, label)
        store.journal.append(("workarea", wa_id, label, parent, created))
        if wa_id.startswith("WA") and wa_id[2:].isdigit():
            store._wa_counter = max(store._wa_counter, int(wa_id[2:]))
    elif tag == "@type":
        decl = TypeDecl(unescape(parts[1]), unescape(parts[2]),
                        tuple(FieldDecl.parse(unescape(p)) for p in parts[3:]))
        store._register_type(decl)
        store.journal.append(("type", decl))
    elif tag == "@group":
        gid = unescape(parts[1])
        members = tuple(unescape(p) for p in parts[2:])
        for m in members:
            store.work_area(m)
        store.groups[gid] = Group(gid, frozenset(members))
        store.journal.append(("group", gid, members))
    elif tag == "@clear":
        wa_id = unescape(parts[1])
        store.work_area(wa_id)._clear()
        store.journal.append(("clear", wa_id))
    else:
        raise ValueError(f"unknown directive {tag}")


def _record(store: Store, parts: list[str]) -> None:
    if len(parts) != 8:
        raise ValueError(f"expected 8 fields, got {len(parts)}")
    seq, tick = int(parts[0]), int(parts[1])
    wa_id, aid, prop = unescape(parts[2]), unescape(parts[3]), unescape(parts[4])
    ctype, kind = parts[5], parts[6]
    value = decode_value(kind, parts[7])
    if tick <= store.tick or seq <= store.sequence:
        raise ValueError("ticks and sequence numbers must increase")
    change = Change(aid, prop, value, ctype, tick, wa_id)
    store.work_area(wa_id)._record(change)
    store.tick, store.sequence = tick, seq
    store.journal.append(("change", ChangeEvent(change, seq)))


def iter_records(store: Store) -> Iterable[ChangeEvent]:
    for entry in store.journal:
        if entry[0] == "change":
            yield entry[1]
