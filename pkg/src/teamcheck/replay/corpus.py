"""Textual model corpora.

::

    # comment
    TYPE uml:Class { name:string operations:link:many }
    ELEM C1 uml:Class partition=alice { name="Gripper" operations->O1,O2 }

Attribute values are quoted strings, integers, reals, ``true``/``false`` or
bare words (read as strings). Links may point forward; they are resolved
after the whole file has been read.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from ..store import FieldDecl, TypeDecl

DEFAULT_PARTITION = "main"


class CorpusError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class Element:
    element_id: str
    type_name: str
    partition: str = DEFAULT_PARTITION
    attributes: dict[str, Any] = field(default_factory=dict)
    links: dict[str, list[str]] = field(default_factory=dict)
    line: Optional[int] = None


@dataclass
class CorpusModel:
    types: list[TypeDecl] = field(default_factory=list)
    elements: list[Element] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def partitions(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for el in self.elements:
            out.setdefault(el.partition, set()).add(el.element_id)
        return dict(sorted(out.items()))

    def element(self, element_id: str) -> Element:
        for el in self.elements:
            if el.element_id == element_id:
                return el
        raise KeyError(element_id)

    def type(self, name: str) -> Optional[TypeDecl]:
        for t in self.types:
            if t.name == name:
                return t
        return None

    @property
    def link_count(self) -> int:
        return sum(len(v) for el in self.elements for v in el.links.values())


_TOKEN = re.compile(r"""
    (?P<comment>\#[^\n]*)
  | (?P<ws>[ \t\r\n]+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<arrow>->)
  | (?P<punct>[{}=,])
  | (?P<word>(?:[^\s{}=,"\#-]|-(?!>))+)
""", re.VERBOSE)


def _tokens(text: str):
    pos, line = 0, 1
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise CorpusError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            out.append((kind, m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    out.append(("eof", "", line))
    return out


def _literal(kind: str, text: str) -> Any:
    if kind == "str":
        return json.loads(text)
    if text in ("true", "false"):
        return text == "true"
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+\.\d*(?:[eE][-+]?\d+)?", text):
        return float(text)
    return text


def _coerce(value: Any, fd: Optional[FieldDecl], where: str, line: int) -> Any:
    if fd is None:
        return value
    kind = fd.kind
    if kind == "string":
        if isinstance(value, bool):
            return "true" if value else "false"
        return str(value)
    ok = {"integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
          "real": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
          "boolean": lambda v: isinstance(v, bool)}.get(kind)
    if ok is None or not ok(value):
        raise CorpusError(f"{where}: expected {kind}, got {value!r}", line)
    return float(value) if kind == "real" else value


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self, kind: Optional[str] = None, text: Optional[str] = None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (text and tok[1] != text):
            want = text or kind
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise CorpusError(f"expected {want}, found {got}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> CorpusModel:
        model = CorpusModel()
        ids: set[str] = set()
        while self.peek()[0] != "eof":
            kw = self.next("word")
            if kw[1] == "TYPE":
                model.types.append(self.type_decl(model))
            elif kw[1] == "ELEM":
                el = self.element(model)
                if el.element_id in ids:
                    raise CorpusError(f"duplicate element id {el.element_id!r}", el.line)
                ids.add(el.element_id)
                model.elements.append(el)
            else:
                raise CorpusError(f"expected TYPE or ELEM, found {kw[1]!r}", kw[2])
        return model

    def type_decl(self, model: CorpusModel) -> TypeDecl:
        _, name, line = self.next("word")
        if model.type(name) is not None:
            raise CorpusError(f"duplicate type {name!r}", line)
        self.next("punct", "{")
        fields = []
        while self.peek()[1] != "}":
            _, spec, fline = self.next("word")
            try:
                fields.append(FieldDecl.parse(spec))
            except ValueError as exc:
                raise CorpusError(str(exc), fline) from None
        self.next("punct", "}")
        return TypeDecl(f"type:{name}", name, tuple(fields))

    def element(self, model: CorpusModel) -> Element:
        _, eid, line = self.next("word")
        _, tname, _ = self.next("word")
        el = Element(eid, tname, line=line)
        decl = model.type(tname)
        if self.peek()[1] == "partition":
            self.next()
            self.next("punct", "=")
            el.partition = self.next("word")[1]
        self.next("punct", "{")
        while self.peek()[1] != "}":
            _, name, nline = self.next("word")
            fd = decl.field(name) if decl else None
            if self.peek()[0] == "arrow":
                self.next()
                targets = [self.next("word")[1]]
                while self.peek()[1] == ",":
                    self.next()
                    targets.append(self.next("word")[1])
                if fd is not None and fd.kind != "link":
                    raise CorpusError(f"{eid}.{name} is not a link field", nline)
                el.links.setdefault(name, []).extend(targets)
            else:
                self.next("punct", "=")
                kind, text, vline = self.next()
                if kind not in ("str", "word"):
                    raise CorpusError(f"expected a value for {eid}.{name}", vline)
                if name in el.attributes:
                    raise CorpusError(f"{eid}.{name} set twice", vline)
                el.attributes[name] = _coerce(_literal(kind, text), fd, f"{eid}.{name}", vline)
        self.next("punct", "}")
        return el


def parse_corpus(text: str, dangling: str = "reject") -> CorpusModel:
    """Parse corpus text. ``dangling`` is ``"reject"`` or ``"drop"``."""
    if dangling not in ("reject", "drop"):
        raise ValueError("dangling must be 'reject' or 'drop'")
    model = _Parser(text).parse()
    ids = {el.element_id for el in model.elements}
    for el in model.elements:
        for name, targets in el.links.items():
            missing = [t for t in targets if t not in ids]
            for t in missing:
                msg = f"{el.element_id}.{name} links to missing element {t!r}"
                if dangling == "reject":
                    raise CorpusError(msg, el.line)
                model.diagnostics.append(msg)
            if missing:
                el.links[name] = [t for t in targets if t in ids]
    return model


def load_corpus(path, dangling: str = "reject") -> CorpusModel:
    return parse_corpus(Path(path).read_text(encoding="utf-8"), dangling)


def _value_text(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    return json.dumps(v, ensure_ascii=False)


def dump_corpus(model: CorpusModel) -> str:
    lines = []
    for t in model.types:
        lines.append(f"TYPE {t.name} {{ {' '.join(f.spec() for f in t.fields)} }}")
    for el in model.elements:
        items = [f"{k}={_value_text(v)}" for k, v in el.attributes.items()]
        items += [f"{k}->{','.join(v)}" for k, v in el.links.items() if v]
        lines.append(f"ELEM {el.element_id} {el.type_name} partition={el.partition} "
                     f"{{ {' '.join(items)} }}")
    return "\n".join(lines) + "\n"


def parse_types(text: str) -> list[TypeDecl]:
    """Read only the TYPE sections of corpus-format text."""
    return parse_corpus(text).types


def bundled_types() -> list[TypeDecl]:
    return parse_types(resources.files("teamcheck.data").joinpath("uml.types").read_text(encoding="utf-8"))


def bundled_corpus_path():
    return resources.files("teamcheck.data").joinpath("example.corpus")
