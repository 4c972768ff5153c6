"""Rule AST, tokenizer, recursive-descent parser and pretty-printer.

Grammar::

    rule    := clause ("and" clause)*
    clause  := path cmp operand
             | ("forall" | "exists") IDENT "in" path ":" clause
             | "unique" path "by" relpath ("," relpath)*
             | "count" path "<=" INTEGER
    cmp     := "=" | "!=" | "<=" | ">="
    operand := literal | path
    path    := ("self" | IDENT) ("." IDENT)*
    relpath := IDENT ("." IDENT)*
    literal := STRING | INTEGER | REAL | "true" | "false" | "null"
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Optional, Union

KEYWORDS = {"and", "forall", "exists", "in", "unique", "by", "count",
            "null", "true", "false", "self"}
OPERATORS = ("=", "!=", "<=", ">=")


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Path:
    root: Optional[str]          # "self", a variable, or None for a key path
    segments: tuple[str, ...] = ()

    def __str__(self) -> str:
        parts = ([self.root] if self.root is not None else []) + list(self.segments)
        return ".".join(parts)


@dataclass(frozen=True)
class Literal:
    value: Any                   # None is the ``null`` literal

    def __str__(self) -> str:
        v = self.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v, ensure_ascii=False)
        return repr(v)


Operand = Union[Literal, Path]


@dataclass(frozen=True)
class Comparison:
    left: Path
    op: str
    right: Operand

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Quantified:
    kind: str                    # "forall" | "exists"
    variable: str
    collection: Path
    body: "Clause"

    def __str__(self) -> str:
        return f"{self.kind} {self.variable} in {self.collection} : {self.body}"


@dataclass(frozen=True)
class Unique:
    collection: Path
    keys: tuple[Path, ...]

    def __str__(self) -> str:
        return f"unique {self.collection} by {', '.join(map(str, self.keys))}"


@dataclass(frozen=True)
class CountAtMost:
    collection: Path
    bound: int

    def __str__(self) -> str:
        return f"count {self.collection} <= {self.bound}"


Clause = Union[Comparison, Quantified, Unique, CountAtMost]


@dataclass(frozen=True)
class RuleAst:
    clauses: tuple[Clause, ...]
    source: str = ""

    def __str__(self) -> str:
        return " and ".join(str(c) for c in self.clauses)

    def __eq__(self, other) -> bool:
        # source text is provenance, not structure
        return isinstance(other, RuleAst) and self.clauses == other.clauses

    def __hash__(self) -> int:
        return hash(self.clauses)


def format_rule(ast: RuleAst) -> str:
    return str(ast)


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<num>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<op>!=|<=|>=|=)
  | (?P<punct>[.:,])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str      # ident, kw, str, num, op, punct, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex("\n") + 1
        else:
            if kind == "ident" and chunk in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, chunk, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser --------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.bound: list[str] = []

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        where = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise RuleSyntaxError(f"{message}, found {where}", tok.line, tok.column)

    def take(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            self.error(f"expected {text or kind}")
        self.i += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def rule(self) -> RuleAst:
        clauses = [self.clause()]
        while self.at("kw", "and"):
            self.i += 1
            clauses.append(self.clause())
        if not self.at("eof"):
            self.error("expected 'and' or end of rule")
        return RuleAst(tuple(clauses), self.text)

    def clause(self) -> Clause:
        tok = self.tok
        if tok.kind == "kw" and tok.text in ("forall", "exists"):
            self.i += 1
            var = self.take("ident").text
            self.take("kw", "in")
            coll = self.path()
            self.take("punct", ":")
            self.bound.append(var)
            try:
                body = self.clause()
            finally:
                self.bound.pop()
            return Quantified(tok.text, var, coll, body)
        if tok.kind == "kw" and tok.text == "unique":
            self.i += 1
            coll = self.path()
            self.take("kw", "by")
            keys = [self.relpath()]
            while self.at("punct", ","):
                self.i += 1
                keys.append(self.relpath())
            return Unique(coll, tuple(keys))
        if tok.kind == "kw" and tok.text == "count":
            self.i += 1
            coll = self.path()
            self.take("op", "<=")
            num = self.take("num")
            if not re.fullmatch(r"-?\d+", num.text):
                self.error("expected an integer bound", num)
            return CountAtMost(coll, int(num.text))
        left = self.path()
        if not self.at("op"):
            self.error("expected a comparison operator")
        op = self.take("op").text
        return Comparison(left, op, self.operand())

    def operand(self) -> Operand:
        tok = self.tok
        if tok.kind == "str":
            self.i += 1
            return Literal(json.loads(tok.text))
        if tok.kind == "num":
            self.i += 1
            if re.fullmatch(r"-?\d+", tok.text):
                return Literal(int(tok.text))
            return Literal(float(tok.text))
        if tok.kind == "kw" and tok.text in ("null", "true", "false"):
            self.i += 1
            return Literal({"null": None, "true": True, "false": False}[tok.text])
        return self.path()

    def path(self) -> Path:
        tok = self.tok
        if tok.kind == "kw" and tok.text == "self":
            root = "self"
        elif tok.kind == "ident":
            if tok.text not in self.bound:
                raise RuleSyntaxError(f"unbound variable {tok.text!r}", tok.line, tok.column)
            root = tok.text
        else:
            self.error("expected a path")
        self.i += 1
        return Path(root, self.segments())

    def relpath(self) -> Path:
        first = self.take("ident").text
        return Path(None, (first,) + self.segments())

    def segments(self) -> tuple[str, ...]:
        segs = []
        while self.at("punct", "."):
            self.i += 1
            segs.append(self.take("ident").text)
        return tuple(segs)


def parse_rule(text: str) -> RuleAst:
    """Parse rule text, raising :class:`RuleSyntaxError` with a position."""
    return _Parser(text).rule()
