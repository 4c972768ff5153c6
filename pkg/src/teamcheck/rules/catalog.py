"""Rule catalog files: one ``RULE <id> ON <typeName>: <ruleText>`` per line."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .syntax import RuleAst, RuleSyntaxError, parse_rule

_LINE = re.compile(r"RULE\s+(?P<id>\S+)\s+ON\s+(?P<type>\S+?):\s+(?P<text>.+)")


class CatalogError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class CatalogRule:
    rule_id: str
    type_name: str
    text: str
    ast: RuleAst

    def line(self) -> str:
        return f"RULE {self.rule_id} ON {self.type_name}: {self.text}"


def parse_catalog(text: str) -> list[CatalogRule]:
    rules, seen = [], set()
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.fullmatch(line)
        if m is None:
            raise CatalogError("expected 'RULE <id> ON <type>: <rule>'", no)
        if m["id"] in seen:
            raise CatalogError(f"duplicate rule id {m['id']}", no)
        seen.add(m["id"])
        try:
            ast = parse_rule(m["text"])
        except RuleSyntaxError as exc:
            raise CatalogError(f"{m['id']}: {exc}", no) from None
        rules.append(CatalogRule(m["id"], m["type"], m["text"], ast))
    return rules


def load_catalog(path) -> list[CatalogRule]:
    return parse_catalog(Path(path).read_text(encoding="utf-8"))


def bundled_catalog() -> list[CatalogRule]:
    """The UML rule set CR01-CR10."""
    text = resources.files("teamcheck.data").joinpath("uml_rules.catalog").read_text(encoding="utf-8")
    return parse_catalog(text)
