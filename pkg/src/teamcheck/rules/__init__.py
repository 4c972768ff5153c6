"""Navigation-path consistency rules."""

from .catalog import CatalogError, CatalogRule, bundled_catalog, load_catalog, parse_catalog
from .evaluator import RuleEvaluationError, Scope, Verdict, evaluate, navigate
from .syntax import (
    Comparison, CountAtMost, Literal, Path, Quantified, RuleAst, RuleSyntaxError,
    Unique, format_rule, parse_rule,
)

__all__ = [
    "CatalogError", "CatalogRule", "Comparison", "CountAtMost", "Literal", "Path",
    "Quantified", "RuleAst", "RuleEvaluationError", "RuleSyntaxError", "Scope",
    "Unique", "Verdict", "bundled_catalog", "evaluate", "format_rule", "load_catalog",
    "navigate", "parse_catalog", "parse_rule",
]
