"""Corpus loading, synthetic generation and metric replay."""

from .corpus import (
    CorpusError, CorpusModel, Element, bundled_corpus_path, bundled_types,
    dump_corpus, load_corpus, parse_corpus,
)
from .generator import command_count, corpus_types, generate_corpus
from .report import COLUMNS, parse_csv, report
from .runner import (
    Command, CommandStream, ReplayError, ReplayMetrics, ReplayResult,
    run_replay, to_commands,
)

__all__ = [
    "Command", "CommandStream", "COLUMNS", "CorpusError", "CorpusModel", "Element",
    "ReplayError", "ReplayMetrics", "ReplayResult", "bundled_corpus_path",
    "bundled_types", "command_count", "corpus_types", "dump_corpus", "generate_corpus",
    "load_corpus", "parse_corpus", "parse_csv", "report", "run_replay", "to_commands",
]
