"""``teamcheck`` command line.

The store lives in a change-log file (``--store``, default from the
``TEAMCHECK_STORE`` environment variable, else ``teamcheck.log``). Rules are
stored in the log as well, so every command that loads the store also has
its catalog.

Exit codes: 0 success / all hold, 1 inconsistencies found (check), 2 usage
or data error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import changelog
from .engine import Engine, EngineError, mode_label
from .replay import (
    CorpusError, ReplayError, bundled_corpus_path, bundled_types, generate_corpus,
    load_corpus, parse_corpus, report, run_replay, to_commands,
)
from .rules import RuleSyntaxError
from .rules.catalog import CatalogError, bundled_catalog, load_catalog
from .store import PUBLIC, Ref, Store, StoreError

ENV_STORE = "TEAMCHECK_STORE"
DEFAULT_STORE = "teamcheck.log"

EXIT_OK, EXIT_FOUND, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _out(text: str = "") -> None:
    sys.stdout.write(text + "\n")


def _store_path(args) -> Path:
    return Path(args.store or os.environ.get(ENV_STORE) or DEFAULT_STORE)


def _load(args) -> Store:
    path = _store_path(args)
    if not path.exists():
        raise UsageError(f"no store at {path} (run 'teamcheck init' first)")
    return changelog.load(path)


# -- change specs --------------------------------------------------------------

_SET = re.compile(r"(?P<aid>[^.=\s]+)\.(?P<prop>[^=\s]+?)(?P<op>=|->)(?P<value>.*)", re.S)
_DEL = re.compile(r"(?P<aid>[^.\s]+)\.(?P<prop>\S+)")


def parse_value(text: str):
    if text.startswith('"'):
        try:
            return json.loads(text)
        except ValueError:
            raise UsageError(f"bad string literal {text!r}") from None
    if text in ("true", "false"):
        return text == "true"
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+\.\d*(?:[eE][-+]?\d+)?", text):
        return float(text)
    return text


def parse_set(spec: str):
    """``a.p=value`` or ``a.p->id,id`` to (artifact, prop, value, is_link)."""
    m = _SET.fullmatch(spec)
    if m is None:
        raise UsageError(f"malformed change {spec!r} (want artifact.prop=value or artifact.prop->id)")
    if m["op"] == "->":
        ids = [t.strip() for t in m["value"].split(",")]
        if not all(ids):
            raise UsageError(f"malformed link list in {spec!r}")
        return m["aid"], m["prop"], ids, True
    return m["aid"], m["prop"], parse_value(m["value"]), False


def parse_delete(spec: str):
    m = _DEL.fullmatch(spec)
    if m is None:
        raise UsageError(f"malformed delete {spec!r} (want artifact.prop)")
    return m["aid"], m["prop"]


def parse_create(spec: str):
    aid, sep, type_name = spec.partition(":")
    if not sep or not aid or not type_name:
        raise UsageError(f"malformed create {spec!r} (want artifact:type)")
    return aid, type_name


def _link_value(store: Store, wa: str, aid: str, prop: str, ids: list[str]):
    decl = store.type_of(wa, aid)
    fd = decl.field(prop) if decl else None
    many = fd.many if fd is not None else len(ids) > 1
    if not many and len(ids) > 1:
        raise UsageError(f"{aid}.{prop} holds a single link")
    return tuple(Ref(i) for i in ids) if many else Ref(ids[0])


# -- group lookup --------------------------------------------------------------

def _resolve_group(store: Store, spec: Optional[str]):
    """A defined group name, or a comma list of work-area labels that is
    turned into a group on the fly."""
    if not spec:
        raise UsageError("group mode needs --group")
    if spec in store.groups:
        return store.groups[spec]
    labels = [s.strip() for s in spec.split(",") if s.strip()]
    if not labels:
        raise UsageError("empty --group")
    ids = sorted({store.find_work_area(label).work_area_id for label in labels})
    for g in store.groups.values():
        if sorted(g.members) == ids:
            return g
    name = "+".join(ids)
    return store.define_group(name, ids)


# -- commands ------------------------------------------------------------------

def cmd_init(args) -> int:
    path = _store_path(args)
    if path.exists() and not args.force:
        raise UsageError(f"{path} already exists (use --force to overwrite)")
    store = Store()
    types = []
    if args.uml:
        types += bundled_types()
    if args.types:
        types += parse_corpus(Path(args.types).read_text(encoding="utf-8")).types
    for t in types:
        if t.name not in store.types:
            store.declare_type(t.name, t.fields, t.type_id)
    rules = bundled_catalog() if args.uml else []
    if args.catalog:
        rules += load_catalog(args.catalog)
    if rules:
        Engine(store).register_catalog(rules)
    path.parent.mkdir(parents=True, exist_ok=True)
    changelog.save(store, path)
    _out(f"initialized {path}: {len(store.types)} types, {len(rules)} rules")
    return EXIT_OK


def cmd_workarea(args) -> int:
    store = _load(args)
    if args.action == "add":
        parent = store.find_work_area(args.parent).work_area_id
        wa = store.create_work_area(parent, label=args.label)
        changelog.save(store, _store_path(args))
        _out(f"{wa.work_area_id}\t{wa.label}\t{parent}")
        return EXIT_OK
    for wa in sorted(store.work_areas.values(), key=lambda w: (w.created_at, w.work_area_id)):
        _out("\t".join([wa.work_area_id, wa.label or "-", wa.parent or "-", str(len(wa))]))
    return EXIT_OK


def cmd_group(args) -> int:
    store = _load(args)
    ids = [store.find_work_area(label).work_area_id
           for label in args.members.split(",") if label.strip()]
    g = store.define_group(args.name, ids)
    changelog.save(store, _store_path(args))
    _out(f"{g.group_id}\t{','.join(sorted(g.members))}")
    return EXIT_OK


def cmd_apply(args) -> int:
    creates = [parse_create(s) for s in args.create]
    sets = [parse_set(s) for s in args.changes]
    deletes = [parse_delete(s) for s in args.delete]
    if not (creates or sets or deletes):
        raise UsageError("nothing to apply")
    store = _load(args)
    wa = store.find_work_area(args.workarea).work_area_id
    engine = Engine(store)
    emitted = []
    engine.on_feedback(emitted.append)
    # creations first so values validate against the new types
    for aid, type_name in creates:
        store.create_artifact(wa, aid, type_name)
    for aid, prop, value, is_link in sets:
        if is_link:
            value = _link_value(store, wa, aid, prop, value)
        store.put(wa, aid, prop, value)
    for aid, prop in deletes:
        store.delete(wa, aid, prop)
    # only persist once every change went through
    changelog.save(store, _store_path(args))
    for fb in emitted:
        _out(fb.short())
    return EXIT_OK


def cmd_check(args) -> int:
    store = _load(args)
    wa = store.find_work_area(args.workarea).work_area_id
    group = _resolve_group(store, args.group) if args.mode == "group" else None
    if args.mode == "hierarchy" and args.group:
        raise UsageError("--group only applies to --mode group")
    engine = Engine(store)
    rows = engine.check(wa, group)
    changelog.save(store, _store_path(args))
    label = mode_label(group) if wa != PUBLIC else mode_label(None)
    status = EXIT_OK
    for subject, crd_id, result in rows:
        rule = engine.crds[crd_id].rule_id
        word = {True: "hold", False: "break", None: "error"}[result]
        if result is False and status == EXIT_OK:
            status = EXIT_FOUND
        if result is None:
            status = EXIT_ERROR
        if args.format == "csv":
            _out(",".join([rule, subject, word, label]))
        else:
            _out(f"{rule} {subject} {word}" + ("" if label == "hierarchy" else f" {label}"))
    for d in engine.diagnostics:
        sys.stderr.write(f"teamcheck: {d.cre}: {d.message}\n")
    return status


def cmd_commit(args) -> int:
    store = _load(args)
    Engine(store)
    if args.group:
        g = store.group(args.group)
        events = store.commit_group(g)
        src, target = f"group {g.group_id} ({','.join(sorted(g.members))})", PUBLIC
    else:
        if not args.workarea:
            raise UsageError("commit needs a work area or --group")
        wa = store.find_work_area(args.workarea)
        if wa.public:
            raise UsageError("the public work area cannot be committed")
        src, target = wa.work_area_id, wa.parent
        events = store.commit(wa.work_area_id)
    changelog.save(store, _store_path(args))
    counts = {"create": 0, "update": 0, "delete": 0}
    for e in events:
        counts[e.change.change_type] += 1
    _out(f"committed {len(events)} changes from {src} to {target} "
         f"({counts['create']} create, {counts['update']} update, {counts['delete']} delete)")
    return EXIT_OK


def _parse_generate(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError("--generate wants seed,n,partitions,density")
    try:
        return int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError:
        raise UsageError(f"bad --generate value {text!r}") from None


def cmd_replay(args) -> int:
    if args.generate:
        seed, n, parts, density = _parse_generate(args.generate)
        model = generate_corpus(seed, n, parts, density, commands=args.commands)
        name = args.name or f"gen-{seed}-{n}-{parts}"
    else:
        path = args.corpus or bundled_corpus_path()
        model = load_corpus(path, dangling=args.dangling)
        name = args.name or Path(str(path)).stem
        for diag in model.diagnostics:
            sys.stderr.write(f"teamcheck: {diag}\n")
    rules = load_catalog(args.catalog) if args.catalog else bundled_catalog()
    stream = to_commands(model)
    if args.no_group:
        group_spec = None
    elif args.group:
        group_spec = [g.strip() for g in args.group.split(",") if g.strip()]
    else:
        group_spec = list(stream.partitions)
    result = run_replay(stream, rules, group_spec, name=name, verify=args.verify)
    sys.stdout.write(report([result.metrics], args.format, timing=not args.no_timing))
    if args.figure:
        from .plotting import access_figure
        access_figure([result.metrics], args.figure, title=f"Property accesses: {name}")
    if args.verify and result.mismatches:
        sys.stderr.write(f"teamcheck: {len(result.mismatches)} verdicts differ from batch check\n")
        return EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teamcheck", description="Team-aware consistency checking over a change-log store.")
    p.add_argument("--store", help=f"change-log file (default ${ENV_STORE} or {DEFAULT_STORE})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="create an empty store")
    s.add_argument("--force", action="store_true", help="overwrite an existing store")
    s.add_argument("--uml", action="store_true", help="declare the bundled UML types and rules CR01-CR10")
    s.add_argument("--types", help="file with TYPE declarations")
    s.add_argument("--catalog", help="rule catalog file")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("workarea", help="add or list work areas")
    wsub = s.add_subparsers(dest="action", required=True)
    w = wsub.add_parser("add")
    w.add_argument("label")
    w.add_argument("--parent", default=PUBLIC)
    wsub.add_parser("list")
    s.set_defaults(func=cmd_workarea)

    s = sub.add_parser("group", help="define a group of work areas")
    gsub = s.add_subparsers(dest="action", required=True)
    g = gsub.add_parser("define")
    g.add_argument("name")
    g.add_argument("members", help="comma-separated work-area labels")
    s.set_defaults(func=cmd_group)

    s = sub.add_parser("apply", help="apply property changes in a work area")
    s.add_argument("workarea")
    s.add_argument("changes", nargs="*", help="artifact.prop=value or artifact.prop->id[,id]")
    s.add_argument("--create", action="append", default=[], metavar="ARTIFACT:TYPE")
    s.add_argument("--delete", action="append", default=[], metavar="ARTIFACT.PROP")
    s.set_defaults(func=cmd_apply)

    s = sub.add_parser("check", help="check the CREs living in a work area")
    s.add_argument("workarea")
    s.add_argument("--mode", choices=["hierarchy", "group"], default="hierarchy")
    s.add_argument("--group", help="group name or comma-separated work-area labels")
    s.add_argument("--format", choices=["table", "csv"], default="table")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("commit", help="commit a work area into its parent, or a group into public")
    s.add_argument("workarea", nargs="?")
    s.add_argument("--group", help="bulk-commit a defined group")
    s.set_defaults(func=cmd_commit)

    s = sub.add_parser("replay", help="replay a corpus and report access metrics")
    s.add_argument("corpus", nargs="?", help="corpus file (default: bundled example)")
    s.add_argument("--generate", metavar="SEED,N,PARTITIONS,DENSITY")
    s.add_argument("--commands", type=int, help="pad a generated corpus to this many commands")
    s.add_argument("--catalog", help="rule catalog (default: bundled CR01-CR10)")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--group", help="partition labels forming the group (default: all)")
    grp.add_argument("--no-group", action="store_true", help="check along the hierarchy only")
    s.add_argument("--format", choices=["table", "csv"], default="table")
    s.add_argument("--no-timing", action="store_true", help="omit the evaluation time column")
    s.add_argument("--figure", help="also write an access chart to this image file")
    s.add_argument("--name", help="row label")
    s.add_argument("--dangling", choices=["reject", "drop"], default="reject")
    s.add_argument("--verify", action="store_true", help="cross-check final verdicts against a batch run")
    s.set_defaults(func=cmd_replay)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    # change specs may follow --create/--delete options, which plain
    # parse_args rejects once the positional list has been consumed
    args, extra = parser.parse_known_args(argv)
    if extra:
        if args.command != "apply" or any(x.startswith("-") for x in extra):
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        args.changes += extra
    try:
        return args.func(args)
    except (UsageError, StoreError, CorpusError, CatalogError, RuleSyntaxError,
            ReplayError, EngineError, ValueError, OSError) as exc:
        sys.stderr.write(f"teamcheck: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
