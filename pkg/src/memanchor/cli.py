"""Command-line interface: build, query, analyze, stats."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .backend.embedding import hashed_embedding
from .backend.providers import Extractor, MockProvider, RemoteConfig, RemoteProvider
from .build import MODES, BuildConfig, build_kb, format_usage
from .errors import (
    AnchorError,
    ArgumentError,
    DegenerateDesignError,
    ExtractionParseError,
    KBValidationError,
    KBVersionError,
    ProviderError,
    SchemaError,
    StateError,
)
from .ingest import load_conversation_document
from .injection import (
    DEFAULT_BUDGET,
    assemble_prompt,
    format_injection,
    generate_module_queries,
    parse_memories,
    round_robin_merge,
)
from .kb import dumps, load_kb, save_kb
from .retrieval import DEFAULT_CAP, DEFAULT_K, DEFAULT_RESERVED, DEFAULT_SIGMA, RetrievalConfig, select_anchors

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_INTERNAL = 70

BUILD_DEFAULTS = {
    "batch_entity": 60,
    "batch_event": 60,
    "batch_topic": 150,
    "overlap": 0.2,
    "mode": "default",
    "provider": "mock",
    "tau": 0.6,
    "cooccur_threshold": 3,
}

log = logging.getLogger("memanchor")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def demo_path(*parts) -> Path:
    return Path(str(resources.files("memanchor").joinpath("data", "demo", *parts)))


def _read_config(path):
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON config ({exc})") from exc


def make_provider(name, fixtures=None, config_path=None):
    if name == "mock":
        return MockProvider(fixtures or demo_path("fixtures"))
    return RemoteProvider(RemoteConfig.load(config_path))


def build_options(args) -> dict:
    """Defaults, then the config file's "build" section, then explicit flags."""
    opts = dict(BUILD_DEFAULTS)
    section = _read_config(args.config).get("build", {})
    unknown = set(section) - set(BUILD_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown build option(s) in config: {', '.join(sorted(unknown))}")
    opts.update(section)
    for key in BUILD_DEFAULTS:
        value = getattr(args, key)
        if value is not None:
            opts[key] = value
    if opts["mode"] not in MODES:
        raise UsageError(f"mode must be one of {', '.join(MODES)}")
    if opts["provider"] not in ("mock", "remote"):
        raise UsageError("provider must be mock or remote")
    return opts


def cmd_build(args) -> int:
    opts = build_options(args)
    try:
        cfg = BuildConfig(opts["batch_entity"], opts["batch_event"], opts["batch_topic"], opts["overlap"],
                          opts["tau"], opts["cooccur_threshold"])
    except ArgumentError as exc:
        raise UsageError(str(exc)) from exc
    conversation = load_conversation_document(args.input)
    extractor = Extractor(make_provider(opts["provider"], args.fixtures, args.config))
    kb, report = build_kb(conversation, extractor, cfg, opts["mode"])
    save_kb(kb, args.out)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"built {len(kb.entities.profiles)} entities, {len(kb.events.events)} events "
          f"in {len(kb.events.traces)} traces, {len(kb.topics.clusters)} topics -> {args.out}")
    print(format_usage(kb.usage, report.wall_s))
    return EXIT_OK


def _retrieval_config(args) -> RetrievalConfig:
    reserved = args.temporal_reserved if args.temporal_reserved is not None else min(DEFAULT_RESERVED, args.k)
    try:
        return RetrievalConfig.uniform(args.k, args.sigma, args.candidate_cap, reserved)
    except ArgumentError as exc:
        raise UsageError(str(exc)) from exc


def cmd_query(args) -> int:
    if args.budget < 0:
        raise UsageError("--budget must be >= 0")
    cfg = _retrieval_config(args)
    kb = load_kb(args.kb)
    embed = hashed_embedding
    if args.provider == "remote":
        embed = make_provider("remote", config_path=args.config).embed
    selection = select_anchors(kb, args.query, cfg, embed)
    if args.emit == "selection":
        sys.stdout.write(dumps(selection.to_dict()))
        return EXIT_OK
    if args.emit == "queries":
        expanded = round_robin_merge(*generate_module_queries(selection), args.budget)
        for module, query in zip(expanded.provenance, expanded.queries):
            print(f"{module}\t{query}")
        return EXIT_OK
    memories = None
    if args.memories:
        memories = parse_memories(Path(args.memories).read_text(encoding="utf-8"))
    sys.stdout.write(assemble_prompt(args.query, memories, format_injection(selection)) + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .gain.model import load_points
    from .gain.report import analyze, format_report, write_outputs

    points = load_points(args.csv)
    report = analyze(points)
    print(format_report(report))
    if args.out:
        paths = write_outputs(points, report, args.out)
        for kind in ("json", "csv", "figure"):
            print(f"wrote {paths[kind]}")
    return EXIT_OK


def cmd_stats(args) -> int:
    kb = load_kb(args.kb)
    m = kb.manifest
    print(f"conversation: {m['conversation_id']}  mode: {m['build_mode']}  created: {m['created_at']}")
    lo, hi = m["utterance_seq_range"]
    print(f"utterances: seq {lo}-{hi}")
    n_attrs = sum(len(p.attributes) for p in kb.entities.profiles.values())
    n_rel = sum(len(p.relations) for p in kb.entities.profiles.values())
    n_inf = sum(r.inferred for p in kb.entities.profiles.values() for r in p.relations)
    print(f"entities: {len(kb.entities.profiles)} ({n_attrs} attributes, {n_rel} relations, {n_inf} inferred)")
    print(f"events: {len(kb.events.events)} in {len(kb.events.traces)} traces")
    print(f"topics: {len(kb.topics.clusters)}")
    print(format_usage(kb.usage, 0.0).rsplit("\n", 1)[0])
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="memanchor", description="Build and query structured conversation memory anchors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="extract anchors from a conversation into a KB directory")
    b.add_argument("--input", required=True, help="conversation JSON file")
    b.add_argument("--out", required=True, help="KB output directory")
    b.add_argument("--batch-entity", type=int, help="entity batch size (default 60)")
    b.add_argument("--batch-event", type=int, help="event batch size (default 60)")
    b.add_argument("--batch-topic", type=int, help="topic batch size (default 150)")
    b.add_argument("--overlap", type=float, help="topic batch overlap fraction (default 0.2)")
    b.add_argument("--mode", choices=MODES, help="build mode (default: default)")
    b.add_argument("--provider", choices=("mock", "remote"), help="model provider (default: mock)")
    b.add_argument("--tau", type=float, help="event merge threshold (default 0.6)")
    b.add_argument("--cooccur-threshold", type=int, help="co-mentions needed to infer a relation (default 3)")
    b.add_argument("--fixtures", help="mock fixtures directory (default: bundled demo fixtures)")
    b.add_argument("--config", help="JSON config with optional 'build' and 'provider' sections")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="select anchors for a question and emit them")
    q.add_argument("--kb", required=True, help="KB directory")
    q.add_argument("--query", required=True, help="question text")
    q.add_argument("--k", type=int, default=DEFAULT_K, help="anchors per module (default 5)")
    q.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="minimum similarity (default 0.25)")
    q.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="expanded query budget (default 9)")
    q.add_argument("--emit", choices=("selection", "queries", "prompt"), default="selection")
    q.add_argument("--memories", help="host memories file with '=== <speaker> ===' sections")
    q.add_argument("--temporal-reserved", type=int, help="event slots reserved for time matches (default 2)")
    q.add_argument("--candidate-cap", type=int, default=DEFAULT_CAP, help="native matches per module (default 50)")
    q.add_argument("--provider", choices=("mock", "remote"), default="mock", help="embedding provider")
    q.add_argument("--config", help="JSON config with a 'provider' section (remote only)")
    q.set_defaults(func=cmd_query)

    a = sub.add_parser("analyze", help="fit the gain model regressions")
    a.add_argument("--csv", help="host,metric,base,delta CSV (default: bundled five-host data)")
    a.add_argument("--out", help="directory for report.json, fits.csv and gain_vs_base.png")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("stats", help="summarize a KB directory")
    s.add_argument("--kb", required=True, help="KB directory")
    s.set_defaults(func=cmd_stats)
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (FileNotFoundError, IsADirectoryError)):
        return EXIT_MISSING
    if isinstance(exc, (DegenerateDesignError, SchemaError, KBVersionError, KBValidationError)):
        return EXIT_DATA
    if isinstance(exc, (ProviderError, ExtractionParseError, StateError)):
        return EXIT_INTERNAL
    if isinstance(exc, ArgumentError):
        return EXIT_DATA
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (AnchorError, UsageError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
