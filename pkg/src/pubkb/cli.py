"""Command-line entry point for local work with the knowledge base.

Exit codes: 0 success, 1 user error, 2 internal error.  Every subcommand
supports --json for machine-readable output.
"""
from __future__ import annotations

import argparse
import getpass
import json
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import extract as extract_mod
from .api import ApiError, AuthManager, create_app
from .config import AppConfig, load_config
from .model import Author, record_to_dict
from .service import KnowledgeBase, SourceNotFound, ValidationFailed
from .storage import StorageError

_YEAR_IN_NAME = re.compile(r"(19|20)\d\d")
_TITLE_MAX = 120

INGEST_FORMATS = ("txt", "docx", "pdf", "xml")


class CliError(Exception):
    """User-facing failure; message printed, exit code 1."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pubkb", description=__doc__)
    parser.add_argument("--root", help="store root directory (overrides config/env)")
    parser.add_argument("--config", help="path to the JSON config file")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    p_init = sub.add_parser("init", help="create a new store root")
    p_init.add_argument("path")

    p_serve = sub.add_parser("serve", help="run the REST service")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--host", default="127.0.0.1")

    p_user = sub.add_parser("user", help="manage researcher profiles")
    user_sub = p_user.add_subparsers(dest="user_command")
    p_user_add = user_sub.add_parser("add")
    p_user_add.add_argument("login")
    p_user_add.add_argument("--password", help="prompted for when omitted")
    p_user_add.add_argument("--display-name", default="")

    p_ingest = sub.add_parser("ingest", help="extract, store, and index files")
    p_ingest.add_argument("paths", nargs="+")
    p_ingest.add_argument("--format", choices=INGEST_FORMATS, help="override extension sniffing")

    sub.add_parser("reindex", help="rebuild the search index from stored sources")

    p_onto = sub.add_parser("ontology", help="ontology operations")
    onto_sub = p_onto.add_subparsers(dest="ontology_command")
    onto_sub.add_parser("build")

    p_harvest = sub.add_parser("harvest", help="run a configured harvest source")
    p_harvest.add_argument("source_id")

    p_export = sub.add_parser("export", help="write the full knowledge base to a JSON file")
    p_export.add_argument("file")

    p_import = sub.add_parser("import", help="load a previously exported JSON dump")
    p_import.add_argument("file")

    return parser


def _make_config(args: argparse.Namespace) -> AppConfig:
    config = load_config(args.config)
    if args.root:
        config.root = Path(args.root)
    return config


def _open_kb(args: argparse.Namespace) -> KnowledgeBase:
    config = _make_config(args)
    if config.root is None:
        raise CliError("no store root configured (use --root, OBZP_ROOT, or a config file)")
    if not config.root.exists():
        raise CliError(f"store root does not exist: {config.root} (run `pubkb init` first)")
    return KnowledgeBase(config=config)


def _emit(payload: dict, args: argparse.Namespace, human: str) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    else:
        print(human)


# --- subcommands -----------------------------------------------------------


def _cmd_init(args: argparse.Namespace) -> int:
    root = Path(args.path)
    (root / "collections").mkdir(parents=True, exist_ok=True)
    (root / "blobs").mkdir(parents=True, exist_ok=True)
    _emit({"root": str(root)}, args, f"initialized store at {root}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = _make_config(args)
    if args.port is not None:
        config.port = args.port
    app = create_app(config=config)
    uvicorn.run(app, host=args.host, port=config.port)
    return 0


def _cmd_user_add(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    config = kb.config
    password = args.password or getpass.getpass("password: ")
    auth = AuthManager(
        kb, config.token_ttl_hours, config.pbkdf2_iterations,
        lambda: datetime.now(timezone.utc),
    )
    try:
        researcher_id = auth.register(args.login, password, args.display_name)
    except ApiError as exc:
        raise CliError(exc.message) from exc
    _emit(
        {"researcher_id": researcher_id, "login": args.login},
        args,
        f"created researcher {args.login} ({researcher_id})",
    )
    return 0


def _provisional_title(text: str, fallback: str) -> str:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped:
            return stripped[:_TITLE_MAX]
    return fallback


def _sniff_format(path: Path, override: str | None) -> str:
    if override:
        return override
    ext = path.suffix.lower().lstrip(".")
    if ext not in INGEST_FORMATS:
        raise CliError(f"cannot ingest {path}: unknown extension .{ext or '?'} (use --format)")
    return ext


def _cmd_ingest(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    jobs: list[tuple[Path, str]] = []
    for raw_path in args.paths:  # validate everything before touching the store
        path = Path(raw_path)
        if not path.is_file():
            raise CliError(f"no such file: {path}")
        jobs.append((path, _sniff_format(path, args.format)))
    results = []
    for path, fmt in jobs:
        data = path.read_bytes()
        try:
            extracted = extract_mod.extract_text(data, fmt, kb.config.extractor_plugins)
        except extract_mod.ExtractError as exc:
            raise CliError(f"cannot extract {path}: {exc}") from exc
        year_match = _YEAR_IN_NAME.search(path.name)
        year = int(year_match.group(0)) if year_match else kb.now().year
        record = kb.create_publication(
            {
                "title": _provisional_title(extracted.text, path.stem),
                "year": year,
                "language": extracted.language,
                "authors": [{"family": "(unattributed)", "given": "", "orcid": None}],
                "source": {"origin": "uploaded", "source_id": None},
            }
        )
        blob_id, _ = kb.attach_file(record.id, data, fmt)
        results.append(
            {
                "id": record.id,
                "path": str(path),
                "title": record.title,
                "language": extracted.language,
                "char_count": extracted.char_count,
                "blob_id": blob_id,
            }
        )
    _emit(
        {"ingested": results},
        args,
        "\n".join(f"{r['id']}  {r['language']:7s}  {r['title']}" for r in results),
    )
    return 0


def _cmd_reindex(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    count = kb.reindex()
    _emit({"indexed_fields": count}, args, f"reindexed {count} field documents")
    return 0


def _cmd_ontology_build(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    graph = kb.rebuild_ontology()
    _emit(
        {"nodes": len(graph.nodes), "edges": len(graph.edges)},
        args,
        f"ontology rebuilt: {len(graph.nodes)} nodes, {len(graph.edges)} edges",
    )
    return 0


def _cmd_harvest(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    try:
        summary = kb.run_harvest(args.source_id)
    except SourceNotFound:
        raise CliError(f"no harvest source: {args.source_id}") from None
    _emit(
        summary,
        args,
        f"harvest {args.source_id}: imported {summary['imported']}, "
        f"duplicates {summary['duplicates']}, rejects {len(summary['rejects'])}",
    )
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    dump = kb.export_dump()
    Path(args.file).write_text(json.dumps(dump, ensure_ascii=False, sort_keys=True), "utf-8")
    stats = {
        "file": args.file,
        "collections": len(dump["collections"]),
        "blobs": len(dump["blobs"]),
    }
    _emit(stats, args, f"exported {stats['collections']} collections, {stats['blobs']} blobs")
    return 0


def _cmd_import(args: argparse.Namespace) -> int:
    kb = _open_kb(args)
    path = Path(args.file)
    if not path.is_file():
        raise CliError(f"no such file: {path}")
    dump = json.loads(path.read_text("utf-8"))
    stats = kb.import_dump(dump)
    _emit(
        stats,
        args,
        f"imported {stats['documents']} documents, {stats['blobs']} blobs; "
        f"index rebuilt over {stats['indexed']} field documents",
    )
    return 0


def run(argv: list[str]) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage()
        return 1
    try:
        if args.command == "init":
            return _cmd_init(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "user":
            if args.user_command != "add":
                parser.parse_args([*argv, "--help"])  # prints usage
                return 1
            return _cmd_user_add(args)
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "reindex":
            return _cmd_reindex(args)
        if args.command == "ontology":
            if args.ontology_command != "build":
                return 1
            return _cmd_ontology_build(args)
        if args.command == "harvest":
            return _cmd_harvest(args)
        if args.command == "export":
            return _cmd_export(args)
        if args.command == "import":
            return _cmd_import(args)
        parser.print_usage()
        return 1
    except (CliError, ValidationFailed, StorageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal error
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
