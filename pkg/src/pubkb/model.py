"""Canonical domain types and the JSON metadata schema shared by every module.

Records are immutable values; the wire format is the snake_case JSON
produced by :func:`canonical_serialize` and accepted by :func:`parse_record`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable

KINDS = ("article", "inproceedings", "report", "patent", "other")
LANGUAGES = ("uk", "en", "ru", "unknown")
ORIGINS = ("manual", "uploaded", "harvested")
TABS = ("search", "upload", "ontology", "settings")
UI_LANGUAGES = ("uk", "en")
RESULT_KINDS = ("publication", "onto_node")
EDGE_KINDS = ("cooc", "isa")

YEAR_MIN = 1800
YEAR_MAX = 2100


class SchemaError(ValueError):
    """Incoming JSON does not match the documented record schema."""


@dataclass(frozen=True)
class Violation:
    """One failed invariant; ``field`` names the offending field, ``rule`` the rule."""

    field: str
    rule: str

    @property
    def code(self) -> str:
        return f"{self.field}.{self.rule}"

    def __str__(self) -> str:
        return self.code


@dataclass(frozen=True)
class Author:
    family: str
    given: str = ""
    orcid: str | None = None


@dataclass(frozen=True)
class Identifiers:
    doi: str | None = None
    url: str | None = None


@dataclass(frozen=True)
class Source:
    origin: str = "manual"
    source_id: str | None = None


@dataclass(frozen=True)
class PublicationRecord:
    """Canonical metadata of one publication."""

    id: str
    title: str
    year: int
    kind: str = "article"
    authors: tuple[Author, ...] = ()
    venue: str | None = None
    language: str = "unknown"
    keywords: tuple[str, ...] = ()
    abstract: str | None = None
    identifiers: Identifiers = field(default_factory=Identifiers)
    source: Source = field(default_factory=Source)
    blob_ids: tuple[str, ...] = ()
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    updated_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def with_updates(self, **changes: Any) -> "PublicationRecord":
        return replace(self, **changes)


@dataclass(frozen=True)
class ProfileSettings:
    visible_tabs: tuple[str, ...] = TABS
    ui_language: str = "uk"


@dataclass(frozen=True)
class ResearcherProfile:
    id: str
    login: str
    password_digest: str  # hex of the iterated salted digest, never the plaintext
    salt: str  # hex
    iterations: int
    display_name: str = ""
    settings: ProfileSettings = field(default_factory=ProfileSettings)


@dataclass(frozen=True)
class SearchHit:
    result_kind: str
    target_id: str
    score: float
    snippet: str | None = None


@dataclass(frozen=True)
class OntoNode:
    node_id: str
    label: str
    df: int
    weight: float
    provenance: tuple[str, ...] = ()


@dataclass(frozen=True)
class OntoEdge:
    src: str
    dst: str
    kind: str  # cooc | isa
    weight: float


@dataclass(frozen=True)
class OntoGraph:
    nodes: tuple[OntoNode, ...] = ()
    edges: tuple[OntoEdge, ...] = ()

    def node_labels(self) -> set[str]:
        return {n.label for n in self.nodes}


# --- validation ---------------------------------------------------------

def validate_record(record: PublicationRecord) -> list[Violation]:
    """Check every record invariant; an empty list means the record is valid."""
    out: list[Violation] = []
    if not record.id or not record.id.strip():
        out.append(Violation("id", "non_empty"))
    if not record.title or not record.title.strip():
        out.append(Violation("title", "non_empty"))
    if record.kind not in KINDS:
        out.append(Violation("kind", "enum"))
    if not isinstance(record.year, int) or not (YEAR_MIN <= record.year <= YEAR_MAX):
        out.append(Violation("year", "range"))
    if record.language not in LANGUAGES:
        out.append(Violation("language", "enum"))
    if record.source.origin not in ORIGINS:
        out.append(Violation("source.origin", "enum"))
    if not record.authors and record.source.origin != "harvested":
        out.append(Violation("authors", "empty_requires_harvested"))
    for i, author in enumerate(record.authors):
        if not author.family.strip():
            out.append(Violation(f"authors[{i}].family", "non_empty"))
    for i, kw in enumerate(record.keywords):
        if not kw.strip():
            out.append(Violation(f"keywords[{i}]", "non_empty"))
    return out


def validate_profile(profile: ResearcherProfile) -> list[Violation]:
    out: list[Violation] = []
    if not profile.login.strip():
        out.append(Violation("login", "non_empty"))
    out.extend(validate_settings(profile.settings))
    return out


def validate_settings(settings: ProfileSettings) -> list[Violation]:
    out: list[Violation] = []
    if any(tab not in TABS for tab in settings.visible_tabs):
        out.append(Violation("settings.visible_tabs", "enum"))
    if "settings" not in settings.visible_tabs:
        # the settings tab must stay reachable
        out.append(Violation("settings.visible_tabs", "settings_required"))
    if settings.ui_language not in UI_LANGUAGES:
        out.append(Violation("settings.ui_language", "enum"))
    return out


def graph_violations(graph: OntoGraph) -> list[Violation]:
    """Structural invariants of an ontology graph."""
    out: list[Violation] = []
    labels = [n.label.casefold() for n in graph.nodes]
    if len(labels) != len(set(labels)):
        out.append(Violation("nodes", "labels_unique"))
    known = {n.node_id for n in graph.nodes}
    for e in graph.edges:
        if e.src == e.dst:
            out.append(Violation("edges", "no_self_loops"))
        if e.kind not in EDGE_KINDS:
            out.append(Violation("edges.kind", "enum"))
        if e.src not in known or e.dst not in known:
            out.append(Violation("edges", "endpoints_exist"))
        if e.kind == "cooc" and not e.src < e.dst:
            out.append(Violation("edges", "cooc_ordered"))
    for n in graph.nodes:
        if n.weight < 0:
            out.append(Violation("nodes.weight", "non_negative"))
    if has_isa_cycle(graph):
        out.append(Violation("edges", "isa_acyclic"))
    return out


def has_isa_cycle(graph: OntoGraph) -> bool:
    adj: dict[str, list[str]] = {}
    for e in graph.edges:
        if e.kind == "isa":
            adj.setdefault(e.src, []).append(e.dst)
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[str, int] = {}

    def visit(u: str) -> bool:
        color[u] = GRAY
        for v in adj.get(u, ()):
            c = color.get(v, WHITE)
            if c == GRAY:
                return True
            if c == WHITE and visit(v):
                return True
        color[u] = BLACK
        return False

    return any(color.get(u, WHITE) == WHITE and visit(u) for u in list(adj))


# --- JSON (de)serialization ---------------------------------------------

def _ts_to_wire(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _ts_from_wire(raw: str) -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00")).astimezone(timezone.utc)
    except ValueError as exc:
        raise SchemaError(f"bad timestamp: {raw!r}") from exc


def record_to_dict(record: PublicationRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "kind": record.kind,
        "title": record.title,
        "authors": [
            {"family": a.family, "given": a.given, "orcid": a.orcid} for a in record.authors
        ],
        "year": record.year,
        "venue": record.venue,
        "language": record.language,
        "keywords": list(record.keywords),
        "abstract": record.abstract,
        "identifiers": {"doi": record.identifiers.doi, "url": record.identifiers.url},
        "source": {"origin": record.source.origin, "source_id": record.source.source_id},
        "blob_ids": list(record.blob_ids),
        "created_at": _ts_to_wire(record.created_at),
        "updated_at": _ts_to_wire(record.updated_at),
    }


_RECORD_KEYS = frozenset(
    (
        "id", "kind", "title", "authors", "year", "venue", "language", "keywords",
        "abstract", "identifiers", "source", "blob_ids", "created_at", "updated_at",
    )
)


def _require_keys(data: dict, allowed: Iterable[str], where: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise SchemaError(f"unknown keys in {where}: {sorted(unknown)}")


def record_from_dict(data: dict[str, Any]) -> PublicationRecord:
    """Strict parse of the full wire form; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise SchemaError("record must be a JSON object")
    _require_keys(data, _RECORD_KEYS, "record")
    missing = _RECORD_KEYS - set(data)
    if missing:
        raise SchemaError(f"missing keys in record: {sorted(missing)}")
    authors = []
    for i, raw in enumerate(data["authors"]):
        if not isinstance(raw, dict):
            raise SchemaError(f"authors[{i}] must be an object")
        _require_keys(raw, ("family", "given", "orcid"), f"authors[{i}]")
        authors.append(
            Author(
                family=str(raw.get("family", "")),
                given=str(raw.get("given", "")),
                orcid=raw.get("orcid"),
            )
        )
    ids_raw = data["identifiers"] or {}
    _require_keys(ids_raw, ("doi", "url"), "identifiers")
    src_raw = data["source"] or {}
    _require_keys(src_raw, ("origin", "source_id"), "source")
    if not isinstance(data["year"], int) or isinstance(data["year"], bool):
        raise SchemaError("year must be an integer")
    return PublicationRecord(
        id=str(data["id"]),
        kind=str(data["kind"]),
        title=str(data["title"]),
        authors=tuple(authors),
        year=data["year"],
        venue=data["venue"],
        language=str(data["language"]),
        keywords=tuple(str(k) for k in data["keywords"]),
        abstract=data["abstract"],
        identifiers=Identifiers(doi=ids_raw.get("doi"), url=ids_raw.get("url")),
        source=Source(
            origin=str(src_raw.get("origin", "manual")),
            source_id=src_raw.get("source_id"),
        ),
        blob_ids=tuple(str(b) for b in data["blob_ids"]),
        created_at=_ts_from_wire(data["created_at"]),
        updated_at=_ts_from_wire(data["updated_at"]),
    )


def canonical_serialize(record: PublicationRecord) -> bytes:
    """Deterministic UTF-8 JSON: sorted keys, no insignificant whitespace.

    Rejects records that fail :func:`validate_record`.
    """
    violations = validate_record(record)
    if violations:
        raise ValueError("invalid record: " + ", ".join(str(v) for v in violations))
    return json.dumps(
        record_to_dict(record), sort_keys=True, ensure_ascii=False, separators=(",", ":")
    ).encode("utf-8")


def parse_record(raw: bytes | str | dict) -> PublicationRecord:
    if isinstance(raw, (bytes, str)):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    else:
        data = raw
    return record_from_dict(data)


# --- profile wire helpers -------------------------------------------------

def profile_to_dict(profile: ResearcherProfile) -> dict[str, Any]:
    return {
        "id": profile.id,
        "login": profile.login,
        "password_digest": profile.password_digest,
        "salt": profile.salt,
        "iterations": profile.iterations,
        "display_name": profile.display_name,
        "settings": {
            "visible_tabs": list(profile.settings.visible_tabs),
            "ui_language": profile.settings.ui_language,
        },
    }


def profile_from_dict(data: dict[str, Any]) -> ResearcherProfile:
    settings = data.get("settings") or {}
    return ResearcherProfile(
        id=data["id"],
        login=data["login"],
        password_digest=data["password_digest"],
        salt=data["salt"],
        iterations=int(data["iterations"]),
        display_name=data.get("display_name", ""),
        settings=ProfileSettings(
            visible_tabs=tuple(settings.get("visible_tabs", TABS)),
            ui_language=settings.get("ui_language", "uk"),
        ),
    )
