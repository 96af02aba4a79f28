"""Pulls publication metadata from configured external sources, normalizes
it to publication records, and deduplicates against the existing corpus.

Two adapters ship: a paginated JSON feed fetched over HTTP and a local
file fixture.  Real CRIS protocols can be added behind the same adapter
boundary.  The feed wire format is ``{"items": [...], "next_page": url?}``.
"""
from __future__ import annotations

import json
import re
import time
import urllib.request
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

from .model import (
    Author,
    Identifiers,
    PublicationRecord,
    Source,
    Violation,
    validate_record,
)

ADAPTERS = ("json_feed", "file_fixture")

FUZZY_DUPLICATE_THRESHOLD = 0.9


class HarvestConfigError(ValueError):
    pass


class ImportAborted(RuntimeError):
    """Storage failed mid-import; ``imported`` counts the records that made it."""

    def __init__(self, imported: int, cause: Exception) -> None:
        super().__init__(f"import aborted after {imported} records: {cause}")
        self.imported = imported


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    adapter: str
    endpoint: str
    field_map: dict[str, str]  # source field -> record field
    politeness_delay_ms: int = 0
    page_limit: int | None = None

    def __post_init__(self) -> None:
        if self.adapter not in ADAPTERS:
            raise HarvestConfigError(f"unknown adapter: {self.adapter!r}")
        mapped = set(self.field_map.values())
        if not {"title", "year"} <= mapped:
            raise HarvestConfigError("field_map must map at least title and year")
        if self.politeness_delay_ms < 0:
            raise HarvestConfigError("politeness_delay_ms must be >= 0")

    def to_doc(self) -> dict:
        return {
            "source_id": self.source_id,
            "adapter": self.adapter,
            "endpoint": self.endpoint,
            "field_map": dict(self.field_map),
            "politeness_delay_ms": self.politeness_delay_ms,
            "page_limit": self.page_limit,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SourceConfig":
        return cls(
            source_id=doc["source_id"],
            adapter=doc["adapter"],
            endpoint=doc["endpoint"],
            field_map=dict(doc["field_map"]),
            politeness_delay_ms=int(doc.get("politeness_delay_ms", 0)),
            page_limit=doc.get("page_limit"),
        )


@dataclass(frozen=True)
class Reject:
    item_index: int
    reason: str
    violations: tuple[Violation, ...] = ()


@dataclass
class HarvestResult:
    candidates: list[PublicationRecord] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    error: str | None = None  # network failure marker; candidates are partial


def _default_fetch(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=30) as resp:
        return resp.read()


def _coerce_authors(raw: Any) -> tuple[Author, ...]:
    if raw is None:
        return ()
    if isinstance(raw, str):
        raw = [raw]
    authors = []
    for item in raw:
        if isinstance(item, str):
            family, _, given = item.partition(",")
            authors.append(Author(family=family.strip(), given=given.strip()))
        elif isinstance(item, dict):
            authors.append(
                Author(
                    family=str(item.get("family", "")).strip(),
                    given=str(item.get("given", "")).strip(),
                    orcid=item.get("orcid"),
                )
            )
    return tuple(authors)


def _coerce_year(raw: Any) -> int:
    if isinstance(raw, bool):
        raise ValueError("year must be an integer")
    if isinstance(raw, int):
        return raw
    text = str(raw).strip()
    match = re.search(r"(19|20)\d\d", text)
    if match:
        return int(match.group(0))
    return int(text)


def map_item(
    item: dict,
    source: SourceConfig,
    now: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
) -> PublicationRecord:
    """Map one raw source item onto a provisional harvested record."""
    mapped: dict[str, Any] = {}
    for src_field, dst_field in source.field_map.items():
        if src_field in item:
            mapped[dst_field] = item[src_field]
    year = _coerce_year(mapped.get("year", ""))
    stamp = now()
    return PublicationRecord(
        id=uuid.uuid4().hex,
        title=str(mapped.get("title", "")).strip(),
        year=year,
        kind=str(mapped.get("kind", "other")),
        authors=_coerce_authors(mapped.get("authors")),
        venue=(str(mapped["venue"]) if mapped.get("venue") is not None else None),
        language=str(mapped.get("language", "unknown")),
        keywords=tuple(str(k) for k in mapped.get("keywords", ())),
        abstract=(str(mapped["abstract"]) if mapped.get("abstract") is not None else None),
        identifiers=Identifiers(doi=mapped.get("doi"), url=mapped.get("url")),
        source=Source(origin="harvested", source_id=source.source_id),
        created_at=stamp,
        updated_at=stamp,
    )


def harvest(
    source: SourceConfig,
    fetch: Callable[[str], bytes] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> HarvestResult:
    """Fetch and map all pages; invalid items land in ``rejects`` with their
    violations instead of being silently dropped."""
    result = HarvestResult()
    fetch = fetch or _default_fetch
    items: list[dict] = []
    if source.adapter == "file_fixture":
        try:
            payload = json.loads(Path(source.endpoint).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            result.error = f"cannot read fixture {source.endpoint}: {exc}"
            return result
        items = payload["items"] if isinstance(payload, dict) else payload
    else:
        url: str | None = source.endpoint
        pages = 0
        while url:
            if pages > 0:
                sleep(source.politeness_delay_ms / 1000.0)
            try:
                payload = json.loads(fetch(url))
            except Exception as exc:  # network failure: keep partial results
                result.error = f"fetch failed for {url}: {exc}"
                break
            items.extend(payload.get("items", []))
            url = payload.get("next_page")
            pages += 1
            if source.page_limit is not None and pages >= source.page_limit:
                break

    for i, item in enumerate(items):
        if not isinstance(item, dict):
            result.rejects.append(Reject(item_index=i, reason="item is not an object"))
            continue
        try:
            record = map_item(item, source)
        except (ValueError, TypeError) as exc:
            result.rejects.append(Reject(item_index=i, reason=f"unmappable item: {exc}"))
            continue
        violations = validate_record(record)
        if violations:
            result.rejects.append(
                Reject(
                    item_index=i,
                    reason="validation failed: " + ", ".join(str(v) for v in violations),
                    violations=tuple(violations),
                )
            )
        else:
            result.candidates.append(record)
    return result


# --- deduplication ---------------------------------------------------------


def normalize_title(title: str) -> str:
    lowered = title.casefold()
    stripped = "".join(ch if ch.isalnum() or ch.isspace() else " " for ch in lowered)
    return " ".join(stripped.split())


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def title_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - levenshtein(a, b) / longest


@dataclass
class DedupeResult:
    new: list[PublicationRecord] = field(default_factory=list)
    duplicates: list[tuple[PublicationRecord, str]] = field(default_factory=list)


def dedupe_candidates(
    candidates: Iterable[PublicationRecord],
    existing: Iterable[PublicationRecord],
) -> DedupeResult:
    """A candidate duplicates an existing record iff the years are equal and
    the normalized titles match exactly or at >= 0.9 Levenshtein similarity."""
    known = [(rec.id, rec.year, normalize_title(rec.title)) for rec in existing]
    result = DedupeResult()
    for cand in candidates:
        norm = normalize_title(cand.title)
        matched: str | None = None
        for known_id, year, known_norm in known:
            if year != cand.year:
                continue
            if norm == known_norm or title_similarity(norm, known_norm) >= FUZZY_DUPLICATE_THRESHOLD:
                matched = known_id
                break
        if matched is None:
            result.new.append(cand)
            known.append((cand.id, cand.year, norm))  # later candidates dedupe against it
        else:
            result.duplicates.append((cand, matched))
    return result


def import_records(records: Iterable[PublicationRecord], kb) -> int:
    """Persist and index validated records through the knowledge base;
    aborts on the first storage error, reporting how many landed."""
    imported = 0
    for record in records:
        try:
            kb.add_publication(record)
        except Exception as exc:
            raise ImportAborted(imported, exc) from exc
        imported += 1
    return imported
