"""Orchestration shared by the REST service and the CLI: the ingest
pipeline (extract -> analyze -> store -> index), search with snippets,
ontology rebuilds, and the export/import dump.

Readers always see a complete index/graph snapshot: mutations copy the
current snapshot, change the copy, persist it, and swap the reference
under a lock.
"""
from __future__ import annotations

import base64
import threading
import uuid
from datetime import datetime, timezone
from typing import Callable

from . import extract as extract_mod
from . import harvester as harvester_mod
from . import ontology as ontology_mod
from .config import AppConfig
from .index import DocRef, EmptyQuery, InvertedIndex, parse_query, snippet
from .lingua import Lingua, default_lingua
from .model import (
    OntoGraph,
    PublicationRecord,
    SchemaError,
    SearchHit,
    Violation,
    record_from_dict,
    record_to_dict,
    validate_record,
)
from .storage import BLOB_META_COLLECTION, Store, open_store

PUBLICATIONS = "publications"
EXTRACTED = "extracted"
SOURCES = "sources"
ONTOLOGY = "ontology"
INDEX_SNAPSHOTS = "index_snapshots"
OVERRIDES = "onto_overrides"
CURRENT = "current"

_INDEXED_FIELDS = ("title", "abstract", "keywords", "body")


class ValidationFailed(ValueError):
    def __init__(self, violations: list[Violation]) -> None:
        super().__init__(", ".join(str(v) for v in violations))
        self.violations = violations


class PublicationNotFound(KeyError):
    pass


class SourceNotFound(KeyError):
    pass


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def query_language(raw: str) -> str:
    """Queries are too short for the document-level detector; the script
    of the query text decides which lemmatizer applies."""
    cyr = sum(1 for ch in raw if "Ѐ" <= ch <= "ӿ")
    lat = sum(1 for ch in raw.lower() if "a" <= ch <= "z")
    if cyr > lat:
        return "uk"
    if lat > cyr:
        return "en"
    return "unknown"


class KnowledgeBase:
    def __init__(
        self,
        store: Store | None = None,
        config: AppConfig | None = None,
        lingua: Lingua | None = None,
        now: Callable[[], datetime] = _utcnow,
    ) -> None:
        self.config = config or AppConfig()
        self.store = store or open_store(self.config.backend, self.config.root)
        self.lingua = lingua or default_lingua()
        self.now = now
        self._write_lock = threading.Lock()
        self._index = self._load_index()

    # ---- index snapshot management ----

    def _load_index(self) -> InvertedIndex:
        doc = self.store.get_document(INDEX_SNAPSHOTS, CURRENT)
        if doc is not None:
            try:
                return InvertedIndex.from_doc(doc)
            except Exception:
                pass  # derived data: fall through and rebuild from sources
        return self._rebuild_index_from_sources()

    def _swap_index(self, mutate: Callable[[InvertedIndex], None]) -> None:
        with self._write_lock:
            candidate = self._index.copy()
            mutate(candidate)
            self.store.put_document(INDEX_SNAPSHOTS, CURRENT, candidate.to_doc())
            self._index = candidate

    @property
    def index(self) -> InvertedIndex:
        return self._index

    def reindex(self) -> int:
        with self._write_lock:
            candidate = self._rebuild_index_from_sources()
            self.store.put_document(INDEX_SNAPSHOTS, CURRENT, candidate.to_doc())
            self._index = candidate
            return candidate.doc_count

    def _rebuild_index_from_sources(self) -> InvertedIndex:
        idx = InvertedIndex()
        for _, doc in self.store.list_documents(PUBLICATIONS).items:
            record = record_from_dict(doc)
            self._index_publication(idx, record)
        graph = self.current_graph()
        if graph is not None:
            for node in graph.nodes:
                self._index_node(idx, node.node_id, node.label)
        return idx

    # ---- per-record index plumbing ----

    def _field_language(self, record: PublicationRecord, text: str) -> str:
        if record.language != "unknown":
            return record.language
        return extract_mod.detect_language(text)[0]

    def _body_text(self, record: PublicationRecord) -> tuple[str, str]:
        """Concatenated extracted text of the record's blobs plus its language."""
        chunks: list[str] = []
        language = record.language
        for blob_id in record.blob_ids:
            doc = self.store.get_document(EXTRACTED, blob_id)
            if doc:
                chunks.append(doc["text"])
                if doc.get("language") and doc["language"] != "unknown":
                    language = doc["language"]
        return "\n\n".join(chunks), language

    def _target_meta(self, record: PublicationRecord) -> dict:
        return {
            "year": record.year,
            "kind": record.kind,
            "authors": [a.family for a in record.authors],
        }

    def _index_publication(self, idx: InvertedIndex, record: PublicationRecord) -> None:
        meta = self._target_meta(record)
        fields: dict[str, tuple[str, str]] = {}
        fields["title"] = (record.title, self._field_language(record, record.title))
        if record.abstract:
            fields["abstract"] = (record.abstract, self._field_language(record, record.abstract))
        if record.keywords:
            joined = "\n".join(record.keywords)
            fields["keywords"] = (joined, self._field_language(record, joined))
        body, body_lang = self._body_text(record)
        if body:
            fields["body"] = (body, body_lang)
        for fname, (text, language) in fields.items():
            idx.index_document(
                DocRef("publication", record.id, fname),
                self.lingua.analyze(text, language),
                target_meta=meta,
            )

    def _index_node(self, idx: InvertedIndex, node_id: str, label: str) -> None:
        # labels are already lemmas; analyzing with language=unknown keeps
        # them as-is while still matching lemmatized query terms
        idx.index_document(DocRef("onto_node", node_id, "label"), self.lingua.analyze(label, "unknown"))

    # ---- publications ----

    def add_publication(self, record: PublicationRecord) -> PublicationRecord:
        violations = validate_record(record)
        if violations:
            raise ValidationFailed(violations)
        self.store.put_document(PUBLICATIONS, record.id, record_to_dict(record))
        self._swap_index(
            lambda idx: (idx.remove_target(record.id), self._index_publication(idx, record))
        )
        return record

    _CREATE_KEYS = frozenset(
        ("kind", "title", "authors", "year", "venue", "language", "keywords",
         "abstract", "identifiers", "source")
    )

    def create_publication(self, fields: dict) -> PublicationRecord:
        unknown = set(fields) - self._CREATE_KEYS
        if unknown:
            raise SchemaError(f"unknown keys in publication payload: {sorted(unknown)}")
        stamp = self.now()
        record = record_from_dict(
            {
                "id": uuid.uuid4().hex,
                "kind": fields.get("kind", "article"),
                "title": fields.get("title", ""),
                "authors": fields.get("authors", []),
                "year": fields.get("year", 0),
                "venue": fields.get("venue"),
                "language": fields.get("language", "unknown"),
                "keywords": fields.get("keywords", []),
                "abstract": fields.get("abstract"),
                "identifiers": fields.get("identifiers", {}),
                "source": fields.get("source", {"origin": "manual", "source_id": None}),
                "blob_ids": [],
                "created_at": stamp.isoformat(),
                "updated_at": stamp.isoformat(),
            }
        )
        return self.add_publication(record)

    def get_publication(self, pub_id: str) -> PublicationRecord:
        doc = self.store.get_document(PUBLICATIONS, pub_id)
        if doc is None:
            raise PublicationNotFound(pub_id)
        return record_from_dict(doc)

    def list_publications(
        self,
        year: int | None = None,
        kind: str | None = None,
        page: int = 1,
        page_size: int = 20,
    ) -> tuple[list[PublicationRecord], int]:
        where: dict = {}
        if year is not None:
            where["year"] = year
        if kind is not None:
            where["kind"] = kind
        page_data = self.store.list_documents(PUBLICATIONS, where or None, page, page_size)
        return [record_from_dict(doc) for _, doc in page_data.items], page_data.total

    def update_publication(self, pub_id: str, fields: dict) -> PublicationRecord:
        current = self.get_publication(pub_id)
        if "id" in fields and fields["id"] != pub_id:
            raise SchemaError("body id does not match the path id")
        merged = record_to_dict(current)
        for key, value in fields.items():
            if key in ("id", "created_at", "updated_at", "blob_ids"):
                continue  # server-controlled
            merged[key] = value
        merged["updated_at"] = self.now().isoformat()
        record = record_from_dict(merged)
        return self.add_publication(record)

    def delete_publication(self, pub_id: str) -> None:
        if self.store.get_document(PUBLICATIONS, pub_id) is None:
            raise PublicationNotFound(pub_id)
        self.store.delete_document(PUBLICATIONS, pub_id)
        self._swap_index(lambda idx: idx.remove_target(pub_id))

    # ---- file attachment / ingest pipeline ----

    def attach_file(
        self, pub_id: str, data: bytes, fmt: str
    ) -> tuple[str, extract_mod.ExtractedText]:
        record = self.get_publication(pub_id)
        extracted = extract_mod.extract_text(data, fmt, self.config.extractor_plugins)
        blob_id = self.store.put_blob(data, fmt)
        self.store.put_document(
            EXTRACTED,
            blob_id,
            {
                "text": extracted.text,
                "char_count": extracted.char_count,
                "language": extracted.language,
                "language_confidence": extracted.language_confidence,
                "warnings": list(extracted.warnings),
            },
        )
        blob_ids = tuple(dict.fromkeys(record.blob_ids + (blob_id,)))
        language = record.language
        if language == "unknown" and extracted.language != "unknown":
            language = extracted.language
        updated = record.with_updates(
            blob_ids=blob_ids, language=language, updated_at=self.now()
        )
        self.add_publication(updated)
        return blob_id, extracted

    # ---- search ----

    def search(self, raw_query: str, scope: str = "all", limit: int = 20) -> list[SearchHit]:
        language = query_language(raw_query)
        query = parse_query(raw_query, language, self.lingua)
        idx = self._index
        hits = idx.search(query, limit=len(idx.doc_stats) + 1)
        if scope == "publications":
            hits = [h for h in hits if h.result_kind == "publication"]
        elif scope == "ontology":
            hits = [h for h in hits if h.result_kind == "onto_node"]
        hits = hits[:limit]
        terms = query.scoring_terms()
        return [self._with_snippet(h, terms) for h in hits]

    def _with_snippet(self, hit: SearchHit, terms: list[str]) -> SearchHit:
        if hit.result_kind != "publication":
            return hit
        try:
            record = self.get_publication(hit.target_id)
        except PublicationNotFound:
            return hit
        body, body_lang = self._body_text(record)
        for text, language in (
            (body, body_lang),
            (record.abstract or "", self._field_language(record, record.abstract or "")),
            (record.title, self._field_language(record, record.title)),
        ):
            if not text:
                continue
            analyzed = self.lingua.analyze(text, language)
            if any(tok.lemma in set(terms) for tok in analyzed):
                return SearchHit(
                    result_kind=hit.result_kind,
                    target_id=hit.target_id,
                    score=hit.score,
                    snippet=snippet(text, analyzed, terms),
                )
        fallback = body or record.abstract or record.title
        return SearchHit(
            result_kind=hit.result_kind,
            target_id=hit.target_id,
            score=hit.score,
            snippet=fallback[:160],
        )

    # ---- ontology ----

    def current_graph(self) -> OntoGraph | None:
        doc = self.store.get_document(ONTOLOGY, CURRENT)
        if doc is None:
            return None
        return ontology_mod.graph_from_doc(doc)

    def _analyzed_corpus(self) -> dict[str, list]:
        corpus = {}
        for _, doc in self.store.list_documents(PUBLICATIONS).items:
            record = record_from_dict(doc)
            body, body_lang = self._body_text(record)
            parts = [record.title]
            if record.abstract:
                parts.append(record.abstract)
            if body:
                parts.append(body)
            text = "\n".join(parts)
            language = body_lang if body else self._field_language(record, text)
            corpus[record.id] = self.lingua.analyze(text, language)
        return corpus

    def rebuild_ontology(self) -> OntoGraph:
        corpus = self._analyzed_corpus()
        if not corpus:
            graph = OntoGraph()
        else:
            graph = ontology_mod.build_ontograph(corpus, self.config.ontology)
        overrides = [doc for _, doc in self.store.list_documents(OVERRIDES).items]
        if overrides:
            graph, _ = ontology_mod.apply_overrides(graph, overrides)
        self.store.put_document(ONTOLOGY, CURRENT, ontology_mod.graph_to_doc(graph))

        def mutate(idx: InvertedIndex) -> None:
            for ref in list(idx.doc_stats):
                if ref.result_kind == "onto_node":
                    idx.remove_document(ref)
            for node in graph.nodes:
                self._index_node(idx, node.node_id, node.label)

        self._swap_index(mutate)
        return graph

    def graph_json(self, min_weight: float | None = None) -> dict:
        graph = self.current_graph() or OntoGraph()
        return ontology_mod.export_graph(graph, min_weight)

    def related(self, pub_id: str, k: int = 5) -> list[tuple[str, float]]:
        vectors = ontology_mod.build_term_vectors(self._analyzed_corpus())
        return ontology_mod.related_documents(vectors, pub_id, k)

    # ---- harvesting ----

    def put_source(self, source: harvester_mod.SourceConfig) -> None:
        self.store.put_document(SOURCES, source.source_id, source.to_doc())

    def get_source(self, source_id: str) -> harvester_mod.SourceConfig:
        doc = self.store.get_document(SOURCES, source_id)
        if doc is None:
            raise SourceNotFound(source_id)
        return harvester_mod.SourceConfig.from_doc(doc)

    def run_harvest(self, source_id: str) -> dict:
        source = self.get_source(source_id)
        result = harvester_mod.harvest(source)
        existing = [
            record_from_dict(doc) for _, doc in self.store.list_documents(PUBLICATIONS).items
        ]
        decision = harvester_mod.dedupe_candidates(result.candidates, existing)
        imported = harvester_mod.import_records(decision.new, self)
        return {
            "imported": imported,
            "duplicates": len(decision.duplicates),
            "rejects": [
                {"item_index": r.item_index, "reason": r.reason} for r in result.rejects
            ],
            "error": result.error,
        }

    # ---- export / import ----

    def export_dump(self) -> dict:
        collections: dict[str, dict[str, dict]] = {}
        for name in self.store.list_collections():
            collections[name] = {
                doc_id: doc for doc_id, doc in self.store.list_documents(name).items
            }
        blobs = {}
        for blob_id in self.store.list_blobs():
            got = self.store.get_blob(blob_id)
            if got is None:
                continue
            data, fmt = got
            blobs[blob_id] = {
                "format": fmt,
                "data_base64": base64.b64encode(data).decode("ascii"),
            }
        return {"collections": collections, "blobs": blobs}

    def import_dump(self, dump: dict) -> dict:
        ndocs = 0
        for name, docs in dump.get("collections", {}).items():
            if name == BLOB_META_COLLECTION:
                continue  # rewritten by put_blob below
            for doc_id, doc in docs.items():
                self.store.put_document(name, doc_id, doc)
                ndocs += 1
        nblobs = 0
        for _blob_id, entry in dump.get("blobs", {}).items():
            self.store.put_blob(base64.b64decode(entry["data_base64"]), entry["format"])
            nblobs += 1
        count = self.reindex()
        return {"documents": ndocs, "blobs": nblobs, "indexed": count}
