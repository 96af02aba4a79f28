"""Positional inverted index with BM25 ranking and snippet extraction.

Every indexed unit is one *field* of a target: publications contribute
title/abstract/body/keywords entries, ontology nodes contribute a single
label entry, and all of them live in one index so scores stay comparable.
A search hit aggregates a target's field scores, weighted title x2.0 and
keywords x1.5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lingua import AnalyzedToken, Lingua
from .model import SearchHit

BM25_K1 = 1.2
BM25_B = 0.75
FIELD_WEIGHTS = {"title": 2.0, "keywords": 1.5}
DEFAULT_FIELD_WEIGHT = 1.0
FIELDS = ("title", "abstract", "body", "keywords", "label")
SNIPPET_WIDTH = 160
FILTER_FIELDS = ("author", "year", "kind")


class IndexError_(Exception):
    pass


class DuplicateDocument(IndexError_):
    pass


class DocumentNotFound(IndexError_):
    pass


class EmptyQuery(ValueError):
    """The query parsed to no terms, phrases, or filters."""


@dataclass(frozen=True, order=True)
class DocRef:
    result_kind: str  # publication | onto_node
    target_id: str
    field: str

    def as_list(self) -> list[str]:
        return [self.result_kind, self.target_id, self.field]


@dataclass(frozen=True)
class Query:
    terms: tuple[str, ...] = ()
    phrases: tuple[tuple[str, ...], ...] = ()
    filters: dict[str, str] = field(default_factory=dict)
    operator: str = "and"

    def scoring_terms(self) -> list[str]:
        """Unique terms in first-seen order, phrase terms included."""
        seen: dict[str, None] = {}
        for t in self.terms:
            seen.setdefault(t)
        for phrase in self.phrases:
            for t in phrase:
                seen.setdefault(t)
        return list(seen)


def field_weight(fname: str) -> float:
    return FIELD_WEIGHTS.get(fname, DEFAULT_FIELD_WEIGHT)


def idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


class InvertedIndex:
    """Mutable index structure. The service layer treats instances as
    snapshots: it copies, mutates the copy, and swaps the reference."""

    def __init__(self) -> None:
        self.postings: dict[str, dict[DocRef, list[int]]] = {}
        self.doc_stats: dict[DocRef, int] = {}
        self.target_meta: dict[str, dict] = {}
        self._target_refs: dict[str, set[DocRef]] = {}

    # -- stats --

    @property
    def doc_count(self) -> int:
        return len(self.doc_stats)

    @property
    def avgdl(self) -> float:
        if not self.doc_stats:
            return 0.0
        return sum(self.doc_stats.values()) / len(self.doc_stats)

    # -- mutation --

    def index_document(
        self,
        doc_ref: DocRef,
        analyzed: list[AnalyzedToken],
        target_meta: dict | None = None,
    ) -> None:
        if doc_ref in self.doc_stats:
            raise DuplicateDocument(f"{doc_ref} already indexed; remove it first")
        length = 0
        for tok in analyzed:
            if tok.is_stopword:
                continue
            length += 1
            self.postings.setdefault(tok.lemma, {}).setdefault(doc_ref, []).append(tok.position)
        self.doc_stats[doc_ref] = length
        self._target_refs.setdefault(doc_ref.target_id, set()).add(doc_ref)
        if target_meta is not None:
            self.target_meta[doc_ref.target_id] = dict(target_meta)

    def remove_document(self, doc_ref: DocRef) -> None:
        if doc_ref not in self.doc_stats:
            raise DocumentNotFound(str(doc_ref))
        del self.doc_stats[doc_ref]
        for lemma in list(self.postings):
            bucket = self.postings[lemma]
            bucket.pop(doc_ref, None)
            if not bucket:
                del self.postings[lemma]
        refs = self._target_refs.get(doc_ref.target_id, set())
        refs.discard(doc_ref)
        if not refs:
            self._target_refs.pop(doc_ref.target_id, None)
            self.target_meta.pop(doc_ref.target_id, None)

    def remove_target(self, target_id: str) -> int:
        refs = list(self._target_refs.get(target_id, ()))
        for ref in refs:
            self.remove_document(ref)
        return len(refs)

    def refs_for_target(self, target_id: str) -> list[DocRef]:
        return sorted(self._target_refs.get(target_id, ()))

    def copy(self) -> "InvertedIndex":
        clone = InvertedIndex()
        clone.postings = {
            lemma: {ref: list(pos) for ref, pos in bucket.items()}
            for lemma, bucket in self.postings.items()
        }
        clone.doc_stats = dict(self.doc_stats)
        clone.target_meta = {t: dict(m) for t, m in self.target_meta.items()}
        clone._target_refs = {t: set(refs) for t, refs in self._target_refs.items()}
        return clone

    # -- structural equality and persistence --

    def to_doc(self) -> dict:
        return {
            "postings": {
                lemma: [ref.as_list() + [pos] for ref, pos in sorted(bucket.items())]
                for lemma, bucket in sorted(self.postings.items())
            },
            "doc_stats": [ref.as_list() + [n] for ref, n in sorted(self.doc_stats.items())],
            "target_meta": {t: self.target_meta[t] for t in sorted(self.target_meta)},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "InvertedIndex":
        idx = cls()
        for kind, target, fname, n in doc["doc_stats"]:
            ref = DocRef(kind, target, fname)
            idx.doc_stats[ref] = int(n)
            idx._target_refs.setdefault(target, set()).add(ref)
        for lemma, rows in doc["postings"].items():
            idx.postings[lemma] = {
                DocRef(kind, target, fname): [int(p) for p in pos]
                for kind, target, fname, pos in rows
            }
        idx.target_meta = {t: dict(m) for t, m in doc.get("target_meta", {}).items()}
        return idx

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return self.to_doc() == other.to_doc()

    # -- search --

    def _targets_with_term(self, term: str) -> set[str]:
        return {ref.target_id for ref in self.postings.get(term, ())}

    def _targets_with_phrase(self, phrase: tuple[str, ...]) -> set[str]:
        return {
            ref.target_id
            for ref in self.doc_stats
            if self._phrase_in_ref(phrase, ref)
        }

    def _phrase_in_ref(self, phrase: tuple[str, ...], ref: DocRef) -> bool:
        position_lists = []
        for term in phrase:
            positions = self.postings.get(term, {}).get(ref)
            if not positions:
                return False
            position_lists.append(set(positions))
        first = position_lists[0]
        return any(
            all(p + offset in position_lists[offset] for offset in range(1, len(phrase)))
            for p in first
        )

    def _passes_filters(self, target_id: str, filters: dict[str, str]) -> bool:
        if not filters:
            return True
        meta = self.target_meta.get(target_id)
        if meta is None:
            return False
        for key, value in filters.items():
            if key == "year":
                try:
                    if int(value) != meta.get("year"):
                        return False
                except ValueError:
                    return False
            elif key == "kind":
                if meta.get("kind") != value:
                    return False
            elif key == "author":
                families = [a.casefold() for a in meta.get("authors", [])]
                if value.casefold() not in families:
                    return False
            else:
                return False
        return True

    def _candidates(self, query: Query) -> set[str]:
        sets: list[set[str]] = [self._targets_with_term(t) for t in query.terms]
        sets.extend(self._targets_with_phrase(p) for p in query.phrases)
        if not sets:
            # filter-only query: anything with metadata is a candidate
            candidates = set(self._target_refs)
        elif query.operator == "or":
            candidates = set().union(*sets)
        else:
            candidates = set.intersection(*sets)
        return {t for t in candidates if self._passes_filters(t, query.filters)}

    def score_target(self, target_id: str, scoring_terms: list[str]) -> float:
        n_docs = self.doc_count
        avgdl = self.avgdl
        score = 0.0
        # sorted refs keep float summation order deterministic
        for ref in sorted(self._target_refs.get(target_id, ())):
            weight = field_weight(ref.field)
            dl = self.doc_stats[ref]
            for term in scoring_terms:
                positions = self.postings.get(term, {}).get(ref)
                if not positions:
                    continue
                tf = len(positions)
                df = len(self.postings[term])
                norm = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl)
                score += weight * idf(n_docs, df) * tf * (BM25_K1 + 1.0) / norm
        return score

    def search(self, query: Query, limit: int = 20) -> list[SearchHit]:
        if not query.terms and not query.phrases and not query.filters:
            raise EmptyQuery("query has no terms, phrases, or filters")
        scoring_terms = query.scoring_terms()
        hits = []
        for target_id in self._candidates(query):
            refs = self._target_refs.get(target_id)
            if not refs:
                continue
            kind = next(iter(refs)).result_kind
            hits.append(
                SearchHit(
                    result_kind=kind,
                    target_id=target_id,
                    score=self.score_target(target_id, scoring_terms),
                )
            )
        hits.sort(key=lambda h: (-h.score, h.target_id))
        return hits[:limit]


# --- query parsing ---------------------------------------------------------


def parse_query(raw: str, language: str, lingua: Lingua) -> Query:
    """``"quoted spans"`` become phrases, ``field:value`` tokens become
    filters (author/year/kind), a standalone uppercase OR switches the
    operator, everything else is lemmatized into terms."""
    phrases: list[tuple[str, ...]] = []
    terms: list[str] = []
    filters: dict[str, str] = {}
    operator = "and"

    rest: list[str] = []
    in_quote = False
    buf: list[str] = []
    for ch in raw:
        if ch == '"':
            if in_quote:
                phrase = _analyze_terms("".join(buf), language, lingua)
                if len(phrase) == 1:
                    terms.append(phrase[0])
                elif phrase:
                    phrases.append(tuple(phrase))
                buf.clear()
            in_quote = not in_quote
        elif in_quote:
            buf.append(ch)
        else:
            rest.append(ch)
    if in_quote and buf:  # unterminated quote: treat as plain text
        rest.extend(buf)

    for token in "".join(rest).split():
        if token == "OR":
            operator = "or"
            continue
        if ":" in token:
            key, _, value = token.partition(":")
            if key.lower() in FILTER_FIELDS and value:
                filters[key.lower()] = value
                continue
        terms.extend(_analyze_terms(token, language, lingua))

    if not terms and not phrases and not filters:
        raise EmptyQuery(f"nothing to search for in {raw!r}")
    return Query(terms=tuple(terms), phrases=tuple(phrases), filters=filters, operator=operator)


def _analyze_terms(text: str, language: str, lingua: Lingua) -> list[str]:
    return [tok.lemma for tok in lingua.analyze(text, language) if not tok.is_stopword]


# --- snippets ---------------------------------------------------------------


def snippet(
    text: str,
    analyzed: list[AnalyzedToken],
    scoring_terms: list[str] | set[str],
    width: int = SNIPPET_WIDTH,
) -> str:
    """Window of <= ``width`` source characters around the densest cluster
    of query-term matches, matched surfaces wrapped in «...»; with no match,
    the first ``width`` characters."""
    term_set = set(scoring_terms)
    matches = [tok for tok in analyzed if tok.lemma in term_set]
    if not matches:
        return text[:width]
    best_start, best_count = 0, -1
    for anchor in matches:
        start = anchor.start
        count = sum(1 for m in matches if m.start >= start and m.end <= start + width)
        if count > best_count:  # ties keep the earliest window
            best_start, best_count = start, count
    end = min(len(text), best_start + width)
    out: list[str] = []
    cursor = best_start
    for m in matches:
        if m.start < best_start or m.end > end:
            continue
        out.append(text[cursor : m.start])
        out.append("«" + text[m.start : m.end] + "»")
        cursor = m.end
    out.append(text[cursor:end])
    return "".join(out)
