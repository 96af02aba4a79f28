"""Builds weighted concept graphs and document vectors from the analyzed corpus.

Terms are top tf-idf unigram lemmas per document plus corpus-frequent
bigrams.  Co-occurrence edges carry pointwise mutual information counted
over a sliding token window; taxonomic (is-a) edges come from document-set
containment with a strict document-frequency increase, which makes the
is-a subgraph a DAG by construction.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .lingua import AnalyzedToken
from .model import OntoEdge, OntoGraph, OntoNode


class EmptyCorpus(ValueError):
    pass


class UnknownDocument(KeyError):
    pass


@dataclass(frozen=True)
class OntologyParams:
    window: int = 10
    min_pair_windows: int = 2  # co-occurrence count floor for a cooc edge
    containment: float = 0.8  # document-set containment threshold for is-a
    top_k: int = 15
    bigram_min_count: int = 3
    bigram_min_docs: int = 2

    def to_doc(self) -> dict:
        return {
            "window": self.window,
            "min_pair_windows": self.min_pair_windows,
            "containment": self.containment,
            "top_k": self.top_k,
            "bigram_min_count": self.bigram_min_count,
            "bigram_min_docs": self.bigram_min_docs,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "OntologyParams":
        return cls(**doc)


@dataclass(frozen=True)
class TermVector:
    doc_id: str
    weights: dict[str, float]  # lemma -> tf-idf, strictly positive entries


Corpus = Mapping[str, Sequence[AnalyzedToken]]


def _content_lemmas(tokens: Sequence[AnalyzedToken]) -> list[AnalyzedToken]:
    return [t for t in tokens if not t.is_stopword]


def _bigrams(tokens: Sequence[AnalyzedToken]) -> list[tuple[str, int]]:
    """Adjacent non-stopword lemma pairs, keyed by the first token's position."""
    out = []
    by_pos = {t.position: t for t in tokens}
    for t in tokens:
        if t.is_stopword:
            continue
        nxt = by_pos.get(t.position + 1)
        if nxt is not None and not nxt.is_stopword:
            out.append((f"{t.lemma} {nxt.lemma}", t.position))
    return out


@dataclass
class _CorpusStats:
    n_docs: int
    unigram_tf: dict[str, Counter]  # doc -> lemma counts
    unigram_df: Counter
    bigram_tf: dict[str, Counter]
    bigram_df: Counter
    bigram_corpus_freq: Counter

    @classmethod
    def build(cls, docs: Corpus) -> "_CorpusStats":
        unigram_tf: dict[str, Counter] = {}
        bigram_tf: dict[str, Counter] = {}
        unigram_df: Counter = Counter()
        bigram_df: Counter = Counter()
        bigram_corpus_freq: Counter = Counter()
        for doc_id, tokens in docs.items():
            utf = Counter(t.lemma for t in _content_lemmas(tokens))
            btf = Counter(label for label, _ in _bigrams(tokens))
            unigram_tf[doc_id] = utf
            bigram_tf[doc_id] = btf
            unigram_df.update(utf.keys())
            bigram_df.update(btf.keys())
            bigram_corpus_freq.update(btf)
        return cls(
            n_docs=len(docs),
            unigram_tf=unigram_tf,
            unigram_df=unigram_df,
            bigram_tf=bigram_tf,
            bigram_df=bigram_df,
            bigram_corpus_freq=bigram_corpus_freq,
        )

    def tfidf(self, term: str, doc_id: str) -> float:
        if " " in term:
            tf = self.bigram_tf[doc_id].get(term, 0)
            df = self.bigram_df[term]
        else:
            tf = self.unigram_tf[doc_id].get(term, 0)
            df = self.unigram_df[term]
        if tf == 0 or df == 0:
            return 0.0
        return tf * math.log(self.n_docs / df)


def extract_terms(
    doc_id: str,
    docs: Corpus,
    params: OntologyParams = OntologyParams(),
    stats: _CorpusStats | None = None,
) -> list[tuple[str, float]]:
    """Top-K unigram lemmas of the document by tf-idf plus the document's
    corpus-qualified bigrams, sorted by weight descending, ties by term."""
    if doc_id not in docs:
        raise UnknownDocument(doc_id)
    stats = stats or _CorpusStats.build(docs)
    scored = [
        (lemma, stats.tfidf(lemma, doc_id))
        for lemma in stats.unigram_tf[doc_id]
    ]
    scored = [(t, w) for t, w in scored if w > 0]
    scored.sort(key=lambda tw: (-tw[1], tw[0]))
    terms = scored[: params.top_k]
    for bigram in stats.bigram_tf[doc_id]:
        if (
            stats.bigram_corpus_freq[bigram] >= params.bigram_min_count
            and stats.bigram_df[bigram] >= params.bigram_min_docs
        ):
            terms.append((bigram, stats.tfidf(bigram, doc_id)))
    terms.sort(key=lambda tw: (-tw[1], tw[0]))
    return terms


# --- window model for co-occurrence ---------------------------------------


def _window_count(doc_len: int, window: int) -> int:
    if doc_len == 0:
        return 0
    return max(doc_len - window + 1, 1)


def _term_windows(
    docs: Corpus, labels: set[str], window: int
) -> tuple[dict[str, set[tuple[str, int]]], int]:
    """For each node term the set of (doc, window_start) slots containing a
    full occurrence; also the total number of windows in the corpus."""
    covered: dict[str, set[tuple[str, int]]] = {label: set() for label in labels}
    total = 0
    for doc_id, tokens in docs.items():
        doc_len = len(tokens)
        n_windows = _window_count(doc_len, window)
        total += n_windows

        def cover(label: str, first: int, last: int) -> None:
            lo = max(0, last - window + 1)
            hi = min(first, n_windows - 1)
            for s in range(lo, hi + 1):
                covered[label].add((doc_id, s))

        for t in _content_lemmas(tokens):
            if t.lemma in covered:
                cover(t.lemma, t.position, t.position)
        for label, pos in _bigrams(tokens):
            if label in covered:
                cover(label, pos, pos + 1)
    return covered, total


def term_document_sets(docs: Corpus) -> dict[str, set[str]]:
    """Docs containing each unigram lemma / adjacent bigram at least once."""
    out: dict[str, set[str]] = defaultdict(set)
    for doc_id, tokens in docs.items():
        for t in _content_lemmas(tokens):
            out[t.lemma].add(doc_id)
        for label, _ in _bigrams(tokens):
            out[label].add(doc_id)
    return dict(out)


def build_ontograph(docs: Corpus, params: OntologyParams = OntologyParams()) -> OntoGraph:
    """Deterministic: permuting document order yields an identical graph."""
    if not docs:
        raise EmptyCorpus("cannot build an ontology from an empty corpus")
    stats = _CorpusStats.build(docs)
    labels: set[str] = set()
    for doc_id in docs:
        labels.update(t for t, _ in extract_terms(doc_id, docs, params, stats))

    doc_sets = term_document_sets(docs)
    nodes = []
    for label in sorted(labels):
        provenance = tuple(sorted(doc_sets.get(label, ())))
        weight = sum(stats.tfidf(label, d) for d in provenance)
        nodes.append(
            OntoNode(
                node_id=label,
                label=label,
                df=len(provenance),
                weight=weight,
                provenance=provenance,
            )
        )

    edges: list[OntoEdge] = []
    covered, total_windows = _term_windows(docs, labels, params.window)
    ordered = sorted(labels)
    for i, a in enumerate(ordered):
        wa = covered[a]
        if not wa:
            continue
        for b in ordered[i + 1 :]:
            wb = covered[b]
            pair = len(wa & wb)
            if pair < params.min_pair_windows:
                continue
            pmi = math.log(pair * total_windows / (len(wa) * len(wb)))
            if pmi > 0:
                edges.append(OntoEdge(src=a, dst=b, kind="cooc", weight=pmi))

    by_label = {n.label: n for n in nodes}
    for child in ordered:
        c_docs = set(by_label[child].provenance)
        if not c_docs:
            continue
        for parent in ordered:
            if parent == child:
                continue
            p_node = by_label[parent]
            if p_node.df <= by_label[child].df:
                continue  # strict df increase guarantees acyclicity
            ratio = len(c_docs & set(p_node.provenance)) / len(c_docs)
            if ratio >= params.containment:
                edges.append(OntoEdge(src=child, dst=parent, kind="isa", weight=ratio))

    edges.sort(key=lambda e: (e.kind, e.src, e.dst))
    return OntoGraph(nodes=tuple(nodes), edges=tuple(edges))


# --- merging ----------------------------------------------------------------


def _isa_creates_cycle(accepted: list[OntoEdge], candidate: OntoEdge) -> bool:
    adj: dict[str, list[str]] = defaultdict(list)
    for e in accepted:
        adj[e.src].append(e.dst)
    stack = [candidate.dst]
    seen = set()
    while stack:
        u = stack.pop()
        if u == candidate.src:
            return True
        if u in seen:
            continue
        seen.add(u)
        stack.extend(adj.get(u, ()))
    return False


def merge_graphs(g1: OntoGraph, g2: OntoGraph) -> tuple[OntoGraph, tuple[OntoEdge, ...]]:
    """Union by label; node weights sum, provenance unions, edge weights take
    the max.  Is-a edges that would close a cycle are dropped lowest-weight
    first and reported."""
    merged_nodes: dict[str, OntoNode] = {}
    for node in list(g1.nodes) + list(g2.nodes):
        key = node.label.casefold()
        prev = merged_nodes.get(key)
        if prev is None:
            merged_nodes[key] = OntoNode(
                node_id=key,
                label=key,
                df=len(set(node.provenance)),
                weight=node.weight,
                provenance=tuple(sorted(set(node.provenance))),
            )
        else:
            provenance = tuple(sorted(set(prev.provenance) | set(node.provenance)))
            merged_nodes[key] = OntoNode(
                node_id=key,
                label=key,
                df=len(provenance),
                weight=prev.weight + node.weight,
                provenance=provenance,
            )

    dropped: list[OntoEdge] = []
    combined: dict[tuple[str, str, str], float] = {}
    for edge in list(g1.edges) + list(g2.edges):
        src, dst = edge.src.casefold(), edge.dst.casefold()
        if edge.kind == "cooc" and src > dst:
            src, dst = dst, src
        if src == dst:
            dropped.append(edge)
            continue
        key = (edge.kind, src, dst)
        combined[key] = max(combined.get(key, float("-inf")), edge.weight)

    cooc_edges = [
        OntoEdge(src=s, dst=d, kind=k, weight=w)
        for (k, s, d), w in combined.items()
        if k == "cooc"
    ]
    isa_candidates = [
        OntoEdge(src=s, dst=d, kind=k, weight=w)
        for (k, s, d), w in combined.items()
        if k == "isa"
    ]
    isa_candidates.sort(key=lambda e: (-e.weight, e.src, e.dst))
    accepted: list[OntoEdge] = []
    for edge in isa_candidates:
        if _isa_creates_cycle(accepted, edge):
            dropped.append(edge)
        else:
            accepted.append(edge)

    edges = sorted(cooc_edges + accepted, key=lambda e: (e.kind, e.src, e.dst))
    nodes = tuple(merged_nodes[k] for k in sorted(merged_nodes))
    return OntoGraph(nodes=nodes, edges=tuple(edges)), tuple(dropped)


# --- researcher overrides ---------------------------------------------------


def apply_overrides(
    graph: OntoGraph, overrides: Iterable[dict]
) -> tuple[OntoGraph, list[str]]:
    """Re-applies persisted manual curation (rename_node / delete_edge /
    pin_edge) after an automatic rebuild."""
    warnings: list[str] = []
    nodes: dict[str, OntoNode] = {n.label: n for n in graph.nodes}
    edges: dict[tuple[str, str, str], OntoEdge] = {
        (e.kind, e.src, e.dst): e for e in graph.edges
    }
    for ov in overrides:
        op = ov.get("op")
        if op == "rename_node":
            old, new = ov.get("from", ""), str(ov.get("to", "")).casefold()
            if old not in nodes or not new:
                warnings.append(f"rename_node: unknown node {old!r}")
                continue
            node = nodes.pop(old)
            if new in nodes:
                other = nodes[new]
                provenance = tuple(sorted(set(node.provenance) | set(other.provenance)))
                nodes[new] = OntoNode(
                    node_id=new, label=new, df=len(provenance),
                    weight=node.weight + other.weight, provenance=provenance,
                )
            else:
                nodes[new] = OntoNode(
                    node_id=new, label=new, df=node.df,
                    weight=node.weight, provenance=node.provenance,
                )
            renamed: dict[tuple[str, str, str], OntoEdge] = {}
            for (kind, src, dst), e in edges.items():
                src2 = new if src == old else src
                dst2 = new if dst == old else dst
                if src2 == dst2:
                    continue
                if kind == "cooc" and src2 > dst2:
                    src2, dst2 = dst2, src2
                key = (kind, src2, dst2)
                prev = renamed.get(key)
                weight = max(e.weight, prev.weight) if prev else e.weight
                renamed[key] = OntoEdge(src=src2, dst=dst2, kind=kind, weight=weight)
            edges = renamed
        elif op == "delete_edge":
            key = (ov.get("kind", "cooc"), ov.get("from", ""), ov.get("to", ""))
            if edges.pop(key, None) is None:
                warnings.append(f"delete_edge: no edge {key}")
        elif op == "pin_edge":
            kind = ov.get("kind", "cooc")
            src, dst = ov.get("from", ""), ov.get("to", "")
            if src not in nodes or dst not in nodes:
                warnings.append(f"pin_edge: unknown endpoint {src!r} -> {dst!r}")
                continue
            if kind == "cooc" and src > dst:
                src, dst = dst, src
            candidate = OntoEdge(src=src, dst=dst, kind=kind, weight=float(ov.get("weight", 1.0)))
            if kind == "isa":
                existing_isa = [e for e in edges.values() if e.kind == "isa"]
                if _isa_creates_cycle(existing_isa, candidate):
                    warnings.append(f"pin_edge: {src!r} -> {dst!r} would close an is-a cycle")
                    continue
            edges[(kind, src, dst)] = candidate
        else:
            warnings.append(f"unknown override op: {op!r}")
    ordered_edges = sorted(edges.values(), key=lambda e: (e.kind, e.src, e.dst))
    ordered_nodes = tuple(nodes[k] for k in sorted(nodes))
    return OntoGraph(nodes=ordered_nodes, edges=tuple(ordered_edges)), warnings


# --- document similarity ------------------------------------------------------


def build_term_vectors(docs: Corpus) -> dict[str, TermVector]:
    stats = _CorpusStats.build(docs)
    vectors = {}
    for doc_id in docs:
        weights = {
            lemma: stats.tfidf(lemma, doc_id)
            for lemma in stats.unigram_tf[doc_id]
            if stats.tfidf(lemma, doc_id) > 0
        }
        vectors[doc_id] = TermVector(doc_id=doc_id, weights=weights)
    return vectors


def similarity(a: TermVector, b: TermVector) -> float:
    if not a.weights or not b.weights:
        return 0.0
    dot = sum(w * b.weights.get(t, 0.0) for t, w in a.weights.items())
    norm_a = math.sqrt(sum(w * w for w in a.weights.values()))
    norm_b = math.sqrt(sum(w * w for w in b.weights.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return min(1.0, dot / (norm_a * norm_b))


def related_documents(
    vectors: Mapping[str, TermVector], doc_id: str, k: int
) -> list[tuple[str, float]]:
    if doc_id not in vectors:
        raise UnknownDocument(doc_id)
    me = vectors[doc_id]
    scored = [
        (other_id, similarity(me, vec))
        for other_id, vec in vectors.items()
        if other_id != doc_id
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


# --- serialization ------------------------------------------------------------


def export_graph(graph: OntoGraph, min_weight: float | None = None) -> dict:
    """The public graph JSON consumed by the web client's graph view."""
    nodes = sorted(graph.nodes, key=lambda n: n.label)
    edges = [e for e in graph.edges if min_weight is None or e.weight >= min_weight]
    edges.sort(key=lambda e: (e.src, e.dst, e.kind))
    return {
        "nodes": [
            {"id": n.node_id, "label": n.label, "df": n.df, "weight": n.weight}
            for n in nodes
        ],
        "edges": [
            {"from": e.src, "to": e.dst, "kind": e.kind, "weight": e.weight}
            for e in edges
        ],
    }


def import_graph(doc: dict) -> OntoGraph:
    """Parse the exported JSON back into a graph (provenance is not part of
    the public schema and comes back empty)."""
    nodes = tuple(
        OntoNode(
            node_id=n["id"], label=n["label"], df=int(n["df"]),
            weight=float(n["weight"]), provenance=(),
        )
        for n in sorted(doc.get("nodes", []), key=lambda n: n["label"])
    )
    edges = tuple(
        OntoEdge(src=e["from"], dst=e["to"], kind=e["kind"], weight=float(e["weight"]))
        for e in sorted(doc.get("edges", []), key=lambda e: (e["from"], e["to"], e["kind"]))
    )
    return OntoGraph(nodes=nodes, edges=edges)


def graph_to_doc(graph: OntoGraph) -> dict:
    """Full internal persistence form, provenance included."""
    doc = export_graph(graph)
    provenance = {n.label: list(n.provenance) for n in graph.nodes}
    doc["provenance"] = provenance
    return doc


def graph_from_doc(doc: dict) -> OntoGraph:
    graph = import_graph(doc)
    provenance = doc.get("provenance", {})
    nodes = tuple(
        OntoNode(
            node_id=n.node_id, label=n.label, df=n.df, weight=n.weight,
            provenance=tuple(provenance.get(n.label, ())),
        )
        for n in graph.nodes
    )
    return OntoGraph(nodes=nodes, edges=graph.edges)
