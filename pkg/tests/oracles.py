"""Independent reference implementations the real modules are checked against.

Everything here recomputes results from first principles (per-window scans,
linear scans over raw token lists, memoized recursion) and never calls into
the code paths under test.
"""
from __future__ import annotations

import functools
import math
import re
from collections import Counter

from pubkb.index import BM25_B, BM25_K1, FIELD_WEIGHTS

# --------------------------------------------------------------------------
# Suffix-stripping stemmer, re-derived from the published rule tables in a
# table-driven style (the production module is a step-function port).
# --------------------------------------------------------------------------


def _cv_pattern(word: str) -> str:
    out: list[str] = []
    for i, ch in enumerate(word):
        if ch in "aeiou":
            out.append("v")
        elif ch == "y" and i > 0 and out[i - 1] == "c":
            out.append("v")
        else:
            out.append("c")
    return "".join(out)


def _m(stem: str) -> int:
    collapsed = re.sub(r"(.)\1+", r"\1", _cv_pattern(stem))
    return collapsed.count("vc")


def _contains_vowel(stem: str) -> bool:
    return "v" in _cv_pattern(stem)


def _double_consonant(stem: str) -> bool:
    return len(stem) >= 2 and stem[-1] == stem[-2] and _cv_pattern(stem)[-1] == "c"


def _cvc_shape(stem: str) -> bool:
    return (
        len(stem) >= 3
        and _cv_pattern(stem)[-3:] == "cvc"
        and stem[-1] not in "wxy"
    )


def _longest_rule(word: str, rules):
    hits = [r for r in rules if word.endswith(r[0])]
    if not hits:
        return None
    return max(hits, key=lambda r: len(r[0]))


_RULES_2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]
_RULES_3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]
_RULES_4 = [(s, "") for s in (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)]


def porter_reference(word: str) -> str:
    if not word.isascii() or not word.isalpha():
        return word
    w = word

    # step 1a
    for suffix, repl in (("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")):
        if w.endswith(suffix):
            w = w[: -len(suffix)] + repl
            break

    # step 1b
    if w.endswith("eed"):
        if _m(w[:-3]) > 0:
            w = w[:-1]
    else:
        hit = None
        if w.endswith("ed") and _contains_vowel(w[:-2]):
            hit = w[:-2]
        elif w.endswith("ing") and _contains_vowel(w[:-3]):
            hit = w[:-3]
        if hit is not None:
            w = hit
            if w[-2:] in ("at", "bl", "iz"):
                w += "e"
            elif _double_consonant(w) and w[-1] not in "lsz":
                w = w[:-1]
            elif _m(w) == 1 and _cvc_shape(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _contains_vowel(w[:-1]):
        w = w[:-1] + "i"

    # steps 2 and 3: longest suffix, condition m(stem) > 0
    for rules in (_RULES_2, _RULES_3):
        rule = _longest_rule(w, rules)
        if rule is not None:
            stem = w[: -len(rule[0])]
            if _m(stem) > 0:
                w = stem + rule[1]

    # step 4: longest suffix, m(stem) > 1, ion additionally needs s/t stem
    rule = _longest_rule(w, _RULES_4)
    if rule is not None:
        stem = w[: -len(rule[0])]
        if _m(stem) > 1 and (rule[0] != "ion" or stem.endswith(("s", "t"))):
            w = stem

    # step 5a
    if w.endswith("e"):
        stem = w[:-1]
        if _m(stem) > 1 or (_m(stem) == 1 and not _cvc_shape(stem)):
            w = stem

    # step 5b
    if _m(w) > 1 and _double_consonant(w) and w.endswith("l"):
        w = w[:-1]

    return w


# --------------------------------------------------------------------------
# Linear-scan BM25 scorer over raw analyzed tokens.
# --------------------------------------------------------------------------


def bm25_score_oracle(targets: dict, query, limit: int) -> list[tuple[str, float]]:
    """``targets``: target_id -> {"kind", "fields": {fname: [AnalyzedToken]},
    "meta": {...} | None}.  Recomputes everything from the token lists."""
    pairs = []  # (target_id, fname, content_tokens)
    for target_id, spec in targets.items():
        for fname, tokens in spec["fields"].items():
            pairs.append((target_id, fname, [t for t in tokens if not t.is_stopword]))

    n_docs = len(pairs)
    lengths = {(t, f): len(toks) for t, f, toks in pairs}
    avgdl = sum(lengths.values()) / n_docs if n_docs else 0.0
    df: Counter = Counter()
    for _, _, toks in pairs:
        df.update({tok.lemma for tok in toks})

    def term_targets(term: str) -> set[str]:
        return {t for t, _, toks in pairs if any(tok.lemma == term for tok in toks)}

    def phrase_in_field(phrase, toks) -> bool:
        positions = {lemma: {t.position for t in toks if t.lemma == lemma} for lemma in phrase}
        return any(
            all(p + k in positions[phrase[k]] for k in range(1, len(phrase)))
            for p in positions[phrase[0]]
        ) if all(positions[lemma] for lemma in phrase) else False

    def phrase_targets(phrase) -> set[str]:
        return {t for t, _, toks in pairs if phrase_in_field(phrase, toks)}

    def passes(target_id: str) -> bool:
        meta = targets[target_id].get("meta")
        for key, value in query.filters.items():
            if meta is None:
                return False
            if key == "year" and int(value) != meta.get("year"):
                return False
            if key == "kind" and value != meta.get("kind"):
                return False
            if key == "author" and value.casefold() not in [
                a.casefold() for a in meta.get("authors", [])
            ]:
                return False
        return True

    sets = [term_targets(t) for t in query.terms]
    sets += [phrase_targets(p) for p in query.phrases]
    if not sets:
        candidates = set(targets)
    elif query.operator == "or":
        candidates = set().union(*sets)
    else:
        candidates = set.intersection(*sets)
    candidates = {t for t in candidates if passes(t)}

    scoring_terms = query.scoring_terms()
    scored = []
    for target_id in candidates:
        total = 0.0
        for t, fname, toks in sorted(
            pairs, key=lambda p: (p[0], {"publication": 0, "onto_node": 1}.get(targets[p[0]]["kind"], 2), p[1])
        ):
            if t != target_id:
                continue
            weight = FIELD_WEIGHTS.get(fname, 1.0)
            dl = lengths[(t, fname)]
            for term in scoring_terms:
                tf = sum(1 for tok in toks if tok.lemma == term)
                if tf == 0:
                    continue
                idf = math.log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
                total += weight * idf * tf * (BM25_K1 + 1.0) / (
                    tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl)
                )
        scored.append((target_id, total))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:limit]


# --------------------------------------------------------------------------
# Per-window co-occurrence scan.
# --------------------------------------------------------------------------


def window_counts_oracle(docs: dict, labels: set[str], window: int):
    """Literal enumeration of every window; returns (per-term window count,
    per-pair window count, total windows)."""
    term_count: Counter = Counter()
    pair_count: Counter = Counter()
    total = 0
    for _doc_id, tokens in docs.items():
        doc_len = len(tokens)
        if doc_len == 0:
            continue
        n_windows = max(doc_len - window + 1, 1)
        total += n_windows
        unigram_at = {}
        bigram_at = {}
        ordered = sorted(tokens, key=lambda t: t.position)
        for t in ordered:
            if not t.is_stopword:
                unigram_at.setdefault(t.lemma, []).append(t.position)
        by_pos = {t.position: t for t in ordered}
        for t in ordered:
            nxt = by_pos.get(t.position + 1)
            if not t.is_stopword and nxt is not None and not nxt.is_stopword:
                bigram_at.setdefault(f"{t.lemma} {nxt.lemma}", []).append(t.position)
        for s in range(n_windows):
            end = s + window
            present = set()
            for label in labels:
                if " " in label:
                    spots = bigram_at.get(label, ())
                    if any(s <= p and p + 1 < end for p in spots):
                        present.add(label)
                else:
                    spots = unigram_at.get(label, ())
                    if any(s <= p < end for p in spots):
                        present.add(label)
            for label in present:
                term_count[label] += 1
            ordered_present = sorted(present)
            for i, a in enumerate(ordered_present):
                for b in ordered_present[i + 1:]:
                    pair_count[(a, b)] += 1
    return term_count, pair_count, total


def pmi_edges_oracle(docs: dict, labels: set[str], window: int, min_pair: int):
    term_count, pair_count, total = window_counts_oracle(docs, labels, window)
    edges = {}
    for (a, b), pair in pair_count.items():
        if pair < min_pair:
            continue
        pmi = math.log(pair * total / (term_count[a] * term_count[b]))
        if pmi > 0:
            edges[(a, b)] = pmi
    return edges


def isa_edges_oracle(docs: dict, labels: set[str], containment: float):
    """Containment recomputed by scanning raw tokens per label."""
    doc_sets: dict[str, set[str]] = {label: set() for label in labels}
    for doc_id, tokens in docs.items():
        ordered = sorted(tokens, key=lambda t: t.position)
        lemmas_here = {t.lemma for t in ordered if not t.is_stopword}
        by_pos = {t.position: t for t in ordered}
        bigrams_here = set()
        for t in ordered:
            nxt = by_pos.get(t.position + 1)
            if not t.is_stopword and nxt is not None and not nxt.is_stopword:
                bigrams_here.add(f"{t.lemma} {nxt.lemma}")
        for label in labels:
            present = label in bigrams_here if " " in label else label in lemmas_here
            if present:
                doc_sets[label].add(doc_id)
    edges = {}
    for child in labels:
        for parent in labels:
            if child == parent or not doc_sets[child]:
                continue
            if len(doc_sets[parent]) <= len(doc_sets[child]):
                continue
            ratio = len(doc_sets[child] & doc_sets[parent]) / len(doc_sets[child])
            if ratio >= containment:
                edges[(child, parent)] = ratio
    return edges


# --------------------------------------------------------------------------
# Misc small oracles.
# --------------------------------------------------------------------------


def densest_window_oracle(matches: list[tuple[int, int]], text_len: int, width: int) -> int:
    """Max number of matches fully inside any width-sized window."""
    best = 0
    for start in range(text_len + 1):
        count = sum(1 for s, e in matches if s >= start and e <= start + width)
        best = max(best, count)
    return best


def levenshtein_reference(a: str, b: str) -> int:
    @functools.cache
    def go(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            go(i - 1, j) + 1,
            go(i, j - 1) + 1,
            go(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return go(len(a), len(b))
