"""Tokenization, Ukrainian lemmatization, English stemming, stopwords,
and the pluggable translation boundary.

All resources load from plain data files (TSV dictionaries and rule
tables, one-word-per-line stopword lists), so coverage is a data problem
rather than a code problem.
"""
from __future__ import annotations

import functools
import os
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .lemmatizer import DataError, LemmaDictionary, SuffixRules, lemmatize_uk
from .porter import porter_stem

DATA_DIR = Path(__file__).parent / "data"

_CYRILLIC_RE = re.compile(r"[Ѐ-ӿ]")
_APOSTROPHES = ("'", "’")


class UnsupportedLanguage(ValueError):
    pass


class TranslatorUnavailable(RuntimeError):
    pass


class TranslatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnalyzedToken:
    surface: str
    lemma: str
    position: int
    start: int
    end: int
    is_stopword: bool


@dataclass(frozen=True)
class TranslationResult:
    text: str
    machine_translated: bool
    engine: str


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Maximal runs of Unicode letters/digits, lowercased, with original
    offsets; a single apostrophe between letters stays inside the token."""
    tokens: list[tuple[str, int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if not text[i].isalnum():
            i += 1
            continue
        start = i
        while i < n:
            ch = text[i]
            if ch.isalnum():
                i += 1
            elif (
                ch in _APOSTROPHES
                and i > start
                and text[i - 1].isalpha()
                and i + 1 < n
                and text[i + 1].isalpha()
            ):
                i += 1
            else:
                break
        tokens.append((text[start:i].lower(), start, i))
    return tokens


def _load_stopwords(path: Path) -> frozenset[str]:
    words = set()
    for line in path.read_text("utf-8").splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def _load_glossary(path: Path) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'source\\ttarget'")
        table[parts[0].strip().lower()] = parts[1].strip()
    return table


class Lingua:
    """Loaded language resources; immutable after construction and safe to
    share across threads."""

    def __init__(
        self,
        lemma_dict: LemmaDictionary,
        suffix_rules: SuffixRules,
        stopwords: dict[str, frozenset[str]],
        glossaries: dict[tuple[str, str], dict[str, str]],
    ) -> None:
        self.lemma_dict = lemma_dict
        self.suffix_rules = suffix_rules
        self.stopwords = stopwords
        self.glossaries = glossaries

    @classmethod
    def load(cls, data_dir: Path | None = None) -> "Lingua":
        d = data_dir or DATA_DIR
        return cls(
            lemma_dict=LemmaDictionary.load(d / "uk_lemmas.tsv"),
            suffix_rules=SuffixRules.load(d / "uk_suffix_rules.tsv"),
            stopwords={
                "uk": _load_stopwords(d / "stopwords_uk.txt"),
                "en": _load_stopwords(d / "stopwords_en.txt"),
            },
            glossaries={
                ("en", "uk"): _load_glossary(d / "glossary_en_uk.tsv"),
                ("ru", "uk"): _load_glossary(d / "glossary_ru_uk.tsv"),
            },
        )

    def lemmatize(self, token: str, language: str) -> str:
        if language == "uk":
            if not _CYRILLIC_RE.search(token):
                return token  # foreign-script token passes through
            return lemmatize_uk(token, self.lemma_dict, self.suffix_rules)
        if language == "en":
            return porter_stem(token)
        return token  # ru and unknown are indexed on surface forms

    def is_stopword(self, surface: str, language: str) -> bool:
        return surface in self.stopwords.get(language, frozenset())

    def analyze(self, text: str, language: str) -> list[AnalyzedToken]:
        out: list[AnalyzedToken] = []
        for position, (surface, start, end) in enumerate(tokenize(text)):
            out.append(
                AnalyzedToken(
                    surface=surface,
                    lemma=self.lemmatize(surface, language),
                    position=position,
                    start=start,
                    end=end,
                    is_stopword=self.is_stopword(surface, language),
                )
            )
        return out

    def translate(
        self,
        text: str,
        frm: str,
        to: str,
        plugin_cmd: list[str] | None = None,
        stub_enabled: bool = True,
    ) -> TranslationResult:
        if frm == to:
            return TranslationResult(text=text, machine_translated=False, engine="identity")
        if frm not in ("en", "ru") or to != "uk":
            raise UnsupportedLanguage(f"translation {frm}->{to} is not supported")
        if plugin_cmd:
            env = dict(os.environ, FROM_LANG=frm, TO_LANG=to)
            try:
                proc = subprocess.run(
                    plugin_cmd, input=text.encode("utf-8"), capture_output=True,
                    timeout=300, env=env,
                )
            except OSError as exc:
                raise TranslatorError(f"translator plug-in failed to start: {exc}") from exc
            if proc.returncode != 0:
                raise TranslatorError(f"translator plug-in exited with {proc.returncode}")
            return TranslationResult(
                text=proc.stdout.decode("utf-8"), machine_translated=True, engine="plugin"
            )
        if not stub_enabled:
            raise TranslatorUnavailable("no translator plug-in configured and glossary stub disabled")
        glossary = self.glossaries.get((frm, to), {})
        out: list[str] = []
        last = 0
        for surface, start, end in tokenize(text):
            out.append(text[last:start])
            out.append(glossary.get(surface, text[start:end]))
            last = end
        out.append(text[last:])
        return TranslationResult(text="".join(out), machine_translated=True, engine="glossary")


@functools.lru_cache(maxsize=1)
def default_lingua() -> Lingua:
    return Lingua.load()
