"""Dictionary-first Ukrainian lemmatizer with suffix-rule fallback.

Idempotence (lemmatize(lemmatize(t)) == lemmatize(t)) is guaranteed
structurally rather than hoped for:

* every lemma value is closed into the dictionary as an identity entry,
  and an explicit entry mapping a lemma elsewhere is a load error;
* the rule table is validated so that no rule's replacement can ever form
  the tail of a word another rule would match;
* a rule output that happens to be a dictionary wordform is normalized
  through the dictionary once.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

_MIN_STEM = 2


class DataError(ValueError):
    """A bundled data file violates its own consistency rules."""


@dataclass(frozen=True)
class LemmaDictionary:
    entries: dict[str, str]
    source_path: str
    entry_count: int

    @classmethod
    def load(cls, path: str | Path) -> "LemmaDictionary":
        path = Path(path)
        entries: dict[str, str] = {}
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'wordform\\tlemma'")
            wordform, lemma = parts[0].strip().lower(), parts[1].strip().lower()
            if not wordform or not lemma:
                raise DataError(f"{path}:{lineno}: empty wordform or lemma")
            if wordform in entries and entries[wordform] != lemma:
                raise DataError(f"{path}:{lineno}: conflicting entry for {wordform!r}")
            entries[wordform] = lemma
        for wordform, lemma in list(entries.items()):
            if lemma in entries and entries[lemma] != lemma:
                raise DataError(
                    f"{path}: lemma {lemma!r} (of {wordform!r}) maps to "
                    f"{entries[lemma]!r}; lemmas must be fixed points"
                )
        for lemma in set(entries.values()):
            entries.setdefault(lemma, lemma)
        return cls(entries=entries, source_path=str(path), entry_count=len(entries))


@dataclass(frozen=True)
class SuffixRules:
    rules: tuple[tuple[str, str], ...]  # (suffix, replacement), longest first

    @classmethod
    def load(cls, path: str | Path) -> "SuffixRules":
        path = Path(path)
        rules: list[tuple[str, str]] = []
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'suffix\\treplacement'")
            suffix, repl = parts[0].strip().lower(), parts[1].strip().lower()
            if not suffix:
                raise DataError(f"{path}:{lineno}: empty suffix")
            rules.append((suffix, repl))
        cls._validate(rules, path)
        rules.sort(key=lambda r: (-len(r[0]), r[0]))
        return cls(rules=tuple(rules))

    @staticmethod
    def _validate(rules: list[tuple[str, str]], path: Path) -> None:
        # A rule output is stem+replacement.  It ends with some suffix s2
        # only if s2 sits inside the replacement (r ends with s2) or extends
        # past it into the stem (s2 ends with r).  Forbid both, so no rule
        # ever matches another rule's output.
        for _, repl in rules:
            if not repl:
                raise DataError(f"{path}: empty replacements are not allowed")
        for suffix, repl in rules:
            for suffix2, _ in rules:
                if repl.endswith(suffix2):
                    raise DataError(
                        f"{path}: replacement {repl!r} (rule -{suffix}) itself "
                        f"matches rule suffix -{suffix2}"
                    )
                if suffix2.endswith(repl) and len(suffix2) > len(repl):
                    raise DataError(
                        f"{path}: rule suffix -{suffix2} can extend replacement "
                        f"{repl!r} (rule -{suffix}) into the stem"
                    )


def apply_suffix_rule(token: str, rules: SuffixRules) -> str | None:
    """Longest matching suffix wins; the stem must keep >= 2 characters."""
    for suffix, repl in rules.rules:
        if token.endswith(suffix) and len(token) - len(suffix) >= _MIN_STEM:
            return token[: -len(suffix)] + repl
    return None


def lemmatize_uk(token: str, dictionary: LemmaDictionary, rules: SuffixRules) -> str:
    hit = dictionary.entries.get(token)
    if hit is not None:
        return hit
    rewritten = apply_suffix_rule(token, rules)
    if rewritten is None:
        return token
    return dictionary.entries.get(rewritten, rewritten)
