"""Text extraction from publication files and rule-based language detection.

Built-in handlers cover txt, docx, xml and text-layer pdf (plain or
Flate-compressed content streams, standard text-showing operators).  Any
format can instead be routed to an external extractor command that reads
the file on stdin and writes UTF-8 text on stdout; legacy binary .doc has
no built-in handler and always requires such a plug-in.
"""
from __future__ import annotations

import io
import re
import subprocess
import xml.etree.ElementTree as ET
import zipfile
import zlib
from dataclasses import dataclass, field

EXTRACT_FORMATS = ("txt", "docx", "pdf", "xml", "doc")

# below this confidence the document is routed as language-unknown and
# indexed without lemmatization
LANGUAGE_CONFIDENCE_THRESHOLD = 0.6
_MIN_LETTERS = 20

_UK_MARKERS = set("іїєґ")
_RU_MARKERS = set("ыэъё")


class ExtractError(Exception):
    pass


class FormatError(ExtractError):
    """The container is malformed; the message carries the position when known."""


class EmptyExtraction(ExtractError):
    """The file holds no extractable text (e.g. a scanned, image-only pdf)."""


class Unsupported(ExtractError):
    """The built-in handlers cannot read this file; configure an extractor plug-in."""


@dataclass(frozen=True)
class ExtractedText:
    text: str
    char_count: int
    language: str
    language_confidence: float
    warnings: tuple[str, ...] = field(default_factory=tuple)


def detect_language(text: str) -> tuple[str, float]:
    """Script-ratio vote: Cyrillic vs Latin picks uk/ru vs en; within
    Cyrillic, letters found only in Ukrainian vs only in Russian decide.

    Texts with fewer than 20 letters, or tied votes, come back unknown with
    confidence 0; vote shares are scale invariant, so ``detect(x) ==
    detect(x + x)``.
    """
    folded = text.casefold()
    cyr = lat = 0
    uk_votes = ru_votes = 0
    for ch in folded:
        if "Ѐ" <= ch <= "ӿ":
            cyr += 1
            if ch in _UK_MARKERS:
                uk_votes += 1
            elif ch in _RU_MARKERS:
                ru_votes += 1
        elif "a" <= ch <= "z":
            lat += 1
    letters = cyr + lat
    if letters < _MIN_LETTERS:
        return "unknown", 0.0
    if lat > cyr:
        confidence = lat / letters
        return ("en", confidence) if confidence >= LANGUAGE_CONFIDENCE_THRESHOLD else ("unknown", confidence)
    if cyr > lat:
        total_votes = uk_votes + ru_votes
        if total_votes == 0 or uk_votes == ru_votes:
            return "unknown", 0.0
        winner = "uk" if uk_votes > ru_votes else "ru"
        confidence = max(uk_votes, ru_votes) / total_votes
        if confidence < LANGUAGE_CONFIDENCE_THRESHOLD:
            return "unknown", confidence
        return winner, confidence
    return "unknown", 0.0  # equal script counts: no decision


def extract_text(
    data: bytes,
    fmt: str,
    plugins: dict[str, list[str]] | None = None,
) -> ExtractedText:
    """Extract plain text from ``data`` and tag its language.

    ``plugins`` maps a format to an external command line; a configured
    plug-in takes precedence over the built-in handler for that format.
    """
    if fmt not in EXTRACT_FORMATS:
        raise FormatError(f"unknown format: {fmt!r}")
    if not data:
        raise EmptyExtraction("empty file")
    warnings: list[str] = []
    if plugins and fmt in plugins:
        text = _run_plugin(plugins[fmt], data)
    elif fmt == "txt":
        text = _extract_txt(data, warnings)
    elif fmt == "docx":
        text = _extract_docx(data)
    elif fmt == "xml":
        text = _extract_xml(data)
    elif fmt == "pdf":
        text = _extract_pdf(data)
    else:  # legacy binary .doc predates the ZIP/XML container
        raise Unsupported("no built-in handler for .doc; configure an extractor plug-in")
    if not text.strip():
        raise EmptyExtraction(f"no text extracted from {fmt} file")
    language, confidence = detect_language(text)
    return ExtractedText(
        text=text,
        char_count=len(text),
        language=language,
        language_confidence=confidence,
        warnings=tuple(warnings),
    )


def _run_plugin(cmd: list[str], data: bytes) -> str:
    try:
        proc = subprocess.run(cmd, input=data, capture_output=True, timeout=120)
    except OSError as exc:
        raise FormatError(f"extractor plug-in failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise FormatError(
            f"extractor plug-in exited with {proc.returncode}: {proc.stderr.decode('utf-8', 'replace')[:200]}"
        )
    return proc.stdout.decode("utf-8", "replace")


def _extract_txt(data: bytes, warnings: list[str]) -> str:
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        pass
    try:
        text = data.decode("cp1251")
        warnings.append("decoded as windows-1251 after utf-8 failed")
        return text
    except UnicodeDecodeError as exc:
        raise FormatError(f"text is neither UTF-8 nor windows-1251: byte {exc.start}") from exc


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _extract_docx(data: bytes) -> str:
    if not data.startswith(b"PK\x03\x04"):
        raise FormatError("not a ZIP container (expected docx)")
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise FormatError(f"broken ZIP container: {exc}") from exc
    try:
        body = zf.read("word/document.xml")
    except KeyError:
        raise FormatError("ZIP member word/document.xml missing") from None
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise FormatError(f"document body XML malformed at {exc.position}") from exc
    paragraphs: list[str] = []
    for para in root.iter():
        if _localname(para.tag) != "p":
            continue
        runs = [
            node.text or ""
            for node in para.iter()
            if _localname(node.tag) == "t"
        ]
        paragraphs.append("".join(runs))
    return "\n".join(paragraphs)


def _extract_xml(data: bytes) -> str:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise FormatError(f"malformed XML at line {exc.position[0]}, column {exc.position[1]}") from exc
    return "".join(root.itertext())


# --- pdf -----------------------------------------------------------------

_STREAM_RE = re.compile(rb"(<<.*?>>)\s*stream\r?\n(.*?)endstream", re.S)
_TEXT_BLOCK_RE = re.compile(rb"BT(.*?)ET", re.S)


def _extract_pdf(data: bytes) -> str:
    if not data.startswith(b"%PDF-"):
        raise FormatError("missing %PDF- header")
    chunks: list[str] = []
    saw_stream = False
    saw_undecodable = False
    for match in _STREAM_RE.finditer(data):
        params, raw = match.group(1), match.group(2)
        saw_stream = True
        if b"FlateDecode" in params:
            try:
                content = zlib.decompress(raw)
            except zlib.error:
                saw_undecodable = True
                continue
        elif b"Filter" in params:
            saw_undecodable = True  # image or exotic encoding; not a text stream
            continue
        else:
            content = raw
        for block in _TEXT_BLOCK_RE.finditer(content):
            text = _render_text_block(block.group(1))
            if text.strip():
                chunks.append(text)
    if chunks:
        return "\n".join(chunks)
    if saw_undecodable and saw_stream:
        raise Unsupported(
            "pdf uses features outside the built-in handler; configure an external pdf extractor plug-in"
        )
    raise EmptyExtraction("pdf has no text layer")


def _render_text_block(content: bytes) -> str:
    """Replay the text-showing operators of one BT..ET block."""
    out: list[str] = []
    i = 0
    n = len(content)
    pending: list[str] = []  # string operands awaiting their operator

    def flush(separator: str = "") -> None:
        if pending:
            out.append("".join(pending))
            pending.clear()
        if separator:
            out.append(separator)

    while i < n:
        ch = content[i : i + 1]
        if ch == b"(":
            literal, i = _read_literal_string(content, i)
            pending.append(literal)
        elif ch == b"<" and content[i : i + 2] != b"<<":
            hexstr, i = _read_hex_string(content, i)
            pending.append(hexstr)
        elif ch == b"[":
            array, i = _read_tj_array(content, i)
            pending.append(array)
        elif ch.isalpha() or ch in (b"'", b'"'):
            op, i = _read_operator(content, i)
            if op in (b"'", b'"'):
                # move to next line, then show
                text = pending[:]
                pending.clear()
                out.append("\n")
                out.extend(text)
            elif op == b"Tj" or op == b"TJ":
                flush()
            elif op in (b"Td", b"TD", b"T*"):
                flush("\n")
            else:
                pending.clear()  # operands belonged to a non-text operator
        else:
            i += 1
    flush()
    text = "".join(out)
    return re.sub(r"\n{2,}", "\n", text).strip("\n")


def _read_operator(content: bytes, i: int) -> tuple[bytes, int]:
    if content[i : i + 1] in (b"'", b'"'):
        return content[i : i + 1], i + 1
    j = i
    while j < len(content) and (content[j : j + 1].isalpha() or content[j : j + 1] == b"*"):
        j += 1
    return content[i:j], j


_ESCAPES = {
    b"n": "\n", b"r": "\r", b"t": "\t", b"b": "\b", b"f": "\f",
    b"(": "(", b")": ")", b"\\": "\\",
}


def _read_literal_string(content: bytes, i: int) -> tuple[str, int]:
    assert content[i : i + 1] == b"("
    i += 1
    depth = 1
    out: list[str] = []
    while i < len(content) and depth > 0:
        ch = content[i : i + 1]
        if ch == b"\\":
            nxt = content[i + 1 : i + 2]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
            elif nxt.isdigit():
                j = i + 1
                while j < len(content) and j < i + 4 and content[j : j + 1].isdigit():
                    j += 1
                out.append(chr(int(content[i + 1 : j], 8)))
                i = j
            elif nxt in (b"\n", b"\r"):
                i += 2  # line continuation
            else:
                i += 1
        elif ch == b"(":
            depth += 1
            out.append("(")
            i += 1
        elif ch == b")":
            depth -= 1
            if depth > 0:
                out.append(")")
            i += 1
        else:
            out.append(ch.decode("latin-1"))
            i += 1
    return "".join(out), i


def _read_hex_string(content: bytes, i: int) -> tuple[str, int]:
    end = content.find(b">", i)
    if end == -1:
        raise FormatError(f"unterminated hex string at byte {i}")
    digits = re.sub(rb"\s", b"", content[i + 1 : end])
    if len(digits) % 2:
        digits += b"0"
    try:
        raw = bytes.fromhex(digits.decode("ascii"))
    except ValueError as exc:
        raise FormatError(f"bad hex string at byte {i}") from exc
    return raw.decode("latin-1"), end + 1


def _read_tj_array(content: bytes, i: int) -> tuple[str, int]:
    assert content[i : i + 1] == b"["
    i += 1
    out: list[str] = []
    while i < len(content):
        ch = content[i : i + 1]
        if ch == b"]":
            return "".join(out), i + 1
        if ch == b"(":
            literal, i = _read_literal_string(content, i)
            out.append(literal)
        elif ch == b"<":
            hexstr, i = _read_hex_string(content, i)
            out.append(hexstr)
        else:
            i += 1  # kerning numbers and whitespace
    return "".join(out), i
