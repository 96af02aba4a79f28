"""Document-oriented storage abstraction with interchangeable backends.

Two backends ship: an in-memory store and an on-disk store.  The on-disk
layout is a stable, documented format:

    <root>/collections/<name>/<quoted_id>.json
    <root>/blobs/<blob_id>

Document ids are percent-encoded in filenames (alphanumerics, ``-``, ``_``,
``.`` and ``~`` pass through unchanged), so arbitrary id strings are safe.
Every write lands in ``<file>.tmp`` first and is atomically renamed into
place; a crash between the two steps leaves a ``.tmp`` file that reopening
ignores.  Blob ids are the lowercase hex SHA-256 of the content, so
identical bytes are stored once and integrity can be rechecked.  Blob
format tags live in the regular ``blob_meta`` collection.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator
from urllib.parse import quote, unquote

_COLLECTION_RE = re.compile(r"^[a-z_]+$")

BLOB_FORMATS = ("pdf", "docx", "txt", "xml", "doc")
BLOB_META_COLLECTION = "blob_meta"


class StorageError(Exception):
    pass


class StoreOpenError(StorageError):
    """The on-disk layout is corrupt; the message names the offending file."""


class InvalidCollectionName(StorageError):
    pass


@dataclass
class ListPage:
    items: list[tuple[str, dict]]
    total: int


def _check_collection(name: str) -> None:
    if not _COLLECTION_RE.match(name):
        raise InvalidCollectionName(f"collection name must match [a-z_]+: {name!r}")


def _normalize(doc: dict) -> dict:
    # round-trip through JSON so both backends hold exactly what a reader
    # of the serialized form would see (tuples become lists, keys become str)
    return json.loads(json.dumps(doc, ensure_ascii=False))


class Store:
    """Shared behavior for both backends: locking, listing, blob hashing."""

    def __init__(self) -> None:
        self._locks: defaultdict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _lock(self, collection: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[collection]

    # -- documents --

    def put_document(self, collection: str, doc_id: str, doc: dict) -> None:
        _check_collection(collection)
        if not doc_id:
            raise StorageError("document id must be non-empty")
        normalized = _normalize(doc)
        with self._lock(collection):
            self._write(collection, doc_id, normalized)

    def get_document(self, collection: str, doc_id: str) -> dict | None:
        _check_collection(collection)
        return self._read(collection, doc_id)

    def delete_document(self, collection: str, doc_id: str) -> bool:
        _check_collection(collection)
        with self._lock(collection):
            return self._delete(collection, doc_id)

    def list_documents(
        self,
        collection: str,
        where: dict[str, Any] | None = None,
        page: int | None = None,
        page_size: int | None = None,
    ) -> ListPage:
        _check_collection(collection)
        rows = sorted(self._iter_documents(collection), key=lambda kv: kv[0])
        if where:
            rows = [
                (doc_id, doc)
                for doc_id, doc in rows
                if all(doc.get(k) == v for k, v in where.items())
            ]
        total = len(rows)
        if page_size is not None:
            start = ((page or 1) - 1) * page_size
            rows = rows[start : start + page_size]
        return ListPage(items=rows, total=total)

    def list_collections(self) -> list[str]:
        raise NotImplementedError

    # -- blobs --

    def put_blob(self, data: bytes, fmt: str) -> str:
        if not data:
            raise StorageError("blob must be non-empty")
        if fmt not in BLOB_FORMATS:
            raise StorageError(f"unknown blob format: {fmt!r}")
        blob_id = hashlib.sha256(data).hexdigest()
        with self._lock("__blobs__"):
            self._write_blob(blob_id, data)
        self.put_document(BLOB_META_COLLECTION, blob_id, {"format": fmt, "size": len(data)})
        return blob_id

    def get_blob(self, blob_id: str) -> tuple[bytes, str] | None:
        data = self._read_blob(blob_id)
        if data is None:
            return None
        meta = self.get_document(BLOB_META_COLLECTION, blob_id) or {}
        return data, meta.get("format", "txt")

    def list_blobs(self) -> list[str]:
        raise NotImplementedError

    # -- backend primitives --

    def _write(self, collection: str, doc_id: str, doc: dict) -> None:
        raise NotImplementedError

    def _read(self, collection: str, doc_id: str) -> dict | None:
        raise NotImplementedError

    def _delete(self, collection: str, doc_id: str) -> bool:
        raise NotImplementedError

    def _iter_documents(self, collection: str) -> Iterator[tuple[str, dict]]:
        raise NotImplementedError

    def _write_blob(self, blob_id: str, data: bytes) -> None:
        raise NotImplementedError

    def _read_blob(self, blob_id: str) -> bytes | None:
        raise NotImplementedError


class MemoryStore(Store):
    backend = "memory"

    def __init__(self) -> None:
        super().__init__()
        self._collections: dict[str, dict[str, dict]] = {}
        self._blobs: dict[str, bytes] = {}

    def _write(self, collection: str, doc_id: str, doc: dict) -> None:
        self._collections.setdefault(collection, {})[doc_id] = doc

    def _read(self, collection: str, doc_id: str) -> dict | None:
        doc = self._collections.get(collection, {}).get(doc_id)
        return _normalize(doc) if doc is not None else None

    def _delete(self, collection: str, doc_id: str) -> bool:
        col = self._collections.get(collection, {})
        if doc_id in col:
            del col[doc_id]
            return True
        return False

    def _iter_documents(self, collection: str) -> Iterator[tuple[str, dict]]:
        for doc_id, doc in self._collections.get(collection, {}).items():
            yield doc_id, _normalize(doc)

    def list_collections(self) -> list[str]:
        return sorted(name for name, docs in self._collections.items() if docs)

    def _write_blob(self, blob_id: str, data: bytes) -> None:
        self._blobs[blob_id] = bytes(data)

    def _read_blob(self, blob_id: str) -> bytes | None:
        return self._blobs.get(blob_id)

    def list_blobs(self) -> list[str]:
        return sorted(self._blobs)


def _quote_id(doc_id: str) -> str:
    return quote(doc_id, safe="")


def _unquote_id(filename: str) -> str:
    return unquote(filename)


class FileStore(Store):
    backend = "file"

    def __init__(self, root: str | Path, validate: bool = True) -> None:
        super().__init__()
        self.root = Path(root)
        self._collections_dir = self.root / "collections"
        self._blobs_dir = self.root / "blobs"
        self._collections_dir.mkdir(parents=True, exist_ok=True)
        self._blobs_dir.mkdir(parents=True, exist_ok=True)
        if validate:
            self._validate_layout()

    def _validate_layout(self) -> None:
        # committed documents must parse; stray .tmp files are leftovers of
        # interrupted writes and are ignored
        for col_dir in sorted(self._collections_dir.iterdir()):
            if not col_dir.is_dir():
                raise StoreOpenError(f"unexpected file in collections dir: {col_dir}")
            for f in sorted(col_dir.iterdir()):
                if f.name.endswith(".tmp"):
                    continue
                if not f.name.endswith(".json"):
                    raise StoreOpenError(f"unexpected file in collection: {f}")
                try:
                    json.loads(f.read_text("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    raise StoreOpenError(f"corrupt document {f}: {exc}") from exc

    def _doc_path(self, collection: str, doc_id: str) -> Path:
        return self._collections_dir / collection / (_quote_id(doc_id) + ".json")

    def _write(self, collection: str, doc_id: str, doc: dict) -> None:
        path = self._doc_path(collection, doc_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        payload = json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1)
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _read(self, collection: str, doc_id: str) -> dict | None:
        path = self._doc_path(collection, doc_id)
        try:
            return json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            return None

    def _delete(self, collection: str, doc_id: str) -> bool:
        path = self._doc_path(collection, doc_id)
        try:
            os.remove(path)
            return True
        except FileNotFoundError:
            return False

    def _iter_documents(self, collection: str) -> Iterator[tuple[str, dict]]:
        col_dir = self._collections_dir / collection
        if not col_dir.is_dir():
            return
        for f in col_dir.iterdir():
            if not f.name.endswith(".json"):
                continue
            doc_id = _unquote_id(f.name[: -len(".json")])
            yield doc_id, json.loads(f.read_text("utf-8"))

    def list_collections(self) -> list[str]:
        return sorted(
            d.name
            for d in self._collections_dir.iterdir()
            if d.is_dir() and any(f.name.endswith(".json") for f in d.iterdir())
        )

    def _blob_path(self, blob_id: str) -> Path:
        if not re.match(r"^[0-9a-f]{64}$", blob_id):
            raise StorageError(f"malformed blob id: {blob_id!r}")
        return self._blobs_dir / blob_id

    def _write_blob(self, blob_id: str, data: bytes) -> None:
        path = self._blob_path(blob_id)
        if path.exists():
            return  # content-addressed: identical bytes already stored
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _read_blob(self, blob_id: str) -> bytes | None:
        try:
            return self._blob_path(blob_id).read_bytes()
        except FileNotFoundError:
            return None

    def list_blobs(self) -> list[str]:
        return sorted(f.name for f in self._blobs_dir.iterdir() if not f.name.endswith(".tmp"))


def open_store(backend: str = "memory", root_path: str | Path | None = None) -> Store:
    """Open a store; the file backend recovers all previously committed documents."""
    if backend == "memory":
        return MemoryStore()
    if backend == "file":
        if root_path is None:
            raise StorageError("file backend requires root_path")
        try:
            return FileStore(root_path)
        except OSError as exc:
            raise StoreOpenError(f"cannot open store at {root_path}: {exc}") from exc
    raise StorageError(f"unknown backend: {backend!r}")
