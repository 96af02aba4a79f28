"""Documented JSON Schemas of the wire formats: the publication record,
every REST response body, and the CLI --json outputs.

These dicts are the contract the golden-contract test suite validates
against; clients should treat them as the source of truth.
"""
from __future__ import annotations

from .model import KINDS, LANGUAGES, ORIGINS, RESULT_KINDS, TABS, UI_LANGUAGES

_nullable_string = {"type": ["string", "null"]}

AUTHOR = {
    "type": "object",
    "properties": {
        "family": {"type": "string"},
        "given": {"type": "string"},
        "orcid": _nullable_string,
    },
    "required": ["family", "given", "orcid"],
    "additionalProperties": False,
}

PUBLICATION_RECORD = {
    "type": "object",
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "kind": {"enum": list(KINDS)},
        "title": {"type": "string", "minLength": 1},
        "authors": {"type": "array", "items": AUTHOR},
        "year": {"type": "integer", "minimum": 1800, "maximum": 2100},
        "venue": _nullable_string,
        "language": {"enum": list(LANGUAGES)},
        "keywords": {"type": "array", "items": {"type": "string"}},
        "abstract": _nullable_string,
        "identifiers": {
            "type": "object",
            "properties": {"doi": _nullable_string, "url": _nullable_string},
            "required": ["doi", "url"],
            "additionalProperties": False,
        },
        "source": {
            "type": "object",
            "properties": {
                "origin": {"enum": list(ORIGINS)},
                "source_id": _nullable_string,
            },
            "required": ["origin", "source_id"],
            "additionalProperties": False,
        },
        "blob_ids": {"type": "array", "items": {"type": "string"}},
        "created_at": {"type": "string"},
        "updated_at": {"type": "string"},
    },
    "required": [
        "id", "kind", "title", "authors", "year", "venue", "language",
        "keywords", "abstract", "identifiers", "source", "blob_ids",
        "created_at", "updated_at",
    ],
    "additionalProperties": False,
}

ERROR_BODY = {
    "type": "object",
    "properties": {
        "error": {
            "type": "object",
            "properties": {
                "code": {"type": "string"},
                "message": {"type": "string"},
                "violations": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"field": {"type": "string"}, "rule": {"type": "string"}},
                        "required": ["field", "rule"],
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["code", "message"],
            "additionalProperties": False,
        }
    },
    "required": ["error"],
    "additionalProperties": False,
}

REGISTER_RESPONSE = {
    "type": "object",
    "properties": {"researcher_id": {"type": "string", "minLength": 1}},
    "required": ["researcher_id"],
    "additionalProperties": False,
}

LOGIN_RESPONSE = {
    "type": "object",
    "properties": {
        "token": {"type": "string", "pattern": "^[0-9a-f]{32}$"},
        "expires_at": {"type": "string"},
    },
    "required": ["token", "expires_at"],
    "additionalProperties": False,
}

PUBLICATION_LIST_RESPONSE = {
    "type": "object",
    "properties": {
        "items": {"type": "array", "items": PUBLICATION_RECORD},
        "total": {"type": "integer", "minimum": 0},
    },
    "required": ["items", "total"],
    "additionalProperties": False,
}

CREATE_RESPONSE = {
    "type": "object",
    "properties": {"id": {"type": "string", "minLength": 1}},
    "required": ["id"],
    "additionalProperties": False,
}

UPLOAD_RESPONSE = {
    "type": "object",
    "properties": {
        "blob_id": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "char_count": {"type": "integer", "minimum": 0},
        "language": {"enum": list(LANGUAGES)},
    },
    "required": ["blob_id", "char_count", "language"],
    "additionalProperties": False,
}

SEARCH_RESPONSE = {
    "type": "object",
    "properties": {
        "hits": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "result_kind": {"enum": list(RESULT_KINDS)},
                    "target_id": {"type": "string"},
                    "score": {"type": "number", "minimum": 0},
                    "snippet": _nullable_string,
                },
                "required": ["result_kind", "target_id", "score", "snippet"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["hits"],
    "additionalProperties": False,
}

GRAPH_RESPONSE = {
    "type": "object",
    "properties": {
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "label": {"type": "string"},
                    "df": {"type": "integer", "minimum": 0},
                    "weight": {"type": "number", "minimum": 0},
                },
                "required": ["id", "label", "df", "weight"],
                "additionalProperties": False,
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "from": {"type": "string"},
                    "to": {"type": "string"},
                    "kind": {"enum": ["cooc", "isa"]},
                    "weight": {"type": "number"},
                },
                "required": ["from", "to", "kind", "weight"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["nodes", "edges"],
    "additionalProperties": False,
}

REBUILD_RESPONSE = {
    "type": "object",
    "properties": {
        "nodes": {"type": "integer", "minimum": 0},
        "edges": {"type": "integer", "minimum": 0},
    },
    "required": ["nodes", "edges"],
    "additionalProperties": False,
}

HARVEST_RESPONSE = {
    "type": "object",
    "properties": {
        "imported": {"type": "integer", "minimum": 0},
        "duplicates": {"type": "integer", "minimum": 0},
        "rejects": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "item_index": {"type": "integer", "minimum": 0},
                    "reason": {"type": "string"},
                },
                "required": ["item_index", "reason"],
                "additionalProperties": False,
            },
        },
        "error": _nullable_string,
    },
    "required": ["imported", "duplicates", "rejects", "error"],
    "additionalProperties": False,
}

SETTINGS_RESPONSE = {
    "type": "object",
    "properties": {
        "visible_tabs": {"type": "array", "items": {"enum": list(TABS)}},
        "ui_language": {"enum": list(UI_LANGUAGES)},
    },
    "required": ["visible_tabs", "ui_language"],
    "additionalProperties": False,
}

EXPORT_RESPONSE = {
    "type": "object",
    "properties": {
        "collections": {
            "type": "object",
            "additionalProperties": {"type": "object", "additionalProperties": {"type": "object"}},
        },
        "blobs": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "format": {"type": "string"},
                    "data_base64": {"type": "string"},
                },
                "required": ["format", "data_base64"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["collections", "blobs"],
    "additionalProperties": False,
}

# --- CLI --json outputs ---

CLI_INIT = {
    "type": "object",
    "properties": {"root": {"type": "string"}},
    "required": ["root"],
    "additionalProperties": False,
}

CLI_USER_ADD = {
    "type": "object",
    "properties": {"researcher_id": {"type": "string"}, "login": {"type": "string"}},
    "required": ["researcher_id", "login"],
    "additionalProperties": False,
}

CLI_INGEST = {
    "type": "object",
    "properties": {
        "ingested": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "path": {"type": "string"},
                    "title": {"type": "string"},
                    "language": {"enum": list(LANGUAGES)},
                    "char_count": {"type": "integer", "minimum": 0},
                    "blob_id": {"type": "string"},
                },
                "required": ["id", "path", "title", "language", "char_count", "blob_id"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["ingested"],
    "additionalProperties": False,
}

CLI_REINDEX = {
    "type": "object",
    "properties": {"indexed_fields": {"type": "integer", "minimum": 0}},
    "required": ["indexed_fields"],
    "additionalProperties": False,
}

CLI_ONTOLOGY_BUILD = REBUILD_RESPONSE

CLI_HARVEST = HARVEST_RESPONSE

CLI_EXPORT = {
    "type": "object",
    "properties": {
        "file": {"type": "string"},
        "collections": {"type": "integer", "minimum": 0},
        "blobs": {"type": "integer", "minimum": 0},
    },
    "required": ["file", "collections", "blobs"],
    "additionalProperties": False,
}

CLI_IMPORT = {
    "type": "object",
    "properties": {
        "documents": {"type": "integer", "minimum": 0},
        "blobs": {"type": "integer", "minimum": 0},
        "indexed": {"type": "integer", "minimum": 0},
    },
    "required": ["documents", "blobs", "indexed"],
    "additionalProperties": False,
}
