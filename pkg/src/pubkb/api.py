"""RESTful JSON service over the knowledge base.

All routes live under /api and require ``Authorization: Bearer <token>``
except register and login.  Errors are uniform:
``{"error": {"code": ..., "message": ...}}`` with the matching HTTP status.
"""
from __future__ import annotations

import hashlib
import secrets
import uuid
from datetime import datetime, timedelta, timezone
from typing import Callable

from fastapi import Depends, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import extract as extract_mod
from .config import AppConfig
from .index import EmptyQuery
from .model import (
    ProfileSettings,
    ResearcherProfile,
    SchemaError,
    profile_from_dict,
    profile_to_dict,
    record_to_dict,
    validate_settings,
)
from .service import (
    KnowledgeBase,
    PublicationNotFound,
    SourceNotFound,
    ValidationFailed,
)
from .storage import BLOB_FORMATS

PROFILES = "profiles"
SESSIONS = "sessions"

MIN_PASSWORD_LENGTH = 8
SALT_BYTES = 16  # 128-bit salt
TOKEN_BYTES = 16  # 128-bit session token


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, violations: list | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.violations = violations

    def body(self) -> dict:
        error: dict = {"code": self.code, "message": self.message}
        if self.violations is not None:
            error["violations"] = [
                {"field": v.field, "rule": v.rule} for v in self.violations
            ]
        return {"error": error}


def _digest(password: str, salt: bytes, iterations: int) -> str:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations).hex()


class AuthManager:
    """Registration, constant-work login, and bearer-token authorization;
    profiles and sessions persist in the store, so a process restart
    invalidates nothing."""

    def __init__(self, kb: KnowledgeBase, ttl_hours: float, iterations: int,
                 now: Callable[[], datetime]):
        self.kb = kb
        self.ttl = timedelta(hours=ttl_hours)
        self.iterations = iterations
        self.now = now
        # burned on unknown logins so both failure paths cost one full digest
        self._decoy_salt = bytes(SALT_BYTES)

    def _find_profile(self, login: str) -> ResearcherProfile | None:
        page = self.kb.store.list_documents(PROFILES, {"login": login})
        if not page.items:
            return None
        return profile_from_dict(page.items[0][1])

    def register(self, login: str, password: str, display_name: str = "") -> str:
        login = login.strip()
        if not login:
            raise ApiError(400, "validation", "login must be non-empty")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise ApiError(
                400, "weak_password",
                f"password must be at least {MIN_PASSWORD_LENGTH} characters",
            )
        if self._find_profile(login) is not None:
            raise ApiError(409, "conflict", "login already registered")
        salt = secrets.token_bytes(SALT_BYTES)
        profile = ResearcherProfile(
            id=uuid.uuid4().hex,
            login=login,
            password_digest=_digest(password, salt, self.iterations),
            salt=salt.hex(),
            iterations=self.iterations,
            display_name=display_name or login,
        )
        self.kb.store.put_document(PROFILES, profile.id, profile_to_dict(profile))
        return profile.id

    def login(self, login: str, password: str) -> dict:
        profile = self._find_profile(login.strip())
        if profile is None:
            _digest(password, self._decoy_salt, self.iterations)
            raise ApiError(401, "auth_failed", "unknown login or wrong password")
        computed = _digest(password, bytes.fromhex(profile.salt), profile.iterations)
        if not secrets.compare_digest(computed, profile.password_digest):
            raise ApiError(401, "auth_failed", "unknown login or wrong password")
        issued = self.now()
        expires = issued + self.ttl
        token = secrets.token_hex(TOKEN_BYTES)
        self.kb.store.put_document(
            SESSIONS,
            token,
            {
                "token": token,
                "researcher_id": profile.id,
                "issued_at": issued.isoformat(),
                "expires_at": expires.isoformat(),
            },
        )
        return {"token": token, "expires_at": expires.isoformat().replace("+00:00", "Z")}

    def authorize(self, header_value: str | None) -> str:
        if not header_value or not header_value.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing or malformed Authorization header")
        token = header_value[len("Bearer "):].strip()
        session = self.kb.store.get_document(SESSIONS, token) if token else None
        if session is None:
            raise ApiError(401, "unauthorized", "unknown or revoked token")
        expires = datetime.fromisoformat(session["expires_at"])
        if expires.tzinfo is None:
            expires = expires.replace(tzinfo=timezone.utc)
        if self.now() >= expires:
            raise ApiError(401, "unauthorized", "token expired")
        return session["researcher_id"]

    def get_profile(self, researcher_id: str) -> ResearcherProfile:
        doc = self.kb.store.get_document(PROFILES, researcher_id)
        if doc is None:
            raise ApiError(401, "unauthorized", "profile gone")
        return profile_from_dict(doc)


async def _json_body(request: Request) -> dict:
    try:
        data = await request.json()
    except Exception:
        raise ApiError(400, "bad_json", "request body is not valid JSON") from None
    if not isinstance(data, dict):
        raise ApiError(400, "bad_json", "request body must be a JSON object")
    return data


def create_app(
    config: AppConfig | None = None,
    kb: KnowledgeBase | None = None,
    now: Callable[[], datetime] | None = None,
) -> FastAPI:
    config = config or AppConfig()
    clock = now or (lambda: datetime.now(timezone.utc))
    kb = kb or KnowledgeBase(config=config, now=clock)
    auth = AuthManager(kb, config.token_ttl_hours, config.pbkdf2_iterations, clock)

    app = FastAPI(title="pubkb", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.kb = kb
    app.state.auth = auth

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def _coercion_error(_req: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_request", "message": str(exc.errors()[:1])}},
        )

    def require_auth(request: Request) -> str:
        return auth.authorize(request.headers.get("Authorization"))

    # -- auth (open) --

    @app.post("/api/auth/register", status_code=201)
    async def register(request: Request):
        body = await _json_body(request)
        researcher_id = auth.register(
            str(body.get("login", "")), str(body.get("password", "")),
            str(body.get("display_name", "")),
        )
        return {"researcher_id": researcher_id}

    @app.post("/api/auth/login")
    async def login(request: Request):
        body = await _json_body(request)
        return auth.login(str(body.get("login", "")), str(body.get("password", "")))

    # -- publications --

    @app.get("/api/publications")
    async def list_publications(
        request: Request,
        year: int | None = None,
        kind: str | None = None,
        page: int = 1,
        page_size: int = 20,
        _rid: str = Depends(require_auth),
    ):
        records, total = kb.list_publications(year=year, kind=kind, page=page, page_size=page_size)
        return {"items": [record_to_dict(r) for r in records], "total": total}

    @app.post("/api/publications", status_code=201)
    async def create_publication(request: Request, _rid: str = Depends(require_auth)):
        body = await _json_body(request)
        try:
            record = kb.create_publication(body)
        except SchemaError as exc:
            raise ApiError(400, "schema", str(exc)) from exc
        except ValidationFailed as exc:
            raise ApiError(400, "validation", str(exc), violations=exc.violations) from exc
        return {"id": record.id}

    @app.get("/api/publications/{pub_id}")
    async def get_publication(pub_id: str, _rid: str = Depends(require_auth)):
        try:
            return record_to_dict(kb.get_publication(pub_id))
        except PublicationNotFound:
            raise ApiError(404, "not_found", f"no publication {pub_id}") from None

    @app.put("/api/publications/{pub_id}")
    async def update_publication(
        pub_id: str, request: Request, _rid: str = Depends(require_auth)
    ):
        body = await _json_body(request)
        try:
            record = kb.update_publication(pub_id, body)
        except PublicationNotFound:
            raise ApiError(404, "not_found", f"no publication {pub_id}") from None
        except SchemaError as exc:
            raise ApiError(400, "schema", str(exc)) from exc
        except ValidationFailed as exc:
            raise ApiError(400, "validation", str(exc), violations=exc.violations) from exc
        return record_to_dict(record)

    @app.delete("/api/publications/{pub_id}", status_code=204)
    async def delete_publication(pub_id: str, _rid: str = Depends(require_auth)):
        try:
            kb.delete_publication(pub_id)
        except PublicationNotFound:
            raise ApiError(404, "not_found", f"no publication {pub_id}") from None
        return Response(status_code=204)

    @app.post("/api/publications/{pub_id}/file", status_code=201)
    async def upload_file(
        pub_id: str, request: Request, format: str = "txt", _rid: str = Depends(require_auth)
    ):
        if format not in BLOB_FORMATS:
            raise ApiError(400, "bad_format", f"format must be one of {BLOB_FORMATS}")
        data = await request.body()
        try:
            blob_id, extracted = kb.attach_file(pub_id, data, format)
        except PublicationNotFound:
            raise ApiError(404, "not_found", f"no publication {pub_id}") from None
        except extract_mod.EmptyExtraction as exc:
            raise ApiError(422, "empty_extraction", str(exc)) from exc
        except extract_mod.Unsupported as exc:
            raise ApiError(422, "unsupported", str(exc)) from exc
        except extract_mod.FormatError as exc:
            raise ApiError(400, "format_error", str(exc)) from exc
        return {
            "blob_id": blob_id,
            "char_count": extracted.char_count,
            "language": extracted.language,
        }

    # -- search --

    @app.get("/api/search")
    async def search(
        q: str = "", scope: str = "all", limit: int = 20, _rid: str = Depends(require_auth)
    ):
        if scope not in ("publications", "ontology", "all"):
            raise ApiError(400, "bad_scope", "scope must be publications|ontology|all")
        try:
            hits = kb.search(q, scope=scope, limit=limit)
        except EmptyQuery as exc:
            raise ApiError(400, "empty_query", str(exc)) from exc
        return {
            "hits": [
                {
                    "result_kind": h.result_kind,
                    "target_id": h.target_id,
                    "score": h.score,
                    "snippet": h.snippet,
                }
                for h in hits
            ]
        }

    # -- ontology --

    @app.get("/api/ontology/graph")
    async def ontology_graph(
        min_weight: float | None = None, _rid: str = Depends(require_auth)
    ):
        return kb.graph_json(min_weight)

    @app.post("/api/ontology/rebuild")
    async def ontology_rebuild(_rid: str = Depends(require_auth)):
        graph = kb.rebuild_ontology()
        return {"nodes": len(graph.nodes), "edges": len(graph.edges)}

    # -- harvest --

    @app.post("/api/harvest")
    async def run_harvest(request: Request, _rid: str = Depends(require_auth)):
        body = await _json_body(request)
        source_id = str(body.get("source_id", ""))
        try:
            return kb.run_harvest(source_id)
        except SourceNotFound:
            raise ApiError(404, "not_found", f"no source {source_id}") from None

    # -- settings --

    @app.get("/api/settings")
    async def get_settings(rid: str = Depends(require_auth)):
        profile = auth.get_profile(rid)
        return {
            "visible_tabs": list(profile.settings.visible_tabs),
            "ui_language": profile.settings.ui_language,
        }

    @app.put("/api/settings")
    async def put_settings(request: Request, rid: str = Depends(require_auth)):
        body = await _json_body(request)
        unknown = set(body) - {"visible_tabs", "ui_language"}
        if unknown:
            raise ApiError(400, "schema", f"unknown keys in settings: {sorted(unknown)}")
        profile = auth.get_profile(rid)
        settings = ProfileSettings(
            visible_tabs=tuple(body.get("visible_tabs", profile.settings.visible_tabs)),
            ui_language=str(body.get("ui_language", profile.settings.ui_language)),
        )
        violations = validate_settings(settings)
        if violations:
            raise ApiError(400, "validation", "invalid settings", violations=violations)
        updated = ResearcherProfile(
            id=profile.id, login=profile.login,
            password_digest=profile.password_digest, salt=profile.salt,
            iterations=profile.iterations, display_name=profile.display_name,
            settings=settings,
        )
        kb.store.put_document(PROFILES, updated.id, profile_to_dict(updated))
        return {"visible_tabs": list(settings.visible_tabs), "ui_language": settings.ui_language}

    # -- export --

    @app.get("/api/export")
    async def export_dump(_rid: str = Depends(require_auth)):
        return kb.export_dump()

    _mount_webroot(app, config)
    return app


def _mount_webroot(app: FastAPI, config: AppConfig) -> None:
    if config.webroot and config.webroot.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.webroot), html=True), name="web")
