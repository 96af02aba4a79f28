"""Service configuration: JSON config file plus environment overrides.

The config file path comes from OBZP_CONFIG; OBZP_ROOT, OBZP_PORT and
OBZP_TOKEN_TTL_HOURS override individual fields.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .ontology import OntologyParams

ENV_CONFIG = "OBZP_CONFIG"
ENV_ROOT = "OBZP_ROOT"
ENV_PORT = "OBZP_PORT"
ENV_TOKEN_TTL_HOURS = "OBZP_TOKEN_TTL_HOURS"


@dataclass
class AppConfig:
    root: Path | None = None  # None -> in-memory store
    port: int = 8765
    token_ttl_hours: float = 24.0
    pbkdf2_iterations: int = 100_000
    extractor_plugins: dict[str, list[str]] = field(default_factory=dict)
    translator_cmd: list[str] | None = None
    glossary_stub_enabled: bool = True
    ontology: OntologyParams = field(default_factory=OntologyParams)
    webroot: Path | None = None  # static assets of the web client, if built

    @property
    def backend(self) -> str:
        return "file" if self.root else "memory"


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    env = os.environ if env is None else env
    cfg = AppConfig()
    config_path = path or env.get(ENV_CONFIG)
    if config_path:
        raw = json.loads(Path(config_path).read_text("utf-8"))
        if raw.get("root"):
            cfg.root = Path(raw["root"])
        cfg.port = int(raw.get("port", cfg.port))
        cfg.token_ttl_hours = float(raw.get("token_ttl_hours", cfg.token_ttl_hours))
        cfg.pbkdf2_iterations = int(raw.get("pbkdf2_iterations", cfg.pbkdf2_iterations))
        cfg.extractor_plugins = {
            fmt: list(cmd) for fmt, cmd in raw.get("extractor_plugins", {}).items()
        }
        if raw.get("translator_cmd"):
            cfg.translator_cmd = list(raw["translator_cmd"])
        cfg.glossary_stub_enabled = bool(raw.get("glossary_stub_enabled", True))
        if raw.get("ontology"):
            cfg.ontology = OntologyParams.from_doc(raw["ontology"])
        if raw.get("webroot"):
            cfg.webroot = Path(raw["webroot"])
    if env.get(ENV_ROOT):
        cfg.root = Path(env[ENV_ROOT])
    if env.get(ENV_PORT):
        cfg.port = int(env[ENV_PORT])
    if env.get(ENV_TOKEN_TTL_HOURS):
        cfg.token_ttl_hours = float(env[ENV_TOKEN_TTL_HOURS])
    return cfg
