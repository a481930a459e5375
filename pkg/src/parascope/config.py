"""Settings: JSON config file with environment-variable overrides.

Everything runs offline by default (hash embedder, stub LLM); remote
providers are opt-in via config or the PARASCOPE_* environment variables.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Mapping

from .embedding import (
    HASH_DIM,
    EmbeddingProvider,
    HashEmbeddingProvider,
    RemoteEmbeddingProvider,
)
from .errors import InvalidInputError
from .query import LLMProvider, RemoteLLMProvider, StubLLMProvider


@dataclass
class EmbeddingSettings:
    provider: str = "hash"  # "hash" | "remote"
    model: str = ""
    endpoint: str = ""
    dim: int = HASH_DIM
    batch_size: int = 64
    retries: int = 3


@dataclass
class LLMSettings:
    provider: str = "stub"  # "stub" | "remote"
    model: str = ""
    endpoint: str = ""
    temperature: float = 0.0
    requests_per_minute: float = 60.0


@dataclass
class Settings:
    workspace: str = "./workspace"
    include_abstract: bool = True
    default_k: int = 5
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    llm: LLMSettings = field(default_factory=LLMSettings)

    @property
    def api_token(self) -> str | None:
        """Shared bearer token; endpoints are open when unset."""
        return os.environ.get("PARASCOPE_API_TOKEN") or None


def load_settings(
    path: str | None = None, env: Mapping[str, str] | None = None
) -> Settings:
    """Defaults <- config file <- environment overrides, in that order."""
    env = os.environ if env is None else env
    settings = Settings()

    path = path or env.get("PARASCOPE_CONFIG")
    if path:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        for key in ("workspace", "include_abstract", "default_k", "host", "port",
                    "cors_origins"):
            if key in raw:
                setattr(settings, key, raw[key])
        for section, target in (("embedding", settings.embedding), ("llm", settings.llm)):
            for key, value in raw.get(section, {}).items():
                if not hasattr(target, key):
                    raise InvalidInputError(f"unknown config key {section}.{key}")
                setattr(target, key, value)

    if "PARASCOPE_WORKSPACE" in env:
        settings.workspace = env["PARASCOPE_WORKSPACE"]
    if "PARASCOPE_PORT" in env:
        settings.port = int(env["PARASCOPE_PORT"])
    if "PARASCOPE_HOST" in env:
        settings.host = env["PARASCOPE_HOST"]
    emb, llm = settings.embedding, settings.llm
    if "PARASCOPE_EMBEDDING_PROVIDER" in env:
        emb.provider = env["PARASCOPE_EMBEDDING_PROVIDER"]
    if "PARASCOPE_EMBEDDING_MODEL" in env:
        emb.model = env["PARASCOPE_EMBEDDING_MODEL"]
    if "PARASCOPE_EMBEDDING_ENDPOINT" in env:
        emb.endpoint = env["PARASCOPE_EMBEDDING_ENDPOINT"]
    if "PARASCOPE_LLM_PROVIDER" in env:
        llm.provider = env["PARASCOPE_LLM_PROVIDER"]
    if "PARASCOPE_LLM_MODEL" in env:
        llm.model = env["PARASCOPE_LLM_MODEL"]
    if "PARASCOPE_LLM_ENDPOINT" in env:
        llm.endpoint = env["PARASCOPE_LLM_ENDPOINT"]
    return settings


def build_embedding_provider(settings: Settings) -> EmbeddingProvider:
    emb = settings.embedding
    if emb.provider == "hash":
        return HashEmbeddingProvider(dim=emb.dim)
    if emb.provider == "remote":
        if not emb.endpoint or not emb.model:
            raise InvalidInputError("remote embedding provider needs endpoint and model")
        return RemoteEmbeddingProvider(
            endpoint=emb.endpoint,
            model_id=emb.model,
            api_key=os.environ.get("PARASCOPE_EMBED_API_KEY"),
            dim=emb.dim or None,
            batch_size=emb.batch_size,
            retries=emb.retries,
        )
    raise InvalidInputError(f"unknown embedding provider {emb.provider!r}")


def build_llm_provider(settings: Settings) -> LLMProvider:
    llm = settings.llm
    if llm.provider == "stub":
        return StubLLMProvider()
    if llm.provider == "remote":
        if not llm.endpoint or not llm.model:
            raise InvalidInputError("remote LLM provider needs endpoint and model")
        return RemoteLLMProvider(
            endpoint=llm.endpoint,
            model_id=llm.model,
            api_key=os.environ.get("PARASCOPE_LLM_API_KEY"),
            temperature=llm.temperature,
            requests_per_minute=llm.requests_per_minute,
        )
    raise InvalidInputError(f"unknown LLM provider {llm.provider!r}")
