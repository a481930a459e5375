"""Embedding providers, cache, and similarity.

Two providers ship: a deterministic offline feature-hashing provider
(FNV-1a token hashing into 256 buckets, L2-normalized) used for tests and
network-free operation, and a remote HTTP provider for hosted embedding
APIs. All provider output is L2-normalized on receipt so that cosine
equals dot product downstream.

The cache stores float32 vectors keyed by (provider, model, content hash
of the normalized text) and always serves the stored values, so a miss
and a later hit return bit-identical arrays and persistence round-trips
exactly.
"""

from __future__ import annotations

import abc
import hashlib
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVectorError,
    DimensionMismatchError,
    InvalidInputError,
    ProviderError,
    ProviderMismatchError,
)
from .text import normalize_whitespace

logger = logging.getLogger(__name__)

HASH_PROVIDER_ID = "hash"
HASH_MODEL_ID = "fnv1a-64"
HASH_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    provider_id: str
    model_id: str

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise InvalidInputError("embedding values must be a 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("embedding values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def degenerate(self) -> bool:
        """True for the all-zero vector (no usable direction)."""
        return not np.any(self.values)

    def same_space(self, other: "EmbeddingVector") -> bool:
        return (
            self.provider_id == other.provider_id
            and self.model_id == other.model_id
            and self.dim == other.dim
        )


def _check_same_space(u: EmbeddingVector, v: EmbeddingVector) -> None:
    if u.provider_id != v.provider_id or u.model_id != v.model_id:
        raise ProviderMismatchError(
            f"cannot compare vectors from ({u.provider_id}, {u.model_id}) "
            f"and ({v.provider_id}, {v.model_id})"
        )
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dimension mismatch: {u.dim} != {v.dim}")


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; zero-norm input is a defined error."""
    _check_same_space(u, v)
    a = np.asarray(u.values, dtype=np.float64)
    b = np.asarray(v.values, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("degenerate vector: zero norm")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def format_similarity(score: float) -> str:
    """Display form of a cosine score: percentage with one decimal."""
    return f"{min(max(score * 100.0, 0.0), 100.0):.1f}%"


class EmbeddingProvider(abc.ABC):
    provider_id: str
    model_id: str
    dim: int | None

    @abc.abstractmethod
    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        """Embed a batch; result order matches input order."""


def _unit(arr: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(arr))
    return arr / norm if norm > 0.0 else arr


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _tokenize(text: str) -> list[str]:
    tokens = []
    current = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def hash_embed(text: str, dim: int = HASH_DIM) -> EmbeddingVector:
    """Deterministic bag-of-words embedding via token feature hashing.

    Lowercase, split on non-alphanumerics, FNV-1a-64 each token into one
    of `dim` buckets, accumulate counts, L2-normalize. A text with no
    tokens yields the zero vector (flagged degenerate downstream).
    """
    if not text:
        raise InvalidInputError("cannot embed empty text")
    counts = np.zeros(dim, dtype=np.float64)
    for token in _tokenize(text):
        counts[fnv1a64(token.encode("utf-8")) % dim] += 1.0
    return EmbeddingVector(_unit(counts), HASH_PROVIDER_ID, HASH_MODEL_ID)


class HashEmbeddingProvider(EmbeddingProvider):
    """Offline provider: reproducible across runs and machines."""

    provider_id = HASH_PROVIDER_ID
    model_id = HASH_MODEL_ID

    def __init__(self, dim: int = HASH_DIM):
        self.dim = dim

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        return [hash_embed(t, self.dim) for t in texts]


class RemoteEmbeddingProvider(EmbeddingProvider):
    """HTTP JSON embedding provider.

    Request/response shape (the de-facto hosted-API convention, see
    README): POST {endpoint} with {"model": ..., "input": [texts]} returns
    {"data": [{"embedding": [...]}, ...]} in input order. Batches are
    capped and failed batches retried with exponential backoff; vectors
    are L2-normalized on receipt.
    """

    provider_id = "remote"

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        dim: int | None = None,
        batch_size: int = 64,
        retries: int = 3,
        timeout: float = 30.0,
    ):
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key = api_key
        self.dim = dim
        self.batch_size = batch_size
        self.retries = retries
        self.timeout = timeout
        import requests

        self._session = requests.Session()

    def _post_batch(self, batch: list[str]) -> list[np.ndarray]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = self._session.post(
            self.endpoint,
            json={"model": self.model_id, "input": batch},
            headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        rows = [np.asarray(item["embedding"], dtype=np.float64) for item in payload["data"]]
        if len(rows) != len(batch):
            raise ValueError(f"provider returned {len(rows)} vectors for {len(batch)} inputs")
        return rows

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        out: list[EmbeddingVector] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            last_error: Exception | None = None
            for attempt in range(self.retries):
                try:
                    rows = self._post_batch(batch)
                    break
                except Exception as exc:  # transport or shape failure: retry
                    last_error = exc
                    if attempt + 1 < self.retries:
                        time.sleep(0.5 * 2**attempt)
            else:
                indices = list(range(start, start + len(batch)))
                raise ProviderError(
                    f"embedding request failed after {self.retries} attempts "
                    f"for batch indices {indices}: {last_error}",
                    failed_indices=indices,
                )
            for row in rows:
                if self.dim is None:
                    self.dim = int(row.shape[0])
                elif row.shape[0] != self.dim:
                    raise DimensionMismatchError(
                        f"provider returned dim {row.shape[0]}, expected {self.dim}"
                    )
                out.append(EmbeddingVector(_unit(row), self.provider_id, self.model_id))
        return out


class EmbeddingCache:
    """float32 vector cache keyed by SHA-256 of the normalized text.

    One cache binds one (provider, model, dim) triple. Reads are safe
    under concurrency; writes are serialized. Concurrent misses for the
    same key may both compute — last write wins with identical values for
    deterministic providers.
    """

    MAGIC = b"PSEB"
    VERSION = 1

    def __init__(self, provider_id: str, model_id: str, dim: int):
        self.provider_id = provider_id
        self.model_id = model_id
        self.dim = dim
        self._entries: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        self.dirty = False

    @staticmethod
    def key_for(text: str) -> bytes:
        return hashlib.sha256(normalize_whitespace(text).encode("utf-8")).digest()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: bytes) -> np.ndarray | None:
        return self._entries.get(key)

    def put(self, key: bytes, values: np.ndarray) -> np.ndarray:
        quantized = np.ascontiguousarray(values, dtype=np.float32)
        if quantized.shape != (self.dim,):
            raise DimensionMismatchError(
                f"cache dim {self.dim} cannot hold vector of shape {quantized.shape}"
            )
        with self._lock:
            self._entries[key] = quantized
            self.dirty = True
        return quantized

    def save(self, path: str) -> None:
        """Atomic rewrite: header then fixed-size (key, float32 values) records."""
        with self._lock:
            items = list(self._entries.items())
            provider = self.provider_id.encode("utf-8")
            model = self.model_id.encode("utf-8")
            tmp = f"{path}.tmp.{os.getpid()}"
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            with open(tmp, "wb") as fh:
                fh.write(self.MAGIC)
                fh.write(struct.pack("<I", self.VERSION))
                fh.write(struct.pack("<H", len(provider)) + provider)
                fh.write(struct.pack("<H", len(model)) + model)
                fh.write(struct.pack("<I", self.dim))
                fh.write(struct.pack("<Q", len(items)))
                for key, values in items:
                    fh.write(key)
                    fh.write(values.tobytes())
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
            self.dirty = False

    @classmethod
    def load(cls, path: str, provider_id: str, model_id: str, dim: int) -> "EmbeddingCache":
        """Load a cache file, or start empty if absent or bound to another model."""
        cache = cls(provider_id, model_id, dim)
        if not os.path.exists(path):
            return cache
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != cls.MAGIC:
                logger.warning("ignoring cache file with bad magic: %s", path)
                return cache
            (version,) = struct.unpack("<I", fh.read(4))
            if version != cls.VERSION:
                logger.warning("ignoring cache file version %d: %s", version, path)
                return cache
            (plen,) = struct.unpack("<H", fh.read(2))
            file_provider = fh.read(plen).decode("utf-8")
            (mlen,) = struct.unpack("<H", fh.read(2))
            file_model = fh.read(mlen).decode("utf-8")
            (file_dim,) = struct.unpack("<I", fh.read(4))
            if (file_provider, file_model, file_dim) != (provider_id, model_id, dim):
                logger.warning(
                    "cache file %s holds (%s, %s, %d); starting fresh for (%s, %s, %d)",
                    path, file_provider, file_model, file_dim, provider_id, model_id, dim,
                )
                return cache
            (count,) = struct.unpack("<Q", fh.read(8))
            record = 32 + 4 * dim
            for _ in range(count):
                blob = fh.read(record)
                if len(blob) < record:
                    logger.warning("truncated cache record in %s; keeping prefix", path)
                    break
                key = blob[:32]
                values = np.frombuffer(blob[32:], dtype=np.float32).copy()
                cache._entries[key] = values
        return cache


def embed_cached(
    provider: EmbeddingProvider, texts: list[str], cache: EmbeddingCache
) -> list[EmbeddingVector]:
    """Resolve each text from the cache, calling the provider only on misses.

    Result order matches input order and every returned vector comes from
    the cache, so repeated calls are bit-identical. A provider failure
    propagates with the indices of the texts left unresolved.
    """
    keys = [cache.key_for(t) for t in texts]
    missing: dict[bytes, str] = {}
    for key, text in zip(keys, texts):
        if cache.get(key) is None and key not in missing:
            missing[key] = text
    if missing:
        miss_keys = list(missing.keys())
        try:
            fresh = provider.embed([missing[k] for k in miss_keys])
        except ProviderError as exc:
            unresolved = [i for i, k in enumerate(keys) if cache.get(k) is None]
            raise ProviderError(
                f"embedding provider failed; texts at indices {unresolved} unresolved: "
                f"{exc.message}",
                failed_indices=unresolved,
            ) from exc
        for key, vector in zip(miss_keys, fresh):
            cache.put(key, vector.values)
    return [
        EmbeddingVector(cache.get(key), provider.provider_id, provider.model_id)
        for key in keys
    ]
