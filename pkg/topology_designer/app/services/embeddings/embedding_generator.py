"""Sentence-embedding providers.

Every provider maps text to a unit-L2 vector of length ``d_raw`` and is
deterministic: the same text always yields the same bits.
"""
import hashlib
import json
import re
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from topology_designer.app.core.errors import DimensionError, InputError, LookupFailure
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import EmbeddingConfig
from topology_designer.app.core.state import TaskQuery

_TOKEN = re.compile(r"\w+", re.UNICODE)


class EmbeddingProvider(Protocol):
    mode: str
    d_raw: int

    def embed(self, text: str) -> np.ndarray: ...


def _require_text(text: str) -> str:
    stripped = text.strip()
    if not stripped:
        raise InputError("cannot embed empty text")
    return stripped


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector.astype(np.float64))
    if norm == 0.0:
        raise InputError("embedding has zero norm")
    return (vector / norm).astype(np.float32)


class HashedEmbeddingProvider:
    """Signed feature hashing of lowercase word tokens into ``d_raw`` buckets."""

    mode = "hashed"

    def __init__(self, d_raw: int = 384):
        self.d_raw = d_raw

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
        sign = 1.0 if (digest >> 63) & 1 == 0 else -1.0
        return digest % self.d_raw, sign

    def embed(self, text: str) -> np.ndarray:
        stripped = _require_text(text)
        tokens = _TOKEN.findall(stripped.lower()) or [stripped.lower()]
        counts = np.zeros(self.d_raw, dtype=np.float64)
        for token in tokens:
            bucket, sign = self._bucket(token)
            counts[bucket] += sign
        if not counts.any():
            # all signed counts cancelled; fall back to the whole text as one token
            bucket, sign = self._bucket(stripped.lower())
            counts[bucket] = sign
        return _normalize(counts)


class FileEmbeddingProvider:
    """Externally computed embeddings keyed by exact text (JSON Lines)."""

    mode = "file"

    def __init__(self, table: dict[str, np.ndarray], d_raw: int):
        self.d_raw = d_raw
        self.table = table

    @classmethod
    def from_path(cls, path: str, d_raw: int) -> "FileEmbeddingProvider":
        return cls(load_embedding_file(path, d_raw), d_raw)

    def embed(self, text: str) -> np.ndarray:
        _require_text(text)
        try:
            return self.table[text]
        except KeyError:
            raise LookupFailure(f"no embedding stored for text {text!r}") from None


def load_embedding_file(path: str, d_raw: int) -> dict[str, np.ndarray]:
    source = Path(path)
    if not source.exists():
        raise InputError(f"embedding file not found: {path}")
    table: dict[str, np.ndarray] = {}
    with open(source, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                vector = np.asarray(record["embedding"], dtype=np.float32)
                text = record["text"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise InputError(f"{path}:{line_no}: malformed embedding record: {e}") from e
            if vector.shape != (d_raw,):
                raise DimensionError(f"{path}:{line_no}: embedding has length {vector.size}, expected {d_raw}")
            table[text] = _normalize(vector)
    logger.info(f"Loaded {len(table)} embeddings from {path}")
    return table


def get_embedding_provider(config: Optional[EmbeddingConfig] = None, d_raw: int = 384) -> EmbeddingProvider:
    config = config or EmbeddingConfig()
    if config.mode == "file":
        if not config.path:
            raise InputError("file-backed embeddings need embedding.path")
        return FileEmbeddingProvider.from_path(config.path, d_raw)
    if config.mode == "sentence-transformer":
        from .local_embedding_generator import SentenceTransformerProvider

        return SentenceTransformerProvider(config.model_name, d_raw)
    return HashedEmbeddingProvider(d_raw)


def base_text_embedding(text: str, provider: EmbeddingProvider) -> np.ndarray:
    return provider.embed(text)


def query_embedding(query: TaskQuery, provider: EmbeddingProvider) -> np.ndarray:
    """Raw embedding of a query, preferring a precomputed vector when present."""
    if query.precomputed_embedding is None:
        return provider.embed(query.text)
    vector = np.asarray(query.precomputed_embedding, dtype=np.float32)
    if vector.shape != (provider.d_raw,):
        raise DimensionError(f"precomputed embedding has length {vector.size}, expected {provider.d_raw}")
    return _normalize(vector)


def normalize_embedding(vector) -> np.ndarray:
    return _normalize(np.asarray(vector, dtype=np.float32))
