"""Text embedding providers and cosine similarity.

The built-in provider hashes character trigrams into a fixed number of
buckets, so the whole reward stack runs offline and deterministically. A
remote HTTP provider with the same surface can be dropped in where a real
sentence encoder is served.
"""

from __future__ import annotations

import hashlib
import os
import threading
import unicodedata
from typing import Protocol, runtime_checkable

import numpy as np

# Keyed hash makes bucket assignment stable across platforms and Python
# processes (the builtin hash() is salted). Changing the key invalidates
# every committed fixture built on top of the embedder.
HASH_KEY = b"geoseek-trigram-v1"

# fastText-style boundary markers so names shorter than three characters
# still produce at least one trigram.
_BOUNDARY_START = "<"
_BOUNDARY_END = ">"

EMBED_URL_ENV = "GEOSEEK_EMBED_URL"
EMBED_TOKEN_ENV = "GEOSEEK_EMBED_TOKEN"


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Deterministic text-to-vector provider; same text, same vector."""

    dimension: int

    def provider_id(self) -> str: ...

    def embed(self, text: str) -> np.ndarray: ...


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped into [-1, 1].

    A zero vector on either side yields 0.0 so empty or unembeddable text
    degrades the downstream reward smoothly instead of raising.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(min(max(float(np.dot(a, b)) / denom, -1.0), 1.0))


def _normalize_text(text: str) -> str:
    return unicodedata.normalize("NFC", text).casefold().strip()


def ngram_embed(text: str, dimension: int) -> np.ndarray:
    """Hash the NFC-normalized, case-folded text's character trigrams into
    `dimension` buckets and L2-normalize the counts.

    Text that is empty after normalization maps to the zero vector, which
    cosine_similarity then scores as 0 against anything.
    """
    if dimension < 8:
        raise ValueError(f"dimension must be >= 8, got {dimension}")
    normalized = _normalize_text(text)
    counts = np.zeros(dimension, dtype=np.float64)
    if not normalized:
        return counts
    padded = _BOUNDARY_START + normalized + _BOUNDARY_END
    for i in range(len(padded) - 2):
        gram = padded[i : i + 3]
        digest = hashlib.blake2s(gram.encode("utf-8"), key=HASH_KEY).digest()
        counts[int.from_bytes(digest[:8], "big") % dimension] += 1.0
    return counts / np.linalg.norm(counts)


class NgramEmbedder:
    """Offline trigram-hashing embedder with a per-instance vector cache.

    Stateless apart from the cache, so one instance can be shared across
    any number of reward workers.
    """

    def __init__(self, dimension: int = 256):
        if dimension < 8:
            raise ValueError(f"dimension must be >= 8, got {dimension}")
        self.dimension = dimension
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def provider_id(self) -> str:
        return f"ngram-v1-d{self.dimension}"

    def embed(self, text: str) -> np.ndarray:
        with self._lock:
            vec = self._cache.get(text)
            if vec is None:
                vec = ngram_embed(text, self.dimension)
                vec.setflags(write=False)
                self._cache[text] = vec
        return vec


class RemoteEmbedder:
    """HTTP embedding provider: POST {"texts": [...]} -> {"vectors": [[...]]}.

    The vector dimension is pinned from the first response; an in-flight
    semaphore keeps concurrent reward workers from stampeding the endpoint.
    """

    def __init__(self, url=None, token=None, session=None, max_in_flight: int = 4):
        self.url = url or os.environ.get(EMBED_URL_ENV)
        if not self.url:
            raise ValueError(f"no embedding endpoint: pass url or set {EMBED_URL_ENV}")
        self.token = token if token is not None else os.environ.get(EMBED_TOKEN_ENV)
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self._gate = threading.Semaphore(max_in_flight)
        self.dimension = 0  # pinned on first embed

    def provider_id(self) -> str:
        return f"remote:{self.url}"

    def embed(self, text: str) -> np.ndarray:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        with self._gate:
            resp = self._session.post(self.url, json={"texts": [text]}, headers=headers)
        resp.raise_for_status()
        vector = np.asarray(resp.json()["vectors"][0], dtype=np.float64)
        if not np.all(np.isfinite(vector)):
            raise ValueError("remote embedding contains non-finite entries")
        if self.dimension == 0:
            self.dimension = vector.shape[0]
        elif vector.shape[0] != self.dimension:
            raise ValueError(
                f"remote dimension changed: {vector.shape[0]} != {self.dimension}"
            )
        return vector
