"""Query embedding providers.

The default provider is a deterministic feature-hashing embedder: tokens are
hashed into a fixed number of buckets, counts accumulated, and the vector
L2-normalized. It needs no model download and makes tests reproducible.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, NormalizationError, ProviderError
from .features import tokenize

#: A provider maps text to a raw (not necessarily normalized) vector.
EmbeddingProvider = Callable[[str], Sequence[float]]

DEFAULT_DIM = 256


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


class HashingEmbedder:
    """Deterministic token feature-hashing provider."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            vec[_bucket(token, self.dim)] += 1.0
        return vec


def normalize(vector: Sequence[float], dim: int) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != dim:
        raise DimensionMismatch(
            f"provider returned shape {vec.shape}, expected ({dim},)"
        )
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise NormalizationError("cannot unit-normalize zero or non-finite vector")
    return vec / norm


def embed(query_text: str, provider: EmbeddingProvider, dim: int) -> np.ndarray:
    """Embed text and unit-normalize; identical text gives identical vectors
    for a deterministic provider."""
    if not query_text or not query_text.strip():
        raise ProviderError("cannot embed empty text")
    try:
        raw = provider(query_text)
    except (DimensionMismatch, NormalizationError):
        raise
    except Exception as exc:
        raise ProviderError(f"embedding provider failed: {exc}") from exc
    return normalize(raw, dim)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, snapped to exactly +/-1 within 1e-9."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    sim = float(np.dot(a, b))
    if sim > 1.0 - 1e-9:
        return 1.0
    if sim < -1.0 + 1e-9:
        return -1.0
    return sim
