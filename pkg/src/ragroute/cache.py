"""Path-level meta-cache: routing decisions keyed by query embeddings.

The cache stores (embedding, path scores, chosen path) per query and serves
the stored decision for semantically similar queries. It never stores answer
text, so reuse happens at the routing-decision level only.

Lookup is an exact nearest-neighbor linear scan; eviction is
least-recently-hit with ties broken by oldest insertion.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional

import numpy as np

from .embeddings import cosine
from .errors import DimensionMismatch, SnapshotError
from .paths import DEFAULT_PRIORITY, Path, PathScores

DEFAULT_CAPACITY = 10_000
DEFAULT_TAU = 0.90

# Fixed path order used by the binary snapshot format.
_SNAPSHOT_PATH_ORDER = (Path.DB, Path.Doc, Path.Hybrid, Path.LLM)
_SNAPSHOT_MAGIC = b"RRMC"


@dataclass
class CacheEntry:
    embedding: np.ndarray
    scores: PathScores
    chosen_path: Path
    insert_seq: int
    last_hit_seq: int = 0
    # Priority order active at insertion, kept for audit.
    priority_order: tuple[Path, ...] = DEFAULT_PRIORITY


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    insertions: int = 0
    evictions: int = 0
    size: int = 0

    def as_dict(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "insertions": self.insertions,
            "evictions": self.evictions,
            "size": self.size,
        }


class MetaCache:
    """Exact linear-scan similarity cache over unit-norm embeddings."""

    def __init__(self, dim: int, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.dim = dim
        self.capacity = capacity
        self.stats = CacheStats()
        self._entries: list[CacheEntry] = []
        self._matrix: Optional[np.ndarray] = None
        self._seq = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def _check_dim(self, z: np.ndarray):
        if z.shape != (self.dim,):
            raise DimensionMismatch(
                f"embedding shape {z.shape}, cache dimension {self.dim}"
            )

    def _sims(self, z: np.ndarray) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack([e.embedding for e in self._entries])
        sims = self._matrix @ z
        np.clip(sims, -1.0, 1.0, out=sims)
        sims[sims > 1.0 - 1e-9] = 1.0
        return sims

    def lookup(self, z: np.ndarray, tau: float = DEFAULT_TAU):
        """Best-similarity entry if its cosine to ``z`` is at least tau.

        Returns ``(entry, similarity)`` on a hit, ``None`` on a miss.
        """
        z = np.asarray(z, dtype=np.float64)
        self._check_dim(z)
        with self._lock:
            if not self._entries:
                self.stats.misses += 1
                return None
            sims = self._sims(z)
            best = int(np.argmax(sims))
            sim = float(sims[best])
            if sim >= tau:
                entry = self._entries[best]
                self._seq += 1
                entry.last_hit_seq = self._seq
                self.stats.hits += 1
                return entry, sim
            self.stats.misses += 1
            return None

    def insert(
        self,
        z: np.ndarray,
        scores: PathScores,
        chosen: Path,
        priority_order: tuple[Path, ...] = DEFAULT_PRIORITY,
    ) -> None:
        """Store a decision; identical embeddings upsert in place, and the
        least-recently-hit entry is evicted when capacity would be exceeded."""
        z = np.asarray(z, dtype=np.float64)
        self._check_dim(z)
        with self._lock:
            for entry in self._entries:
                if cosine(entry.embedding, z) == 1.0:
                    entry.scores = scores
                    entry.chosen_path = chosen
                    entry.priority_order = priority_order
                    self.stats.insertions += 1
                    return
            if len(self._entries) >= self.capacity:
                victim = min(
                    range(len(self._entries)),
                    key=lambda i: (
                        self._entries[i].last_hit_seq,
                        self._entries[i].insert_seq,
                    ),
                )
                del self._entries[victim]
                self.stats.evictions += 1
            self._seq += 1
            self._entries.append(
                CacheEntry(
                    embedding=z,
                    scores=scores,
                    chosen_path=chosen,
                    insert_seq=self._seq,
                    priority_order=priority_order,
                )
            )
            self._matrix = None
            self.stats.insertions += 1
            self.stats.size = len(self._entries)

    def invalidate_all(self) -> None:
        """Drop all entries; counters are retained."""
        with self._lock:
            self._entries.clear()
            self._matrix = None
            self.stats.size = 0

    def entries(self) -> tuple[CacheEntry, ...]:
        return tuple(self._entries)

    # --- persistence ---

    def save_snapshot(self, path: FsPath | str) -> None:
        buf = [
            _SNAPSHOT_MAGIC,
            struct.pack("<II", self.dim, len(self._entries)),
        ]
        for e in self._entries:
            buf.append(e.embedding.astype("<f4").tobytes())
            buf.append(
                struct.pack(
                    "<4i", *(e.scores[p] for p in _SNAPSHOT_PATH_ORDER)
                )
            )
            buf.append(
                struct.pack(
                    "<BQQ",
                    _SNAPSHOT_PATH_ORDER.index(e.chosen_path),
                    e.insert_seq,
                    e.last_hit_seq,
                )
            )
        FsPath(path).write_bytes(b"".join(buf))

    def load_snapshot(self, path: FsPath | str) -> None:
        """Replace contents from a snapshot file; rejects dimension mismatch.

        Stored vectors are float32 in the file; they are re-normalized on load
        so the unit-norm invariant holds in float64.
        """
        data = FsPath(path).read_bytes()
        if data[:4] != _SNAPSHOT_MAGIC:
            raise SnapshotError("not a meta-cache snapshot")
        dim, count = struct.unpack_from("<II", data, 4)
        if dim != self.dim:
            raise DimensionMismatch(
                f"snapshot dimension {dim} != cache dimension {self.dim}"
            )
        offset = 12
        entry_size = 4 * dim + 16 + 17
        if len(data) != offset + count * entry_size:
            raise SnapshotError("truncated snapshot")
        entries: list[CacheEntry] = []
        max_seq = 0
        for _ in range(count):
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
            raw_scores = struct.unpack_from("<4i", data, offset)
            offset += 16
            tag, insert_seq, last_hit_seq = struct.unpack_from("<BQQ", data, offset)
            offset += 17
            vec64 = vec.astype(np.float64)
            vec64 /= np.linalg.norm(vec64)
            entries.append(
                CacheEntry(
                    embedding=vec64,
                    scores=PathScores(
                        scores=dict(zip(_SNAPSHOT_PATH_ORDER, raw_scores))
                    ),
                    chosen_path=_SNAPSHOT_PATH_ORDER[tag],
                    insert_seq=insert_seq,
                    last_hit_seq=last_hit_seq,
                )
            )
            max_seq = max(max_seq, insert_seq, last_hit_seq)
        with self._lock:
            self._entries = entries
            self._matrix = None
            self._seq = max_seq
            self.stats.size = len(entries)
