"""Exhaustive Hamming-space search over bit-packed codes.

Results are always ordered by (distance, database index), so rankings are
reproducible regardless of platform or sort implementation.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .codes import CodeMatrix, n_bytes

BINC_MAGIC = b"BINC"
BINC_VERSION = 1


def _as_row(code) -> np.ndarray:
    if isinstance(code, CodeMatrix):
        if len(code) != 1:
            raise ValueError("expected a single code row")
        return code.packed[0]
    return np.asarray(code, dtype=np.uint8).ravel()


def hamming_distance(a, b) -> int:
    """Number of differing bits between two packed code rows (XOR + popcount)."""
    a, b = _as_row(a), _as_row(b)
    if a.shape != b.shape:
        raise ValueError(f"code length mismatch: {a.size} vs {b.size} bytes")
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def _words(packed: np.ndarray) -> np.ndarray:
    """View packed rows as uint64 words (zero-padded), for fast XOR/popcount."""
    n, nb = packed.shape
    width = -(-nb // 8) * 8
    if width != nb:
        padded = np.zeros((n, width), dtype=np.uint8)
        padded[:, :nb] = packed
        packed = padded
    return np.ascontiguousarray(packed).view(np.uint64)


class CodeDatabase:
    """Immutable collection of packed codes with optional labels and external ids."""

    def __init__(self, codes: CodeMatrix, labels=None, ids=None):
        self.codes = codes
        n = len(codes)
        self.labels = None if labels is None else np.asarray(labels)
        if self.labels is not None and len(self.labels) != n:
            raise ValueError(f"{n} codes but {len(self.labels)} labels")
        self.ids = np.arange(n) if ids is None else np.asarray(ids)
        if len(self.ids) != n:
            raise ValueError(f"{n} codes but {len(self.ids)} ids")
        self._words = _words(codes.packed)

    def __len__(self):
        return len(self.codes)

    @property
    def n_bits(self) -> int:
        return self.codes.n_bits

    def distances(self, query) -> np.ndarray:
        """Hamming distance from ``query`` to every database code, in index order."""
        q = _as_row(query)
        if q.size != n_bytes(self.n_bits):
            raise ValueError(
                f"query has {q.size} bytes, database codes have {n_bytes(self.n_bits)}"
            )
        qw = _words(q[None, :])
        return np.bitwise_count(self._words ^ qw).sum(axis=1, dtype=np.int64)

    def ranking(self, query) -> tuple[np.ndarray, np.ndarray]:
        """Database indices sorted by (distance, index), and their distances."""
        dist = self.distances(query)
        order = np.argsort(dist, kind="stable")
        return order, dist[order]

    def lookup_radius(self, query, r: int) -> list[tuple]:
        """All entries within Hamming distance ``r``, as (id, distance) pairs."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        dist = self.distances(query)
        hits = np.flatnonzero(dist <= r)
        hits = hits[np.argsort(dist[hits], kind="stable")]
        return [(self.ids[i].item(), int(dist[i])) for i in hits]

    def rank_topn(self, query, n: int) -> list[tuple]:
        """The ``n`` nearest entries (the whole ranking if n exceeds the database)."""
        if n < 1:
            raise ValueError("n must be at least 1")
        order, dist = self.ranking(query)
        return [(self.ids[i].item(), int(d)) for i, d in zip(order[:n], dist[:n])]


def lookup_radius(db: CodeDatabase, query, r: int):
    return db.lookup_radius(query, r)


def rank_topn(db: CodeDatabase, query, n: int):
    return db.rank_topn(query, n)


def binc_bytes(codes: CodeMatrix) -> bytes:
    """BINC layout: b"BINC", then version, n and l as little-endian uint32, then packed rows."""
    header = BINC_MAGIC + struct.pack("<III", BINC_VERSION, len(codes), codes.n_bits)
    return header + codes.packed.tobytes()


def write_binc(path, codes: CodeMatrix) -> None:
    Path(path).write_bytes(binc_bytes(codes))


def read_binc(path) -> CodeMatrix:
    raw = Path(path).read_bytes()
    if raw[:4] != BINC_MAGIC:
        raise ValueError(f"{path}: not a BINC code file")
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated BINC header")
    version, n, l = struct.unpack("<III", raw[4:16])
    if version != BINC_VERSION:
        raise ValueError(f"{path}: unsupported BINC version {version}")
    body = raw[16:]
    if len(body) != n * n_bytes(l):
        raise ValueError(f"{path}: expected {n * n_bytes(l)} code bytes, found {len(body)}")
    return CodeMatrix(np.frombuffer(body, dtype=np.uint8).reshape(n, n_bytes(l)), l)
