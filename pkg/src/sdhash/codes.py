"""Binary code matrices: dense {-1,+1} <-> bit-packed rows.

Bit k of a row lives in byte k // 8 at bit position k % 8 (little-endian
within bytes). Bit value 1 means +1, bit value 0 means -1. Unused high bits
of the last byte are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sign_pm1(values):
    """Elementwise sign into {-1, +1} as int8, with sign(0) = +1."""
    return np.where(np.asarray(values) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class CodeMatrix:
    """n codes of ``n_bits`` bits each, stored packed (n x ceil(n_bits/8) uint8)."""

    packed: np.ndarray
    n_bits: int

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.ndim != 2:
            raise ValueError("packed codes must be a 2-D byte array")
        if self.n_bits < 1:
            raise ValueError("code length must be at least 1 bit")
        if packed.shape[1] != n_bytes(self.n_bits):
            raise ValueError(
                f"{self.n_bits}-bit codes need {n_bytes(self.n_bits)} bytes per row, "
                f"got {packed.shape[1]}"
            )
        spare = 8 * packed.shape[1] - self.n_bits
        if spare and len(packed) and np.any(packed[:, -1] >> (8 - spare)):
            raise ValueError("unused high bits of the last byte must be zero")
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_dense(cls, codes) -> CodeMatrix:
        codes = np.atleast_2d(np.asarray(codes))
        return cls(pack_codes(codes), codes.shape[1])

    def to_dense(self) -> np.ndarray:
        return unpack_codes(self.packed, self.n_bits)

    def __len__(self):
        return len(self.packed)

    def __getitem__(self, idx) -> CodeMatrix:
        rows = self.packed[idx]
        return CodeMatrix(np.atleast_2d(rows), self.n_bits)

    def __eq__(self, other):
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return self.n_bits == other.n_bits and np.array_equal(self.packed, other.packed)

    __hash__ = None


def n_bytes(n_bits: int) -> int:
    return (n_bits + 7) // 8


def pack_codes(codes) -> np.ndarray:
    """Pack an (n, l) array with entries in {-1, +1} into (n, ceil(l/8)) bytes."""
    codes = np.atleast_2d(np.asarray(codes))
    if codes.size and not np.all((codes == 1) | (codes == -1)):
        raise ValueError("codes must contain only -1 and +1")
    return np.packbits(codes > 0, axis=1, bitorder="little")


def unpack_codes(packed, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_codes`; returns int8 entries in {-1, +1}."""
    bits = np.unpackbits(np.atleast_2d(packed), axis=1, count=n_bits, bitorder="little")
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)
