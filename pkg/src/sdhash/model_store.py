"""Single-file binary container ("SDHM") for trained models.

Layout, all integers little-endian:

    b"SDHM"  version:u32  d:u32  m:u32  l:u32  c:u32  flags:u32
    payload (see below)
    crc32(payload):u32

flags bits 0-1 hold the model kind (0 SDH, 1 SDHR, 2 LSH); bit 2 is set
when inputs were scaled into [0, 1] before training. The payload is

    sigma:f64  anchors:f64[m*d]  P:f64[m*l]  W:f64[l*c]  [t:f64[c] if SDHR]
    [hyperplanes:f64[l*d] if LSH]  seed:u64  config_len:u32  config:utf8 JSON

with matrices row-major. LSH models have m = c = 0 and sigma = 0.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .embedding import EmbeddingModel, LshModel
from .sdh import HashModel, TrainConfig

MAGIC = b"SDHM"
VERSION = 1
KINDS = {"sdh": 0, "sdhr": 1, "lsh": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}
SCALED_FLAG = 1 << 2
_HEADER = struct.Struct("<4sIIIIII")


class ModelFormatError(ValueError):
    pass


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def model_to_bytes(model) -> bytes:
    kind = KINDS[model.kind]
    flags = kind | (SCALED_FLAG if model.scaled_inputs else 0)
    if model.kind == "lsh":
        l, d = model.hyperplanes.shape
        dims = (d, 0, l, 0)
        parts = [_f64([0.0]), _f64(model.hyperplanes)]
        seed, config = model.seed, {}
    else:
        emb = model.embedding
        dims = (emb.d, emb.m, model.n_bits, model.n_classes)
        parts = [_f64([emb.sigma]), _f64(emb.anchors), _f64(emb.P), _f64(model.W)]
        if model.kind == "sdhr":
            parts.append(_f64(model.t))
        seed, config = model.config.seed, model.config.to_dict()
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<QI", seed, len(blob)))
    parts.append(blob)
    payload = b"".join(parts)
    header = _HEADER.pack(MAGIC, VERSION, *dims, flags)
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def save_model(model, path) -> None:
    """Write atomically (temp file in the same directory, then rename)."""
    data = model_to_bytes(model)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_from_bytes(raw: bytes):
    if len(raw) < _HEADER.size:
        raise ModelFormatError("truncated header")
    magic, version, d, m, l, c, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    kind = _KIND_NAMES.get(flags & 0b11)
    if kind is None or flags & ~0b111:
        raise ModelFormatError(f"bad flags 0x{flags:x}")

    if kind == "lsh":
        if m or c:
            raise ModelFormatError("LSH model must declare m = c = 0")
        n_floats = 1 + l * d
    else:
        n_floats = 1 + m * d + m * l + l * c + (c if kind == "sdhr" else 0)
    fixed = _HEADER.size + 8 * n_floats + 12
    if len(raw) < fixed + 4:
        raise ModelFormatError("file shorter than its declared dimensions")
    seed, cfg_len = struct.unpack_from("<QI", raw, fixed - 12)
    if len(raw) != fixed + cfg_len + 4:
        raise ModelFormatError(
            f"payload length {len(raw) - _HEADER.size - 4} disagrees with declared dimensions"
        )
    payload = raw[_HEADER.size:-4]
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) != crc:
        raise ModelFormatError("checksum mismatch")

    floats = np.frombuffer(raw, dtype="<f8", count=n_floats, offset=_HEADER.size).astype(np.float64)
    config = json.loads(raw[fixed:fixed + cfg_len].decode("utf-8"))
    scaled = bool(flags & SCALED_FLAG)
    if kind == "lsh":
        return LshModel(floats[1:].reshape(l, d), seed, scaled)

    pos = 1

    def take(rows, cols):
        nonlocal pos
        block = floats[pos:pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        return block

    anchors, P, W = take(m, d), take(m, l), take(l, c)
    t = take(1, c)[0] if kind == "sdhr" else None
    cfg = TrainConfig(**config)
    if cfg.seed != seed:
        raise ModelFormatError("seed field disagrees with config echo")
    return HashModel(
        kind=kind,
        embedding=EmbeddingModel(anchors, floats[0], P),
        W=W,
        t=t,
        config=cfg,
        n_classes=c,
        scaled_inputs=scaled,
    )


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
