"""Dataset ingestion: MNIST-style IDX files, CSV feature tables, splits."""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
_UBYTE = 0x08

MNIST_FILES = (
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
)


class DataFormatError(ValueError):
    pass


def read_idx(path) -> np.ndarray:
    """Read an unsigned-byte IDX tensor with its original shape."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise DataFormatError(f"{path}: truncated IDX header")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code != _UBYTE or ndim < 1:
        raise DataFormatError(f"{path}: bad IDX magic 0x{raw[:4].hex()}")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise DataFormatError(f"{path}: truncated IDX header")
    shape = struct.unpack(f">{ndim}I", raw[4:header_len])
    expected = int(np.prod(shape, dtype=np.int64))
    body = raw[header_len:]
    if len(body) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} data bytes for shape {shape}, found {len(body)}"
        )
    return np.frombuffer(body, dtype=np.uint8).reshape(shape)


def write_idx(path, array) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise TypeError("only unsigned-byte IDX tensors are supported")
    header = struct.pack(">HBB", 0, _UBYTE, array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(array).tobytes())


def _magic(path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if len(head) < 4:
        raise DataFormatError(f"{path}: truncated IDX header")
    return struct.unpack(">I", head)[0]


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair.

    Returns ``(X, y)``: X is (n, rows*cols) float64 with pixels scaled into
    [0, 1] by dividing by 255; y is int64 class indices.
    """
    if _magic(images_path) != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{images_path}: not an IDX image file (magic 0x00000803)")
    if _magic(labels_path) != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{labels_path}: not an IDX label file (magic 0x00000801)")
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if len(images) != len(labels):
        raise DataFormatError(
            f"image/label count mismatch: {len(images)} images, {len(labels)} labels"
        )
    X = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return X, labels.astype(np.int64)


def _find(directory: Path, stem: str) -> Path:
    # distributions spell the files either "train-images-idx3-ubyte" or "train-images.idx3-ubyte"
    for name in (stem, stem.replace("-idx", ".idx")):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"{stem} not found in {directory}")


def load_mnist(directory):
    """Load all 70,000 MNIST digits (train file followed by the t10k file)."""
    directory = Path(directory)
    parts = [load_idx(_find(directory, img), _find(directory, lab)) for img, lab in MNIST_FILES]
    X = np.concatenate([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    return X, y


def default_mnist_dir() -> Path:
    return Path(os.environ.get("SDHASH_MNIST_DIR", "/root/data/mnist"))


def load_csv(features_path, labels_path, n_classes: int | None = None):
    """Load comma-separated features (one row per example) and integer labels.

    The class count is inferred as ``max(label) + 1``; an explicit
    ``n_classes`` is validated against it.
    """
    rows = []
    with open(features_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{features_path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise DataFormatError(
                    f"{features_path}:{lineno}: ragged row ({len(rows[-1])} fields, "
                    f"expected {len(rows[0])})"
                )
    if not rows:
        raise DataFormatError(f"{features_path}: no feature rows")
    X = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{features_path}: non-finite feature values")

    labels = []
    with open(labels_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataFormatError(f"{labels_path}:{lineno}: not an integer: {line!r}") from None
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(X):
        raise DataFormatError(f"count mismatch: {len(X)} feature rows, {len(y)} labels")
    if np.any(y < 0):
        raise DataFormatError(f"{labels_path}: negative class index")
    inferred = int(y.max()) + 1
    if n_classes is not None and n_classes < inferred:
        raise DataFormatError(f"labels reach class {inferred - 1} but n_classes={n_classes}")
    return X, y


def num_classes(y) -> int:
    return int(np.max(y)) + 1


def one_hot(y, n_classes: int | None = None) -> np.ndarray:
    """Zero-one label matrix: Y[i, k] = 1 iff y[i] == k."""
    y = np.asarray(y)
    c = num_classes(y) if n_classes is None else n_classes
    Y = np.zeros((len(y), c))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def split_indices(n: int, test_count: int, seed: int):
    """Uniform random test sample of size ``test_count``; train is the complement.

    Both index arrays are returned sorted.
    """
    if not 0 < test_count < n:
        raise ValueError(f"test_count must be in (0, {n}), got {test_count}")
    rng = np.random.default_rng(seed)
    test = np.sort(rng.choice(n, size=test_count, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def split(X, y, test_count: int, seed: int):
    """Return ``((X_train, y_train), (X_test, y_test))``."""
    train, test = split_indices(len(X), test_count, seed)
    return (X[train], y[train]), (X[test], y[test])
