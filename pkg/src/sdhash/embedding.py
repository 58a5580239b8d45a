"""Anchor-based RBF feature map, the learned embedding phi(x) P, and encoders."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .codes import CodeMatrix, sign_pm1

SIGMA_SAMPLE = 2000


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    """Gaussian kernel against ``m`` anchors followed by a linear map to ``l`` bits.

    ``P`` is None until the model has been trained.
    """

    anchors: np.ndarray
    sigma: float
    P: np.ndarray | None = None

    def __post_init__(self):
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=np.float64))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not np.all(np.isfinite(anchors)):
            raise ValueError("anchors must be finite")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.P is not None:
            P = np.asarray(self.P, dtype=np.float64)
            if P.ndim != 2 or P.shape[0] != len(anchors):
                raise ValueError(f"P must be ({len(anchors)}, l), got {P.shape}")
            if not np.all(np.isfinite(P)):
                raise ValueError("P must be finite")
            object.__setattr__(self, "P", P)

    @property
    def m(self) -> int:
        return len(self.anchors)

    @property
    def d(self) -> int:
        return self.anchors.shape[1]

    @property
    def n_bits(self) -> int:
        if self.P is None:
            raise ValueError("embedding has no projection yet")
        return self.P.shape[1]

    def with_projection(self, P) -> EmbeddingModel:
        return replace(self, P=P)


def squared_distances(X, A) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of X and rows of A.

    Uses the Gram expansion, then recomputes near-zero entries directly so
    that coincident points come out as exactly 0.
    """
    X = np.atleast_2d(X)
    A = np.atleast_2d(A)
    xx = np.einsum("ij,ij->i", X, X)
    aa = np.einsum("ij,ij->i", A, A)
    D = xx[:, None] + aa[None, :] - 2.0 * (X @ A.T)
    np.maximum(D, 0.0, out=D)
    # cancellation error is O(eps * (|x|^2 + |a|^2))
    suspect = np.nonzero(D <= 1e-8 * (xx[:, None] + aa[None, :]))
    if len(suspect[0]):
        diff = X[suspect[0]] - A[suspect[1]]
        D[suspect] = np.einsum("ij,ij->i", diff, diff)
    return D


def fit_anchors(X, m: int, seed: int, rng=None):
    """Sample ``m`` distinct training rows as anchors and set the kernel width.

    sigma is the mean Euclidean distance between a random subsample of up
    to 2,000 training rows and the anchors.

    Returns ``(anchors, sigma)``.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if not 1 <= m <= n:
        raise ValueError(f"anchor count must be in [1, {n}], got {m}")
    rng = np.random.default_rng(seed) if rng is None else rng
    anchors = X[rng.choice(n, size=m, replace=False)]
    if n > SIGMA_SAMPLE:
        sample = X[rng.choice(n, size=SIGMA_SAMPLE, replace=False)]
    else:
        sample = X
    sigma = float(np.mean(np.sqrt(squared_distances(sample, anchors))))
    if not sigma > 0:
        raise ValueError("all sampled points coincide with the anchors; cannot set sigma")
    return anchors, sigma


def rbf_map(X, model: EmbeddingModel, batch_size: int = 8192) -> np.ndarray:
    """phi(x)_j = exp(-||x - a_j||^2 / (2 sigma^2)); shape (n, m), or (m,) for a single x."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != model.d:
        raise ValueError(f"expected {model.d} features, got {X2.shape[1]}")
    scale = -1.0 / (2.0 * model.sigma**2)
    phi = np.empty((len(X2), model.m))
    for start in range(0, len(X2), batch_size):
        block = squared_distances(X2[start:start + batch_size], model.anchors)
        np.exp(block * scale, out=phi[start:start + batch_size])
    return phi[0] if single else phi


def embed(X, model: EmbeddingModel) -> np.ndarray:
    if model.P is None:
        raise ValueError("embedding model is untrained (no projection P)")
    return rbf_map(X, model) @ model.P


def encode_dense(X, model: EmbeddingModel, batch_size: int = 8192) -> np.ndarray:
    """Sign of the embedding as an int8 {-1,+1} array (sign(0) = +1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return sign_pm1(embed(X, model))
    out = np.empty((len(X), model.n_bits), dtype=np.int8)
    for start in range(0, len(X), batch_size):
        out[start:start + batch_size] = sign_pm1(embed(X[start:start + batch_size], model))
    return out


def encode(X, model: EmbeddingModel) -> CodeMatrix:
    """Binary codes for one vector or a batch of rows, packed."""
    return CodeMatrix.from_dense(np.atleast_2d(encode_dense(X, model)))


def lsh_hyperplanes(n_bits: int, d: int, seed: int) -> np.ndarray:
    """Standard-normal random hyperplanes, shape (n_bits, d)."""
    return np.random.default_rng(seed).standard_normal((n_bits, d))


def lsh_encode(X, hyperplanes) -> CodeMatrix:
    """Random-hyperplane LSH: bit k = sign(<h_k, x>), sign(0) = +1."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    hyperplanes = np.atleast_2d(hyperplanes)
    if X.shape[1] != hyperplanes.shape[1]:
        raise ValueError(f"hyperplanes have dimension {hyperplanes.shape[1]}, x has {X.shape[1]}")
    return CodeMatrix.from_dense(sign_pm1(X @ hyperplanes.T))


@dataclass(frozen=True, eq=False)
class LshModel:
    """Data-independent baseline: random hyperplanes drawn from ``seed``."""

    hyperplanes: np.ndarray
    seed: int
    scaled_inputs: bool = False
    kind: str = "lsh"

    @classmethod
    def create(cls, n_bits: int, d: int, seed: int, scaled_inputs: bool = False) -> LshModel:
        return cls(lsh_hyperplanes(n_bits, d, seed), seed, scaled_inputs)

    @property
    def n_bits(self) -> int:
        return self.hyperplanes.shape[0]

    def encode(self, X) -> CodeMatrix:
        return lsh_encode(X, self.hyperplanes)
