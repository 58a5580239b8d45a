"""Supervised Discrete Hashing: regress binary codes onto zero-one labels.

Minimises ||Y - BW||^2 + lam ||W||^2 + v ||B - phi(X) P||^2 over
B in {-1,1}^(n,l), W and P by alternating closed-form G- and F-steps with a
discrete coordinate-descent B-step.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import discrete_opt
from .codes import CodeMatrix
from .data_io import num_classes, one_hot
from .embedding import EmbeddingModel, encode_dense, fit_anchors, rbf_map

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    n_bits: int = 64
    lam: float = 1.0
    v: float = 1e-5
    max_iters: int = 5
    n_anchors: int = 1000
    seed: int = 0
    tol: float = 1e-5
    max_sweeps: int = discrete_opt.DEFAULT_SWEEPS
    sigma: float | None = None

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.v > 0:
            raise ValueError("v must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.n_anchors < 1:
            raise ValueError("n_anchors must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma override must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class HashModel:
    """A trained SDH or SDHR model.

    ``t`` is the class-score offset (SDHR only; None for SDH).
    ``history`` holds the training objective after initialisation (SDHR)
    and after every outer iteration.
    """

    kind: str
    embedding: EmbeddingModel
    W: np.ndarray
    t: np.ndarray | None
    config: TrainConfig
    n_classes: int
    scaled_inputs: bool = False
    train_codes: CodeMatrix | None = field(default=None, compare=False)
    history: tuple = field(default=(), compare=False)

    @property
    def n_bits(self) -> int:
        return self.W.shape[0]

    def encode(self, X) -> CodeMatrix:
        return CodeMatrix.from_dense(np.atleast_2d(encode_dense(X, self.embedding)))

    def scores(self, codes) -> np.ndarray:
        return class_scores(codes, self.W, self.t)

    def predict(self, codes) -> np.ndarray:
        return np.argmax(self.scores(codes), axis=1)


def class_scores(codes, W, t=None) -> np.ndarray:
    if isinstance(codes, CodeMatrix):
        codes = codes.to_dense()
    S = np.atleast_2d(np.asarray(codes, dtype=np.float64)) @ W
    return S if t is None else S + t


def classify(code, W, t=None):
    """argmax_k (b W + t)_k with ties to the lowest class index.

    Accepts one code row (returns an int) or a batch (returns an array).
    """
    scores = class_scores(code, W, t)
    pred = np.argmax(scores, axis=1)
    single = not isinstance(code, CodeMatrix) and np.ndim(code) == 1
    return int(pred[0]) if single else pred


def relative_change(prev: float, cur: float) -> float:
    return abs(prev - cur) / max(abs(prev), np.finfo(float).tiny)


def prepare_embedding(X, config: TrainConfig):
    """Anchors, kernel width, phi(X) and an RNG positioned for code initialisation."""
    rng = np.random.default_rng(config.seed)
    anchors, sigma = fit_anchors(X, config.n_anchors, config.seed, rng=rng)
    if config.sigma is not None:
        sigma = config.sigma
    emb = EmbeddingModel(anchors, sigma)
    return emb, rbf_map(X, emb), rng


def random_codes(rng, n: int, n_bits: int) -> np.ndarray:
    return np.where(rng.random((n, n_bits)) < 0.5, -1, 1).astype(np.int8)


def check_inputs(X, y, config: TrainConfig):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) < 1 or X.shape[1] < 1:
        raise ValueError("training features must be a non-empty 2-D array")
    if len(y) != len(X):
        raise ValueError(f"{len(X)} examples but {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")
    if np.any(y < 0):
        raise ValueError("labels must be non-negative class indices")
    if config.n_anchors > len(X):
        raise ValueError(f"n_anchors={config.n_anchors} exceeds training size {len(X)}")
    if len(np.unique(y)) < 2:
        warnings.warn("training labels contain a single class", stacklevel=3)
    return X, y


def sdh_objective(Y, B, W, phi, P, lam, v) -> float:
    B = np.asarray(B, dtype=np.float64)
    fit = Y - B @ W
    code = B - phi @ P
    return float(np.sum(fit * fit) + lam * np.sum(W * W) + v * np.sum(code * code))


def train_sdh(X, y, config: TrainConfig = TrainConfig(), n_classes: int | None = None,
              callback=None) -> HashModel:
    """Train SDH. Each iteration runs the G-step, F-step, then B-step.

    ``callback(iteration, state)`` is invoked after every iteration with a
    dict holding the current B, W, P and objective.
    """
    X, y = check_inputs(X, y, config)
    c = num_classes(y) if n_classes is None else n_classes
    Y = one_hot(y, c)
    emb, phi, rng = prepare_embedding(X, config)
    fsolver = discrete_opt.FStepSolver(phi)
    B = random_codes(rng, len(X), config.n_bits)

    history = []
    for it in range(config.max_iters):
        W = discrete_opt.ridge_solve(B, Y, config.lam)
        P = fsolver.solve(B)
        F = phi @ P
        Q = (Y @ W.T + config.v * F).T
        B = discrete_opt.b_step(W, Q, B, config.max_sweeps)
        obj = sdh_objective(Y, B, W, phi, P, config.lam, config.v)
        history.append(obj)
        log.info("sdh iter %d objective %.10g", it + 1, obj)
        if callback is not None:
            callback(it + 1, {"B": B, "W": W, "P": P, "objective": obj})
        if len(history) > 1 and relative_change(history[-2], obj) < config.tol:
            break

    return HashModel(
        kind="sdh",
        embedding=emb.with_projection(P),
        W=W,
        t=None,
        config=config,
        n_classes=c,
        train_codes=CodeMatrix.from_dense(B),
        history=tuple(history),
    )
