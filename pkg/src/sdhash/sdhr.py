"""SDH with relaxation: the regression targets are learned under a large margin.

Minimises ||R - BW - e t^T||^2 + lam ||W||^2 + v ||B - phi(X) P||^2 subject
to B in {-1,1}^(n,l) and, for every row i with label L_i,
R[i, L_i] - max_{k != L_i} R[i, k] >= 1.
"""

from __future__ import annotations

import logging

import numpy as np

from . import discrete_opt
from .codes import CodeMatrix
from .data_io import num_classes, one_hot
from .sdh import (
    HashModel,
    TrainConfig,
    check_inputs,
    prepare_embedding,
    random_codes,
    relative_change,
)

log = logging.getLogger(__name__)

MARGIN_TOL = 1e-9


def t_step(R, B, W) -> np.ndarray:
    """Offset minimising ||R - BW - e t^T||^2: the column means of R - BW."""
    R = np.asarray(R, dtype=np.float64)
    if len(R) == 0:
        raise ValueError("t_step needs at least one row")
    return (R - np.asarray(B, dtype=np.float64) @ W).mean(axis=0)


def margins(R, labels) -> np.ndarray:
    """R[i, L_i] - max_{k != L_i} R[i, k] for every row."""
    R = np.asarray(R, dtype=np.float64)
    idx = np.arange(len(R))
    own = R[idx, labels]
    others = R.copy()
    others[idx, labels] = -np.inf
    return own - others.max(axis=1)


def r_step_project(a, j: int) -> np.ndarray:
    """Euclidean projection of ``a`` onto {r : r_j - max_{k != j} r_k >= 1}.

    With multipliers lam_k >= 0 on the constraints r_k <= r_j - 1, the KKT
    conditions give r_k = r_j - 1 for active k and r_k = a_k otherwise, with

        r_j = mu(S) = (a_j + sum_{k in S} (a_k + 1)) / (1 + |S|).

    If a_k is active so is every larger wrong-class score, so the active set
    is a prefix of the wrong-class scores sorted descending. The first prefix
    size s whose members satisfy a_k >= mu - 1 (lam_k >= 0) and whose
    successor satisfies a_k <= mu - 1 (primal feasibility) is the solution.
    """
    a = np.asarray(a, dtype=np.float64)
    c = len(a)
    if c < 2:
        raise ValueError("need at least two classes")
    if not 0 <= j < c:
        raise ValueError(f"class index {j} out of range for {c} classes")
    return project_margin_rows(a[None, :], np.array([j]))[0]


def project_margin_rows(A, labels) -> np.ndarray:
    """Row-wise :func:`r_step_project` for a matrix ``A`` and label vector."""
    A = np.asarray(A, dtype=np.float64)
    labels = np.asarray(labels)
    n, c = A.shape
    rows = np.arange(n)
    own = A[rows, labels]

    others = A.copy()
    others[rows, labels] = -np.inf
    order = np.argsort(-others, axis=1, kind="stable")[:, : c - 1]
    top = np.take_along_axis(others, order, axis=1)  # (n, c-1), descending

    s = np.arange(1, c)
    mu = (own[:, None] + np.cumsum(top + 1.0, axis=1)) / (1.0 + s)
    nxt = np.concatenate([top[:, 1:], np.full((n, 1), -np.inf)], axis=1)
    # prefix members are sorted, so only the smallest one needs checking
    ok = (top >= mu - 1.0) & (nxt <= mu - 1.0)
    # guard against round-off leaving no admissible prefix: fall back to the full set
    ok[:, -1] |= ~ok.any(axis=1)
    size = np.argmax(ok, axis=1)  # index of first admissible prefix (size - 1)
    mu_sel = mu[rows, size]

    out = A.copy()
    active = s[None, :] <= (size + 1)[:, None]
    active_cols = order[active]
    active_rows = np.repeat(rows, size + 1)
    out[active_rows, active_cols] = mu_sel[active_rows] - 1.0
    out[rows, labels] = mu_sel

    feasible = top[:, 0] <= own - 1.0
    out[feasible] = A[feasible]
    return out


def sdhr_objective(R, B, W, t, phi, P, lam, v) -> float:
    B = np.asarray(B, dtype=np.float64)
    fit = R - B @ W - t
    code = B - phi @ P
    return float(np.sum(fit * fit) + lam * np.sum(W * W) + v * np.sum(code * code))


def train_sdhr(X, y, config: TrainConfig = TrainConfig(), n_classes: int | None = None,
               callback=None) -> HashModel:
    """Train SDHR.

    Initialisation: random codes, R = zero-one labels, then W (centered
    ridge), t (column means) and P (kernel least squares). Each iteration
    then runs the B-, R-, G-, t- and F-steps in that order.

    ``callback(iteration, state)`` gets the post-iteration B, R, W, t, P and
    objective; iteration 0 is the initial state.
    """
    X, y = check_inputs(X, y, config)
    c = num_classes(y) if n_classes is None else n_classes
    if c < 2:
        raise ValueError("SDHR needs at least two classes for its margin constraint")
    emb, phi, rng = prepare_embedding(X, config)
    fsolver = discrete_opt.FStepSolver(phi)
    lam, v = config.lam, config.v

    B = random_codes(rng, len(X), config.n_bits)
    R = one_hot(y, c)
    W = discrete_opt.centered_ridge_solve(B, R, lam)
    t = t_step(R, B, W)
    P = fsolver.solve(B)

    def report(it):
        obj = sdhr_objective(R, B, W, t, phi, P, lam, v)
        history.append(obj)
        log.info("sdhr iter %d objective %.10g", it, obj)
        if callback is not None:
            callback(it, {"B": B, "R": R, "W": W, "t": t, "P": P, "objective": obj})

    history = []
    report(0)
    for it in range(1, config.max_iters + 1):
        Q = ((R - t) @ W.T + v * (phi @ P)).T
        B = discrete_opt.b_step(W, Q, B, config.max_sweeps)
        R = project_margin_rows(B @ W + t, y)
        W = discrete_opt.centered_ridge_solve(B, R, lam)
        t = t_step(R, B, W)
        P = fsolver.solve(B)
        report(it)
        if relative_change(history[-2], history[-1]) < config.tol:
            break

    return HashModel(
        kind="sdhr",
        embedding=emb.with_projection(P),
        W=W,
        t=t,
        config=config,
        n_classes=c,
        train_codes=CodeMatrix.from_dense(B),
        history=tuple(history),
    )
