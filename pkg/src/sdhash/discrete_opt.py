"""Block solvers shared by the SDH and SDHR trainers.

Code matrices here are dense (n, l) arrays with entries in {-1, +1}; the
packed :class:`~sdhash.codes.CodeMatrix` form is only used for storage and
search.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

DEFAULT_SWEEPS = 10


def bstep_objective(B, W, Q) -> float:
    """||B W||_F^2 - 2 tr(B Q) for B (n, l), W (l, c), Q (l, n)."""
    B = np.asarray(B, dtype=np.float64)
    BW = B @ W
    return float(np.sum(BW * BW) - 2.0 * np.sum(B * Q.T))


def b_step(W, Q, B_init, max_sweeps: int = DEFAULT_SWEEPS, trace=None) -> np.ndarray:
    """Discrete cyclic coordinate descent on min_B ||BW||^2 - 2 tr(BQ), B in {-1,1}^(n,l).

    Writing b for column k of B, v for row k of W and B'W' for the product
    with bit k removed, the objective as a function of b alone is

        ||b v + B'W'||^2 - 2 b.q  =  const + 2 b.(B'W' v^T - q)

    since b.b = n is fixed. Its exact minimiser over {-1,1}^n is
    b = sign(q - B'W' v^T), with q the k-th column of Q^T. Columns are
    swept in order until a full sweep changes nothing or ``max_sweeps``
    is reached. Every column update is an exact block minimisation, so the
    objective never increases.

    ``trace``, if given, is a list that receives the objective after every
    column update.
    """
    W = np.asarray(W, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    B = np.array(B_init, dtype=np.float64)
    n, l = B.shape
    if W.shape[0] != l or Q.shape != (l, n):
        raise ValueError(f"shape mismatch: B {B.shape}, W {W.shape}, Q {Q.shape}")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    if not np.all(np.abs(B) == 1):
        raise ValueError("B_init entries must be -1 or +1")
    Qt = np.ascontiguousarray(Q.T)
    vv = np.einsum("kc,kc->k", W, W)

    for _ in range(max_sweeps):
        BW = B @ W  # refreshed each sweep to stop drift from incremental updates
        changed = False
        for k in range(l):
            v = W[k]
            b = B[:, k]
            rest = BW @ v - b * vv[k]
            z = np.where(Qt[:, k] - rest >= 0, 1.0, -1.0)
            delta = z - b
            if np.any(delta):
                changed = True
                BW += np.outer(delta, v)
                B[:, k] = z
            if trace is not None:
                trace.append(bstep_objective(B, W, Q))
        if not changed:
            break
    return B.astype(np.int8)


def _spd_solve(A, rhs):
    return cho_solve(cho_factor(A, lower=True, check_finite=False), rhs, check_finite=False)


def ridge_solve(B, Y, lam: float) -> np.ndarray:
    """W = (B^T B + lam I)^-1 B^T Y, the minimiser of ||Y - BW||^2 + lam ||W||^2."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    B = np.asarray(B, dtype=np.float64)
    G = B.T @ B
    G[np.diag_indices_from(G)] += lam
    return _spd_solve(G, B.T @ np.asarray(Y, dtype=np.float64))


def center_rows(M) -> np.ndarray:
    """Apply H = I - e e^T / n, i.e. subtract the column means."""
    M = np.asarray(M, dtype=np.float64)
    return M - M.mean(axis=0, keepdims=True)


def centered_ridge_solve(B, R, lam: float) -> np.ndarray:
    """W = (B^T H B + lam I)^-1 B^T H R with H the row-centering matrix.

    Minimises ||H (R - BW)||^2 + lam ||W||^2, which is the SDHR objective
    with the offset vector eliminated at its optimum.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    B = np.asarray(B, dtype=np.float64)
    Bc = center_rows(B)
    # B^T H B = Bc^T Bc and B^T H R = Bc^T R since H is a symmetric idempotent
    G = Bc.T @ Bc
    G[np.diag_indices_from(G)] += lam
    return _spd_solve(G, Bc.T @ np.asarray(R, dtype=np.float64))


def default_ridge_eps(gram) -> float:
    return 1e-6 * float(np.trace(gram)) / gram.shape[0]


class FStepSolver:
    """Factorises phi^T phi + eps I once; solves for P for any code matrix."""

    def __init__(self, phi, eps: float | None = None):
        self.phi = np.asarray(phi, dtype=np.float64)
        gram = self.phi.T @ self.phi
        self.eps = default_ridge_eps(gram) if eps is None else float(eps)
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        gram[np.diag_indices_from(gram)] += self.eps
        self._factor = cho_factor(gram, lower=True, check_finite=False)

    def solve(self, B) -> np.ndarray:
        rhs = self.phi.T @ np.asarray(B, dtype=np.float64)
        return cho_solve(self._factor, rhs, check_finite=False)


def f_step_solve(phi, B, eps: float | None = None) -> np.ndarray:
    """P = (phi^T phi + eps I)^-1 phi^T B.

    ``eps`` defaults to 1e-6 * trace(phi^T phi) / m, enough to make a
    rank-deficient Gram matrix factorisable without visibly biasing P.
    """
    return FStepSolver(phi, eps).solve(B)
