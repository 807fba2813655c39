"""Small dense linear-algebra kernel: Gram matrices and Cholesky factor/solve.

All arrays are float64 numpy arrays. No explicit inverse is ever formed;
``G^{-1} v`` is only applied through :func:`chol_solve`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import RankDeficient

RANK_TOL_REL = 1e-10


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def gram(J):
    """Return ``J @ J.T``, symmetrized so the result is exactly symmetric."""
    J = as_matrix(J, "J")
    G = J @ J.T
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]


def default_rank_tol(G):
    return RANK_TOL_REL * max(float(np.max(np.diag(G))), 0.0) if G.size else 0.0


def cholesky(G, rank_tol=None):
    """Factor a symmetric matrix as ``L @ L.T``.

    ``rank_tol`` bounds the pivots (the squared diagonal of ``L``) from
    below; it defaults to ``1e-10 * max(diag(G))``. A pivot at or under the
    bound raises :class:`RankDeficient`.
    """
    G = as_matrix(G, "G")
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError(f"G must be square, got {G.shape}")
    if rank_tol is None:
        rank_tol = default_rank_tol(G)
    L = np.zeros_like(G)
    for j in range(n):
        pivot = G[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > rank_tol:
            raise RankDeficient(
                f"pivot {pivot:.3e} at column {j} not above rank tolerance {rank_tol:.3e}"
            )
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return CholeskyFactor(L)


def chol_solve(F, v):
    """Solve ``G y = v`` given ``F = cholesky(G)``. ``v`` may be a vector or a matrix of columns."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != F.dim:
        raise ValueError(f"right-hand side has length {v.shape[0]}, expected {F.dim}")
    y = solve_triangular(F.lower, v, lower=True)
    return solve_triangular(F.lower.T, y, lower=False)
