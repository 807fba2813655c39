"""Brute-force references for tests: active-set enumeration QP and null spaces.

Nothing here is used by the attack itself.
"""

from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from .errors import Infeasible
from .linalg import cholesky, gram

MAX_CONSTRAINTS = 14
KKT_TOL = 1e-10


class QpResult(NamedTuple):
    d: np.ndarray
    objective: float
    active: tuple


def qp_active_set_enumerate(metric, A, b, tol=KKT_TOL):
    """Minimize ``0.5 d @ metric @ d`` subject to ``A d <= b`` by trying every active set.

    For each subset ``S`` the equality KKT system
    ``metric d + A_S.T mu = 0, A_S d = b_S`` is solved; candidates with
    ``mu >= -tol`` and ``A d <= b + tol`` are kept and the cheapest wins
    (ties go to the lexicographically smallest subset). Singular subsets are
    skipped.
    """
    P = np.asarray(metric, dtype=np.float64)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    q, n = A.shape
    if q > MAX_CONSTRAINTS:
        raise ValueError(f"enumeration limited to {MAX_CONSTRAINTS} constraints, got {q}")
    best = None
    for size in range(q + 1):
        for S in combinations(range(q), size):
            S = list(S)
            k = len(S)
            K = np.zeros((n + k, n + k))
            K[:n, :n] = P
            K[:n, n:] = A[S].T
            K[n:, :n] = A[S]
            rhs = np.concatenate([np.zeros(n), b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            d, mu = sol[:n], sol[n:]
            if np.any(mu < -tol) or np.any(A @ d > b + tol):
                continue
            obj = 0.5 * d @ P @ d
            if best is None or obj < best.objective - 1e-15:
                best = QpResult(d, float(obj), tuple(S))
    if best is None:
        raise Infeasible("no active set yields a feasible KKT point")
    return best


def min_euclidean_displacement(A, b):
    """Closest point of ``A d <= b`` to the origin in the plain Euclidean metric."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    return qp_active_set_enumerate(np.eye(A.shape[1]), A, b)


def null_space_basis(J):
    """Orthonormal basis of ``ker(J)`` as columns; ``J`` must have full row rank."""
    J = np.atleast_2d(np.asarray(J, dtype=np.float64))
    cholesky(gram(J))
    basis = null_space(J)
    return basis[:, : J.shape[1] - J.shape[0]]
