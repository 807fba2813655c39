"""Sequential coordinate-wise solver for the non-negative quadratic program

    minimize   0.5 * lam @ H @ lam + b @ lam
    subject to lam >= 0

with ``H`` symmetric positive semi-definite. Each coordinate is minimized in
closed form in turn, keeping the gradient ``H @ lam + b`` up to date with a
rank-one correction after every move.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDiagonal

ZERO_CURVATURE = 1e-14
REFRESH_EVERY = 64
MIN_SWEEPS = 10_000


@dataclass(frozen=True)
class NnlsSolution:
    lam: np.ndarray
    kkt_residual: float
    sweeps: int
    converged: bool
    objective: float


def objective(H, b, lam):
    return 0.5 * lam @ H @ lam + b @ lam


def kkt_residual(lam, grad):
    """``max_k [max(0, -grad_k) + |lam_k * grad_k|]``; zero exactly at a KKT point."""
    if lam.size == 0:
        return 0.0
    return float(np.max(np.maximum(0.0, -grad) + np.abs(lam * grad)))


def default_max_sweeps(q):
    # coordinate descent contracts at a rate set by the conditioning of H,
    # not by q, so small ill-conditioned problems get a fixed floor
    return max(10 * q * (1 + q), MIN_SWEEPS)


def nnls_solve(H, b, tol=1e-9, max_sweeps=None, trace=None):
    """Solve the non-negative quadratic program by cyclic coordinate descent.

    Coordinates are visited in ascending order. A coordinate with (near) zero
    curvature is left alone while its gradient is non-negative; with a
    negative gradient the problem is unbounded and :class:`DegenerateDiagonal`
    is raised.

    If ``trace`` is a list, the objective value after every sweep is appended
    to it (sweep 0 is the starting point).

    Running out of sweeps is not an error: the last iterate is returned with
    ``converged=False``.
    """
    H = np.asarray(H, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    q = b.shape[0]
    if H.shape != (q, q):
        raise ValueError(f"H has shape {H.shape}, expected {(q, q)}")
    if max_sweeps is None:
        max_sweeps = default_max_sweeps(q)

    lam = np.zeros(q)
    grad = b.copy()
    diag = np.diag(H).copy()
    if trace is not None:
        trace.append(0.0)

    res = kkt_residual(lam, grad)
    sweeps = 0
    while res > tol and sweeps < max_sweeps:
        for k in range(q):
            g = grad[k]
            if diag[k] < ZERO_CURVATURE:
                if g < 0.0:
                    raise DegenerateDiagonal(
                        f"coordinate {k}: curvature {diag[k]:.3e}, gradient {g:.3e}"
                    )
                continue
            new = lam[k] - g / diag[k]
            if new < 0.0:
                new = 0.0
            step = new - lam[k]
            if step != 0.0:
                lam[k] = new
                grad += H[:, k] * step
        sweeps += 1
        if sweeps % REFRESH_EVERY == 0:
            grad = H @ lam + b
        if trace is not None:
            trace.append(float(objective(H, b, lam)))
        res = kkt_residual(lam, grad)

    grad = H @ lam + b
    res = kkt_residual(lam, grad)
    return NnlsSolution(
        lam=lam,
        kkt_residual=res,
        sweeps=sweeps,
        converged=res <= tol,
        objective=float(objective(H, b, lam)),
    )
