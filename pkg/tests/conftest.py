import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def full_rank_jacobian(rng, n, m):
    while True:
        J = rng.standard_normal((n, m))
        s = np.linalg.svd(J, compute_uv=False)
        if s[-1] > 1e-3 * s[0]:
            return J


def spd(rng, n, cond=1e3):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0, cond, n)
    return (Q * eig) @ Q.T


def feasible_qp(rng, n, q):
    """Random metric QP ``min 0.5 d inv(G) d  s.t.  A d <= b`` with a guaranteed feasible point."""
    G = spd(rng, n, cond=30)
    A = rng.standard_normal((q, n))
    d0 = rng.standard_normal(n)
    b = A @ d0 + rng.uniform(0.0, 1.0, q)
    return G, A, b


def linear_instance(rng, n=None, m=None, kind="onehot"):
    """Linear model, start point and target whose optimal perturbation stays inside [0,1]^m.

    Returns ``(W, c, x0, target)``.
    """
    from jma.encoding import build_constraints, decode, onehot_codebook
    from jma.oracle import qp_active_set_enumerate

    while True:
        nn = n or int(rng.integers(2, 7))
        mm = m or int(rng.integers(nn + 3, 30))
        W = rng.standard_normal((nn, mm)) * rng.uniform(0.5, 3.0, (nn, 1))
        c = rng.standard_normal(nn)
        x0 = rng.uniform(0.35, 0.65, mm)
        z0 = W @ x0 + c
        cb = onehot_codebook(nn)
        t = int(rng.choice([k for k in range(nn) if k != decode(cb, z0)]))
        if z0.max() - z0[t] < 0.05:
            continue
        G = W @ W.T
        cs = build_constraints(cb, t, z0)
        d = qp_active_set_enumerate(np.linalg.inv(G), cs.A, cs.b).d
        x_opt = x0 + W.T @ np.linalg.solve(G, d)
        # keep instances whose exact optimum needs no clipping
        if np.all(x_opt > 0.0) and np.all(x_opt < 1.0):
            return W, c, x0, t
