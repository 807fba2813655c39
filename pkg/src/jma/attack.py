"""Jacobian-induced Mahalanobis-distance attack, plus the LOTS baseline.

One linearized step works in the logit space. With ``J`` the Jacobian of the
logits, the cheapest input perturbation producing a logit displacement ``d``
is ``J.T @ inv(J J.T) @ d`` and costs ``d @ inv(J J.T) @ d``. Minimizing that
cost over the target region ``A d <= b`` is done through its dual, a
non-negative quadratic program in ``lam`` with Hessian ``A (J J.T) A.T``:

    d     = -(J J.T) A.T lam
    delta = -J.T A.T lam

:func:`jma_attack` wraps the step in the iterative scheme: apply, clip, and
either refine by bisection (target reached) or fall back to a short step of
length ``epsilon`` along the same direction and relinearize.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .encoding import (
    ECOC,
    MULTILABEL,
    ONEHOT,
    ConstraintSystem,
    build_constraints,
    build_constraints_tanh,
    decode,
    same_decision,
    validate_target,
)
from .errors import AlreadyTarget, DegenerateDiagonal, RankDeficient
from .linalg import chol_solve, cholesky, gram
from .model import forward_logits, jacobian_logits
from .nnls import nnls_solve

RANK_DEFICIENT = "RankDeficient"
BUDGET = "Budget"
ITERATION_LIMIT = "IterationLimit"
ZERO_STEP = "ZeroStep"
ZERO_GRADIENT = "ZeroGradient"
DEGENERATE = "DegenerateDiagonal"


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.5
    n_it_max: int = 200
    n_bs: int = 6
    nnls_tol: float = 1e-9
    rank_tol: float = None
    time_budget: float = 60.0
    # relative shift of the region boundary so the linearized target is hit
    # strictly rather than on a floating-point tie
    overshoot: float = 1e-9
    # "step": bisect between the last pre-step point and the accepted point;
    # "origin": bisect between x0 and the accepted point
    bs_anchor: str = "step"
    # ECOC only. "logits": correlation constraints on the raw logits;
    # "output": correlations of tanh(logits), the decoder's own surface;
    # "auto": logits, switching to output for a step whose logit solution is
    # null while the decoder still disagrees
    surface: str = "auto"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n_bs < 1 or self.n_it_max < 1:
            raise ValueError("n_bs and n_it_max must be at least 1")
        if self.bs_anchor not in ("step", "origin"):
            raise ValueError(f"unknown bs_anchor {self.bs_anchor!r}")
        if self.surface not in ("logits", "output", "auto"):
            raise ValueError(f"unknown surface {self.surface!r}")


@dataclass(frozen=True)
class StepSolution:
    J: np.ndarray
    lam: np.ndarray
    d_star: np.ndarray
    delta_star: np.ndarray
    dual_converged: bool
    constraints: ConstraintSystem


@dataclass
class AttackResult:
    success: bool
    x_adv: np.ndarray
    delta: np.ndarray
    n_it: int
    v_loops: int
    wall_time: float
    failure: str = None
    decision: object = None
    # accepted point before bisection (successful JMA runs only)
    x_unrefined: np.ndarray = None


def solve_displacement(G, A, b, tol=1e-9, max_sweeps=None):
    """Minimize ``0.5 d @ inv(G) @ d`` subject to ``A d <= b`` through the dual.

    Returns ``(lam, d, nnls_solution)`` where ``d = -G @ A.T @ lam``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    H = A @ G @ A.T
    H = 0.5 * (H + H.T)
    sol = nnls_solve(H, b, tol=tol, max_sweeps=max_sweeps)
    d = -G @ (A.T @ sol.lam)
    return sol.lam, d, sol


def _check_identities(step, G, factor):
    J, d, delta = step.J, step.d_star, step.delta_star
    scale = max(np.linalg.norm(d), 1e-300)
    assert np.linalg.norm(J @ delta - d) <= 1e-8 * scale + 1e-12, "J delta != d"
    sq = delta @ delta
    maha = d @ chol_solve(factor, d)
    assert abs(sq - maha) <= 1e-8 * max(sq, maha) + 1e-300, (
        f"Mahalanobis identity violated: {sq!r} vs {maha!r}"
    )


def jma_step(net, cb, target, x, cfg=AttackConfig()):
    """One linearized solve at ``x``: the minimum-norm perturbation into the target region."""
    x = np.asarray(x, dtype=np.float64)
    f0 = forward_logits(net, x)
    J = jacobian_logits(net, x)
    G = gram(J)
    factor = cholesky(G, cfg.rank_tol)
    if cfg.surface == "output" and cb.kind == ECOC:
        cs = build_constraints_tanh(cb, target, f0)
    else:
        cs = build_constraints(cb, target, f0)
    b = cs.b - cfg.overshoot * (1.0 + np.max(np.abs(f0)))
    lam, d, sol = solve_displacement(G, cs.A, b, tol=cfg.nnls_tol)
    delta = -J.T @ (cs.A.T @ lam)
    step = StepSolution(J, lam, d, delta, sol.converged, cs)
    if __debug__:
        _check_identities(step, G, factor)
    return step


def _elapsed(start):
    return time.perf_counter() - start


def _clip(x):
    return np.clip(x, 0.0, 1.0)


def jma_attack(net, cb, target, x0, cfg=AttackConfig()):
    """Iterative attack; see the module docstring.

    On success ``n_it = (v_loops - 1) + n_bs``. Failures (rank loss, time
    budget, iteration limit, a null step that cannot make progress) are
    reported in the result rather than raised.
    """
    start = time.perf_counter()
    target = validate_target(cb, target)
    x0 = np.asarray(x0, dtype=np.float64)
    if same_decision(decode(cb, forward_logits(net, x0)), target):
        raise AlreadyTarget("starting point already decodes to the target")

    x = x0.copy()
    failure = ITERATION_LIMIT
    v = 0
    for v in range(1, cfg.n_it_max + 1):
        if _elapsed(start) > cfg.time_budget:
            failure, v = BUDGET, v - 1
            break
        try:
            step = jma_step(net, cb, target, x, cfg)
        except RankDeficient:
            failure = RANK_DEFICIENT
            break
        except DegenerateDiagonal:
            failure = DEGENERATE
            break
        if (
            cfg.surface == "auto"
            and cb.kind == ECOC
            and not np.any(step.delta_star)
        ):
            try:
                step = jma_step(net, cb, target, x, replace(cfg, surface="output"))
            except (RankDeficient, DegenerateDiagonal):
                pass
        x_pre = x
        delta = step.delta_star
        x = _clip(x_pre + delta)
        if same_decision(decode(cb, forward_logits(net, x)), target):
            x_adv = _refine(net, cb, target, x0, x_pre, delta, x, cfg)
            return AttackResult(
                success=True,
                x_adv=x_adv,
                delta=x_adv - x0,
                n_it=(v - 1) + cfg.n_bs,
                v_loops=v,
                wall_time=_elapsed(start),
                decision=decode(cb, forward_logits(net, x_adv)),
                x_unrefined=x,
            )
        norm = np.linalg.norm(delta)
        if norm == 0.0:
            x = x_pre
            failure = ZERO_STEP
            break
        x = _clip(x_pre + cfg.epsilon * delta / norm)
    return AttackResult(
        success=False,
        x_adv=x,
        delta=x - x0,
        n_it=v,
        v_loops=v,
        wall_time=_elapsed(start),
        failure=failure,
        decision=decode(cb, forward_logits(net, x)),
    )


def _refine(net, cb, target, x0, x_pre, delta, x_hit, cfg):
    """Bisect the scale of the last step, keeping the smallest scale still on target.

    Exactly ``n_bs`` probes. The refined point is discarded if it ends up
    farther from ``x0`` than the unrefined one.
    """
    if cfg.bs_anchor == "origin":
        base, direction = x0, x_hit - x0
    else:
        base, direction = x_pre, delta
    lo, hi = 0.0, 1.0
    best = x_hit
    for _ in range(cfg.n_bs):
        mid = 0.5 * (lo + hi)
        probe = _clip(base + mid * direction)
        if same_decision(decode(cb, forward_logits(net, probe)), target):
            hi, best = mid, probe
        else:
            lo = mid
    if np.linalg.norm(best - x0) > np.linalg.norm(x_hit - x0):
        return x_hit
    return best


def lots_attack(net, cb, target, target_logits, x0, n_it_max=2000, step_size=1.0 / 255.0,
                time_budget=60.0):
    """LOTS at the logit layer: normalized gradient steps on ``||target_logits - z(x)||^2``.

    Each update moves the coordinate with the largest gradient magnitude by
    exactly ``step_size``. Stops as soon as the true decoder returns the target.
    """
    start = time.perf_counter()
    target = validate_target(cb, target)
    target_logits = np.asarray(target_logits, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if target_logits.shape != (net.n,):
        raise ValueError(f"target logits must have length {net.n}")
    x = x0.copy()
    it = 0
    failure = ITERATION_LIMIT
    while True:
        z = forward_logits(net, x)
        decision = decode(cb, z)
        if same_decision(decision, target):
            return AttackResult(True, x, x - x0, it, it, _elapsed(start), None, decision)
        if it >= n_it_max:
            break
        if _elapsed(start) > time_budget:
            failure = BUDGET
            break
        nu = jacobian_logits(net, x).T @ (2.0 * (z - target_logits))
        peak = np.max(np.abs(nu))
        if peak < 1e-15:
            failure = ZERO_GRADIENT
            break
        x = _clip(x - step_size * nu / peak)
        it += 1
    return AttackResult(False, x, x - x0, it, it, _elapsed(start), failure, decision)


def metrics(delta, m, target=None, achieved=None, original=None):
    """``(mse, basr)`` of one attack.

    ``mse = ||delta|| / sqrt(m)``. For label vectors, ``basr`` is the
    fraction of target components reached; when ``original`` is given only
    the components the target changes are counted. For class indices it is
    1.0 iff the classes match. With no target, ``basr`` is ``None``.
    """
    mse = float(np.linalg.norm(np.asarray(delta, dtype=np.float64)) / np.sqrt(m))
    if target is None:
        return mse, None
    if np.ndim(target) == 0:
        return mse, float(int(target) == int(achieved))
    target = np.asarray(target)
    achieved = np.asarray(achieved)
    mask = np.ones(target.shape, dtype=bool)
    if original is not None:
        mask = np.asarray(original) != target
    if not mask.any():
        return mse, 1.0
    return mse, float(np.mean(achieved[mask] == target[mask]))


def label_bits(cb, decision):
    """Bit view of a decision for bitwise bASR: codeword for ECOC, the vector for multi-label."""
    if cb.kind == MULTILABEL:
        return np.asarray(decision, dtype=np.float64)
    if cb.kind == ONEHOT:
        return int(decision)
    return cb.codeword(decision)

