"""Output encodings, decoders and the linear description of a target region.

Three encodings are supported:

* ``onehot``: one output per class, decision by argmax of the logits.
* ``ecoc``: classes are +/-1 codewords (rows of ``C``); decision by maximal
  correlation between ``tanh(logits)`` and each codeword.
* ``multilabel``: every +/-1 label vector is a class; each label is decided by
  the sign of its logit (a zero logit decodes to +1).

The target region is always written as ``A d <= b`` over the displacement
``d`` of the logit vector.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .errors import ConfigMismatch, InvalidOrder

ONEHOT = "onehot"
ECOC = "ecoc"
MULTILABEL = "multilabel"
KINDS = (ONEHOT, ECOC, MULTILABEL)


@dataclass(frozen=True)
class Codebook:
    """Class-to-codeword map.

    ``C`` holds one codeword per row. For one-hot it is the identity (the
    natural basis over raw logits); for multi-label it is ``None`` since the
    2**n codewords are never materialized.
    """

    kind: str
    n: int
    C: np.ndarray = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.kind == MULTILABEL:
            return
        C = np.asarray(self.C, dtype=np.float64)
        object.__setattr__(self, "C", C)
        if C.ndim != 2 or C.shape[1] != self.n:
            raise ValueError(f"codebook has shape {C.shape}, expected (l, {self.n})")
        norms = np.einsum("ij,ij->i", C, C)
        if not np.allclose(norms, norms[0]):
            raise ValueError("codewords must all have the same norm")
        if len({row.tobytes() for row in C}) != C.shape[0]:
            raise ValueError("codewords must be pairwise distinct")

    @property
    def l(self):
        if self.kind == MULTILABEL:
            return 2**self.n
        return self.C.shape[0]

    def codeword(self, target):
        """Return the +/-1 (or basis) codeword of a target."""
        if self.kind == MULTILABEL:
            return np.asarray(target, dtype=np.float64)
        return self.C[int(target)]


def onehot_codebook(l):
    return Codebook(ONEHOT, l, np.eye(l))


def multilabel_codebook(n):
    return Codebook(MULTILABEL, n)


def hadamard_codebook(n, l):
    """First ``l`` rows of the order-``n`` Sylvester Hadamard matrix."""
    if n < 1 or n & (n - 1):
        raise InvalidOrder(f"Hadamard order must be a power of two, got {n}")
    if not 1 <= l <= n:
        raise InvalidOrder(f"need 1 <= l <= n, got l={l}, n={n}")
    return Codebook(ECOC, n, hadamard(n).astype(np.float64)[:l])


def all_label_vectors(n):
    """All 2**n vectors in {-1,+1}^n, ordered as binary counting with -1 for 0."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return np.where(bits == 1, 1.0, -1.0)


def materialize_multilabel(n):
    """Explicit ECOC-style codebook over all 2**n label vectors (oracle use only)."""
    return Codebook(ECOC, n, all_label_vectors(n))


def validate_target(cb, target):
    if cb.kind == MULTILABEL:
        t = np.asarray(target, dtype=np.float64)
        if t.shape != (cb.n,) or not np.all(np.abs(t) == 1.0):
            raise ValueError(f"multi-label target must be a +/-1 vector of length {cb.n}")
        return t
    t = int(target)
    if not 0 <= t < cb.l:
        raise ValueError(f"target class {t} out of range for {cb.l} classes")
    return t


def decode(cb, out):
    """Decision for an output (logit) vector: class index, or +/-1 label vector."""
    out = np.asarray(out, dtype=np.float64)
    if cb.kind == ONEHOT:
        return int(np.argmax(out))
    if cb.kind == ECOC:
        # argmax returns the first maximum, so ties go to the lowest index
        return int(np.argmax(cb.C @ np.tanh(out)))
    return np.where(out >= 0.0, 1.0, -1.0)


def decode_surface(cb, out):
    """Decision by correlation on the raw logits, the surface the constraints are built on.

    Equal to :func:`decode` for one-hot and multi-label; for ECOC it skips the tanh.
    """
    if cb.kind == ECOC:
        return int(np.argmax(cb.C @ np.asarray(out, dtype=np.float64)))
    return decode(cb, out)


def decode_batch(cb, Z):
    Z = np.asarray(Z, dtype=np.float64)
    if cb.kind == ONEHOT:
        return np.argmax(Z, axis=1)
    if cb.kind == ECOC:
        return np.argmax(np.tanh(Z) @ cb.C.T, axis=1)
    return np.where(Z >= 0.0, 1.0, -1.0)


def same_decision(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return bool(np.array_equal(np.asarray(a), np.asarray(b)))
    return int(a) == int(b)


@dataclass(frozen=True)
class ConstraintSystem:
    """Target region ``A d <= b`` in displacement space."""

    A: np.ndarray
    b: np.ndarray

    @property
    def q(self):
        return self.b.shape[0]

    def satisfied(self, d, strict=False):
        slack = self.b - self.A @ np.asarray(d, dtype=np.float64)
        return bool(np.all(slack > 0.0)) if strict else bool(np.all(slack >= 0.0))


def build_constraints(cb, target, f0):
    """Correlation constraints ``d @ (c_i - c_t) <= f0 @ c_t - f0 @ c_i`` for every ``i != t``.

    Rows come in ascending ``i`` with ``t`` skipped. Multi-label codebooks are
    routed to :func:`build_constraints_multilabel`.
    """
    if cb.kind == MULTILABEL:
        return build_constraints_multilabel(target, f0)
    t = validate_target(cb, target)
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.shape != (cb.n,):
        raise ConfigMismatch(f"output has length {f0.shape}, codebook expects {cb.n}")
    others = np.array([i for i in range(cb.l) if i != t], dtype=int)
    A = cb.C[others] - cb.C[t]
    corr = cb.C @ f0
    b = corr[t] - corr[others]
    return ConstraintSystem(A, b)


def build_constraints_tanh(cb, target, z0):
    """ECOC constraints on the decoder's own surface ``tanh(z)``, linearized in the logits.

    Row ``i`` is ``(c_i - c_t) * sech(z0)**2`` and ``b_i = tanh(z0) @ (c_t - c_i)``.
    """
    t = validate_target(cb, target)
    z0 = np.asarray(z0, dtype=np.float64)
    f0 = np.tanh(z0)
    slope = 1.0 - f0**2
    others = np.array([i for i in range(cb.l) if i != t], dtype=int)
    diff = cb.C[others] - cb.C[t]
    return ConstraintSystem(diff * slope, -(diff @ f0))


def build_constraints_multilabel(c_t, f0):
    """Per-label sign constraints ``-c_tj d_j <= f0_j c_tj`` (a diagonal system of size n)."""
    c_t = np.asarray(c_t, dtype=np.float64)
    f0 = np.asarray(f0, dtype=np.float64)
    if c_t.shape != f0.shape:
        raise ConfigMismatch(f"target length {c_t.shape} does not match output length {f0.shape}")
    return ConstraintSystem(np.diag(-c_t), f0 * c_t)


def save_codebook(cb, path):
    path = Path(path)
    if cb.kind == MULTILABEL:
        path.write_text(f"{cb.kind} {cb.n}\n")
        return
    lines = [f"{cb.kind} {cb.l} {cb.n}"]
    lines += [" ".join(str(int(v)) for v in row) for row in cb.C]
    path.write_text("\n".join(lines) + "\n")


def load_codebook(path):
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    kind = head[0]
    if kind == MULTILABEL:
        return multilabel_codebook(int(head[1]))
    l, n = int(head[1]), int(head[2])
    rows = [[float(v) for v in line.split()] for line in lines[1:1 + l]]
    if len(rows) != l or any(len(r) != n for r in rows):
        raise ConfigMismatch(f"{path}: codebook body does not match header {l}x{n}")
    return Codebook(kind, n, np.array(rows))
