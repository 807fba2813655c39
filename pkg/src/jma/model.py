"""Dense feed-forward networks with analytic input Jacobians.

A :class:`LayeredNet` maps ``x in R^m`` to logits ``z in R^n``: every layer is
affine, hidden layers are followed by a smooth activation and the last layer
is left linear. Also here: a central-difference Jacobian for cross-checking,
a synthetic data generator, a full-batch trainer, and the text file formats
for models and datasets.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .encoding import ECOC, MULTILABEL, ONEHOT, decode_batch, hadamard_codebook
from .errors import ConfigMismatch

TANH = "tanh"
RELU_SMOOTH = "relu_smooth"
ACTIVATIONS = (TANH, RELU_SMOOTH)
# sharpness of the softplus used as a C^1 stand-in for ReLU
SOFTPLUS_BETA = 10.0


def _act(kind, a):
    if kind == TANH:
        return np.tanh(a)
    return np.logaddexp(0.0, SOFTPLUS_BETA * a) / SOFTPLUS_BETA


def _act_grad(kind, a):
    if kind == TANH:
        return 1.0 - np.tanh(a) ** 2
    return expit(SOFTPLUS_BETA * a)


@dataclass(frozen=True)
class LayeredNet:
    weights: tuple
    biases: tuple
    activation: str = TANH
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for k, (W, c) in enumerate(zip(self.weights, self.biases)):
            if c.shape != (W.shape[0],):
                raise ValueError(f"layer {k}: bias shape {c.shape} vs weight shape {W.shape}")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input width {W.shape[1]} does not chain")

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def m(self):
        return self.weights[0].shape[1]

    @property
    def n(self):
        return self.weights[-1].shape[0]


def make_net(dims, activation=TANH, seed=0):
    """Random net with weights and biases uniform in +/- 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return LayeredNet(tuple(weights), tuple(biases), activation, {"seed": seed})


def linear_net(W, c=None):
    W = np.asarray(W, dtype=np.float64)
    c = np.zeros(W.shape[0]) if c is None else np.asarray(c, dtype=np.float64)
    return LayeredNet((W,), (c,))


def forward_logits(net, x):
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != net.m:
        raise ConfigMismatch(f"input has length {h.shape[-1]}, net expects {net.m}")
    last = len(net.weights) - 1
    for k, (W, c) in enumerate(zip(net.weights, net.biases)):
        h = h @ W.T + c
        if k < last:
            h = _act(net.activation, h)
    return h


def jacobian_logits(net, x):
    """Exact ``d logits / d x`` (n x m) by reverse accumulation through the layers."""
    h = np.asarray(x, dtype=np.float64)
    pre = []
    for W, c in zip(net.weights[:-1], net.biases[:-1]):
        a = W @ h + c
        pre.append(a)
        h = _act(net.activation, a)
    J = net.weights[-1].copy()
    for W, a in zip(reversed(net.weights[:-1]), reversed(pre)):
        J = (J * _act_grad(net.activation, a)) @ W
    return J


def fd_jacobian(net, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    if not h > 0:
        raise ValueError("step h must be positive")
    J = np.empty((net.n, net.m))
    for j in range(net.m):
        e = np.zeros(net.m)
        e[j] = h
        J[:, j] = (forward_logits(net, x + e) - forward_logits(net, x - e)) / (2 * h)
    return J


@dataclass(frozen=True)
class Dataset:
    """Inputs in [0,1]^m with either class labels (shape (N,)) or +/-1 label vectors (shape (N, n))."""

    X: np.ndarray
    y: np.ndarray
    kind: str

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y disagree in sample count")
        if np.any(self.X < 0.0) or np.any(self.X > 1.0):
            raise ValueError("inputs must lie in [0, 1]")

    @property
    def m(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]


def make_synthetic(seed, m, n, l, kind, samples_per_class, spread=0.06, separation=0.15):
    """Seeded toy data in [0,1]^m.

    One-hot and ECOC: one Gaussian blob per class, centers uniform in
    [0.25, 0.75]^m. Multi-label: each of the n labels is a half-space along
    its own orthonormal direction; every one of the 2**n label vectors gets
    ``samples_per_class`` points.
    """
    rng = np.random.default_rng(seed)
    if kind == MULTILABEL:
        if n > m:
            raise ConfigMismatch(f"multi-label data needs n <= m, got n={n}, m={m}")
        U, _ = np.linalg.qr(rng.standard_normal((m, n)))
        bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
        labels = np.repeat(np.where(bits == 1, 1.0, -1.0), samples_per_class, axis=0)
        X = 0.5 + separation * labels @ U.T + spread * rng.standard_normal((len(labels), m))
        order = rng.permutation(len(labels))
        return Dataset(np.clip(X[order], 0.0, 1.0), labels[order], kind)
    if kind == ONEHOT and n != l:
        raise ConfigMismatch(f"one-hot needs n == l, got n={n}, l={l}")
    centers = rng.uniform(0.25, 0.75, (l, m))
    labels = np.repeat(np.arange(l), samples_per_class)
    X = centers[labels] + spread * rng.standard_normal((len(labels), m))
    order = rng.permutation(len(labels))
    return Dataset(np.clip(X[order], 0.0, 1.0), labels[order], kind)


def default_codebook(kind, n, l):
    from .encoding import multilabel_codebook, onehot_codebook

    if kind == ONEHOT:
        return onehot_codebook(l)
    if kind == ECOC:
        return hadamard_codebook(n, l)
    return multilabel_codebook(n)


def _loss_grad(cb, Z, y):
    """Mean loss over the batch and its gradient with respect to the logits."""
    N = Z.shape[0]
    if cb.kind == ONEHOT:
        logp = log_softmax(Z, axis=1)
        loss = -logp[np.arange(N), y].mean()
        G = softmax(Z, axis=1)
        G[np.arange(N), y] -= 1.0
        return loss, G / N
    if cb.kind == ECOC:
        codes = cb.C[y]
        T = np.tanh(Z)
        margin = 1.0 - codes * T
        active = margin > 0.0
        loss = np.where(active, margin, 0.0).sum(axis=1).mean()
        return loss, np.where(active, -codes * (1.0 - T**2), 0.0) / N
    yz = y * Z
    loss = np.logaddexp(0.0, -yz).sum(axis=1).mean()
    return loss, -y * expit(-yz) / N


def accuracy(net, ds, cb):
    pred = decode_batch(cb, forward_logits(net, ds.X))
    if cb.kind == MULTILABEL:
        return float(np.mean(np.all(pred == ds.y, axis=1)))
    return float(np.mean(pred == ds.y))


def train(net, ds, cb, epochs, lr, momentum=0.9):
    """Full-batch gradient descent (heavy-ball momentum) on the encoding's loss.

    Cross-entropy for one-hot, hinge on tanh outputs for ECOC, per-label
    logistic loss for multi-label. Returns a new net whose ``meta`` carries
    the final clean accuracy and loss.
    """
    if ds.m != net.m:
        raise ConfigMismatch(f"dataset width {ds.m} does not match net input {net.m}")
    if net.n != cb.n:
        raise ConfigMismatch(f"net has {net.n} outputs, codebook expects {cb.n}")
    Ws = [W.copy() for W in net.weights]
    cs = [c.copy() for c in net.biases]
    vW = [np.zeros_like(W) for W in Ws]
    vc = [np.zeros_like(c) for c in cs]
    last = len(Ws) - 1
    loss = float("nan")
    for _ in range(epochs):
        hs, pres = [ds.X], []
        h = ds.X
        for k, (W, c) in enumerate(zip(Ws, cs)):
            a = h @ W.T + c
            pres.append(a)
            h = _act(net.activation, a) if k < last else a
            hs.append(h)
        loss, G = _loss_grad(cb, h, ds.y)
        for k in range(last, -1, -1):
            gW = G.T @ hs[k]
            gc = G.sum(axis=0)
            if k:
                G = (G @ Ws[k]) * _act_grad(net.activation, pres[k - 1])
            vW[k] = momentum * vW[k] - lr * gW
            vc[k] = momentum * vc[k] - lr * gc
            Ws[k] += vW[k]
            cs[k] += vc[k]
    out = replace(net, weights=tuple(Ws), biases=tuple(cs), meta=dict(net.meta))
    if epochs:
        loss = float(_loss_grad(cb, forward_logits(out, ds.X), ds.y)[0])
    out.meta.update(accuracy=accuracy(out, ds, cb), loss=loss, encoding=cb.kind)
    return out


def save_net(net, path):
    lines = ["dims " + " ".join(str(d) for d in net.dims), f"activation {net.activation}"]
    for key in sorted(net.meta):
        lines.append(f"meta {key} {net.meta[key]!r}")
    for W, c in zip(net.weights, net.biases):
        lines += [" ".join(repr(float(v)) for v in row) for row in W]
        lines.append(" ".join(repr(float(v)) for v in c))
    Path(path).write_text("\n".join(lines) + "\n")


def _meta_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text.strip("'\"")


def load_net(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "dims":
        raise ConfigMismatch(f"{path}: missing 'dims' header")
    dims = [int(d) for d in head[1:]]
    activation = lines[1].split()[1]
    pos = 2
    meta = {}
    while pos < len(lines) and lines[pos].startswith("meta "):
        _, key, value = lines[pos].split(" ", 2)
        meta[key] = _meta_value(value)
        pos += 1
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        W = np.array([[float(v) for v in lines[pos + r].split()] for r in range(fan_out)])
        pos += fan_out
        c = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        if W.shape != (fan_out, fan_in):
            raise ConfigMismatch(f"{path}: layer weights have shape {W.shape}, expected {(fan_out, fan_in)}")
        weights.append(W)
        biases.append(c)
    return LayeredNet(tuple(weights), tuple(biases), activation, meta)


def save_dataset(ds, path):
    m = ds.m
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if ds.kind == MULTILABEL:
            n = ds.y.shape[1]
            w.writerow([f"x_{j}" for j in range(m)] + [f"y_{j}" for j in range(n)])
            for x, y in zip(ds.X, ds.y):
                w.writerow([repr(float(v)) for v in x] + [int(v) for v in y])
        else:
            w.writerow([f"x_{j}" for j in range(m)] + ["label"])
            for x, y in zip(ds.X, ds.y):
                w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_dataset(path, kind=None):
    """Read a dataset CSV; the label layout (``label`` vs ``y_*``) fixes the kind unless given."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
    data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    X = data[:, xcols]
    if ycols:
        if kind not in (None, MULTILABEL):
            raise ConfigMismatch(f"{path}: label vectors found but encoding is {kind}")
        return Dataset(X, data[:, ycols], MULTILABEL)
    if "label" not in header:
        raise ConfigMismatch(f"{path}: no label column")
    if kind == MULTILABEL:
        raise ConfigMismatch(f"{path}: class labels found but encoding is multilabel")
    return Dataset(X, data[:, header.index("label")].astype(int), kind or ONEHOT)
