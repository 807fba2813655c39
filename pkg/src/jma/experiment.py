"""Batch attack runs, per-sample report rows and their aggregation."""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .attack import AttackConfig, jma_attack, label_bits, lots_attack, metrics
from .encoding import ECOC, MULTILABEL, ONEHOT, all_label_vectors, decode, decode_batch, same_decision
from .errors import ConfigMismatch, SchemaMismatch
from .model import forward_logits

REPORT_COLUMNS = ["sample_id", "target", "success", "n_it", "mse", "basr", "time_ms", "failure_reason"]
TARGET_MODES = ("random-class", "random-bit-flip", "from-dataset")


@dataclass
class ExperimentConfig:
    seed: int = 0
    encoding: str = ONEHOT
    m: int = 8
    n: int = 4
    l: int = 4
    attack: str = "jma"
    epsilon: float = 0.5
    max_iters: int = 200
    bs_steps: int = 6
    flip_bits: int = None
    flip_relative: str = "prediction"
    target_mode: str = None
    samples: int = 50
    samples_per_class: int = 50
    time_budget_s: float = 60.0
    workers: int = 1
    hidden: tuple = (32, 32)
    activation: str = "tanh"
    epochs: int = 500
    lr: float = 0.1
    lots_samples: int = 20
    lots_step: float = 1.0 / 255.0
    # "class-mean": mean logits of training samples with the target label;
    # "random": target signs with random magnitudes, no sample needed
    lots_target: str = "class-mean"
    out: str = None

    def __post_init__(self):
        if self.target_mode is None:
            self.target_mode = "random-bit-flip" if self.flip_bits else "random-class"
        if self.target_mode not in TARGET_MODES:
            raise ValueError(f"unknown target mode {self.target_mode!r}")
        if self.attack not in ("jma", "lots"):
            raise ValueError(f"unknown attack {self.attack!r}")
        if self.target_mode == "random-bit-flip":
            if self.encoding not in (MULTILABEL, ECOC):
                raise ValueError("bit-flip targets need the multilabel or ecoc encoding")
            if not self.flip_bits or not 1 <= self.flip_bits <= self.n:
                raise ValueError(f"flip-bits must be in 1..{self.n}")
        if self.flip_relative not in ("prediction", "truth"):
            raise ValueError(f"unknown flip reference {self.flip_relative!r}")
        if self.lots_target not in ("class-mean", "random"):
            raise ValueError(f"unknown LOTS target mode {self.lots_target!r}")
        self.hidden = tuple(self.hidden)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def attack_config(self):
        return AttackConfig(
            epsilon=self.epsilon,
            n_it_max=self.max_iters,
            n_bs=self.bs_steps,
            time_budget=self.time_budget_s,
        )

    def params_label(self):
        if self.attack == "jma":
            return f"eps={self.epsilon:g},n_it_max={self.max_iters},n_bs={self.bs_steps}"
        return f"n_it_max={self.max_iters}"


@dataclass
class ReportRow:
    sample_id: int
    target: str
    success: bool
    n_it: int
    mse: float
    basr: float
    time_ms: float
    failure_reason: str

    def as_csv(self):
        return [
            self.sample_id,
            self.target,
            int(self.success),
            self.n_it,
            repr(self.mse),
            repr(self.basr),
            f"{self.time_ms:.3f}",
            self.failure_reason or "",
        ]


def format_target(target):
    if isinstance(target, np.ndarray):
        return " ".join(str(int(v)) for v in target)
    return str(int(target))


def _truth(ds, i):
    return ds.y[i].astype(np.float64) if ds.kind == MULTILABEL else int(ds.y[i])


def select_samples(net, cb, ds, cfg, rng):
    """Seeded sample order; keep correctly classified points except in multi-label from-dataset mode."""
    order = rng.permutation(len(ds))
    keep_all = cb.kind == MULTILABEL and cfg.target_mode == "from-dataset"
    pred = decode_batch(cb, forward_logits(net, ds.X))
    chosen = []
    for i in order:
        if keep_all or same_decision(pred[i], _truth(ds, i)):
            chosen.append(int(i))
        if len(chosen) == cfg.samples:
            break
    return chosen


def select_target(cb, decision, cfg, rng, ds=None, truth=None):
    """Draw a target that differs from the current decision."""
    if cfg.target_mode == "random-bit-flip":
        if cb.kind == ECOC:
            word = cb.codeword(decision)
            dist = np.sum(cb.C != word, axis=1)
            pool = [k for k in range(cb.l) if dist[k] == cfg.flip_bits]
            if not pool:
                raise ConfigMismatch(f"no codeword at Hamming distance {cfg.flip_bits}")
            return int(rng.choice(pool))
        ref = decision if cfg.flip_relative == "prediction" or truth is None else truth
        target = np.array(ref, dtype=np.float64)
        idx = rng.choice(cb.n, cfg.flip_bits, replace=False)
        target[idx] *= -1.0
        if same_decision(target, decision):
            # truth-relative flips can land on the prediction; flip one more bit
            target[idx[0]] *= -1.0
        return target
    if cfg.target_mode == "from-dataset":
        if cb.kind == MULTILABEL:
            pool = np.unique(ds.y, axis=0)
            pool = [row for row in pool if not same_decision(row, decision)]
            return np.array(pool[rng.integers(len(pool))], dtype=np.float64)
        pool = [k for k in np.unique(ds.y) if int(k) != int(decision)]
        return int(rng.choice(pool))
    if cb.kind == MULTILABEL:
        pool = [row for row in all_label_vectors(cb.n) if not same_decision(row, decision)]
        return np.array(pool[rng.integers(len(pool))])
    pool = [k for k in range(cb.l) if k != int(decision)]
    return int(rng.choice(pool))


def lots_target_logits(net, cb, ds, target, count=20):
    """Mean logits of (up to) ``count`` samples carrying the target label.

    With no such sample (a multi-label vector absent from the data) the
    target is synthesized as ``c_t * mean(|z|)`` per label.
    """
    Z = forward_logits(net, ds.X)
    if cb.kind == MULTILABEL:
        hits = np.all(ds.y == target, axis=1)
        if not hits.any():
            return np.asarray(target) * np.abs(Z).mean(axis=0)
    else:
        hits = ds.y == int(target)
    return Z[np.flatnonzero(hits)[:count]].mean(axis=0)


def random_target_logits(net, cb, ds, target, rng):
    """Target logits that know only the target's sign pattern.

    Each component is ``w_j * |g_j|`` with ``g_j ~ N(0, var_j)``, ``var_j``
    the variance of logit ``j`` over the data and ``w`` the target codeword.
    """
    Z = forward_logits(net, ds.X)
    word = np.asarray(target, dtype=np.float64) if cb.kind == MULTILABEL else cb.codeword(target)
    if cb.kind == ONEHOT:
        word = 2.0 * word - 1.0
    return word * np.abs(rng.normal(0.0, Z.std(axis=0)))



def run_one(net, cb, ds, cfg, sample_id, target):
    x0 = ds.X[sample_id]
    original = decode(cb, forward_logits(net, x0))
    if cfg.attack == "jma":
        res = jma_attack(net, cb, target, x0, cfg.attack_config())
    else:
        if cfg.lots_target == "random":
            goal = random_target_logits(net, cb, ds, target, np.random.default_rng([cfg.seed, sample_id]))
        else:
            goal = lots_target_logits(net, cb, ds, target, cfg.lots_samples)
        res = lots_attack(
            net, cb, target, goal, x0,
            n_it_max=cfg.max_iters, step_size=cfg.lots_step, time_budget=cfg.time_budget_s,
        )
    if cb.kind == ONEHOT:
        mse, basr = metrics(res.delta, ds.m, target, res.decision)
    else:
        mse, basr = metrics(res.delta, ds.m, label_bits(cb, target), label_bits(cb, res.decision), label_bits(cb, original))
    row = ReportRow(
        sample_id=sample_id,
        target=format_target(target),
        success=res.success,
        n_it=res.n_it,
        mse=mse,
        basr=basr,
        time_ms=res.wall_time * 1e3,
        failure_reason=res.failure,
    )
    return row, res


def run_batch(net, cb, ds, cfg):
    """Attack the selected samples; rows come back in selection order."""
    if ds.m != net.m or net.n != cb.n:
        raise ConfigMismatch(f"model {net.m}->{net.n}, data width {ds.m}, codebook length {cb.n}")
    rng = np.random.default_rng(cfg.seed)
    ids = select_samples(net, cb, ds, cfg, rng)
    jobs = []
    for i in ids:
        decision = decode(cb, forward_logits(net, ds.X[i]))
        target = select_target(cb, decision, cfg, rng, ds, _truth(ds, i))
        assert not same_decision(target, decision)
        jobs.append((i, target))
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(lambda job: run_one(net, cb, ds, cfg, *job), jobs))
    else:
        out = [run_one(net, cb, ds, cfg, *job) for job in jobs]
    return [row for row, _ in out], [res for _, res in out]


def _mean(values):
    return float(np.mean(values)) if len(values) else None


def summarize(rows):
    """ASR and bASR over all rows; MSE and n_it over successes only (None when nothing succeeded)."""
    wins = [r for r in rows if r.success]
    return {
        "asr": _mean([float(r.success) for r in rows]),
        "basr": _mean([r.basr for r in rows if r.basr is not None]),
        "mse_mean": _mean([r.mse for r in wins]),
        "nit_mean": _mean([r.n_it for r in wins]),
        "time_ms_mean": _mean([r.time_ms for r in rows]),
        "samples": len(rows),
    }


def write_report(rows, path, cfg=None):
    """Write the per-sample CSV and a JSON summary next to it (same stem)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            w.writerow(row.as_csv())
    summary = summarize(rows)
    if cfg is not None:
        summary["attack"] = cfg.attack
        summary["params"] = cfg.params_label()
        summary["config"] = asdict(cfg)
    path.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _opt_float(text):
    return None if text in ("", "None") else float(text)


def read_report(path):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPORT_COLUMNS:
            raise SchemaMismatch(f"{path}: columns {header} != {REPORT_COLUMNS}")
        rows = [
            ReportRow(
                sample_id=int(r[0]),
                target=r[1],
                success=r[2] == "1",
                n_it=int(r[3]),
                mse=float(r[4]),
                basr=_opt_float(r[5]),
                time_ms=float(r[6]),
                failure_reason=r[7] or None,
            )
            for r in reader
        ]
    return rows


def _fmt(value, digits=4):
    return "NA" if value is None else f"{value:.{digits}f}"


def comparison_table(paths):
    """One line per report: attack, parameters, ASR, bASR, MSE, n_it, time. Sorted by attack then parameters."""
    entries = []
    for p in paths:
        p = Path(p)
        summary = summarize(read_report(p))
        meta_path = p.with_suffix(".json")
        attack, params = p.stem, ""
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            attack, params = meta.get("attack", attack), meta.get("params", "")
        entries.append((attack, params, summary))
    entries.sort(key=lambda e: (e[0], e[1]))
    header = ["attack", "params", "asr", "basr", "mse", "n_it", "time_ms"]
    lines = []
    for attack, params, s in entries:
        asr_zero = not s["asr"]
        lines.append([
            attack,
            params,
            _fmt(s["asr"], 3),
            _fmt(s["basr"], 3),
            "NA" if asr_zero else _fmt(s["mse_mean"], 5),
            "NA" if asr_zero else _fmt(s["nit_mean"], 2),
            _fmt(s["time_ms_mean"], 1),
        ])
    return header, lines
