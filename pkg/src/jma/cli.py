"""Command line: ``jma gen-data | train | attack | report``.

Exit codes: 0 success, 1 usage error, 2 data/model mismatch, 3 I/O error.
"""

import csv
import json
import sys
from pathlib import Path

import click

from .encoding import KINDS, MULTILABEL, ONEHOT, load_codebook
from .errors import ConfigMismatch, SchemaMismatch
from .experiment import ExperimentConfig, comparison_table, run_batch, write_report
from .model import (
    default_codebook,
    load_dataset,
    load_net,
    make_net,
    make_synthetic,
    save_dataset,
    save_net,
    train,
)

EXIT_USAGE, EXIT_MISMATCH, EXIT_IO = 1, 2, 3
MIN_ACCURACY = 0.8


def _options(func):
    opts = [
        click.option("--config", "config_path", type=click.Path(), help="JSON config; flags override it."),
        click.option("--seed", type=int),
        click.option("--encoding", type=click.Choice(KINDS)),
        click.option("--m", type=int, help="Input dimension."),
        click.option("--n", type=int, help="Output (logit) dimension."),
        click.option("--l", type=int, help="Number of classes."),
        click.option("--out", type=click.Path(), help="Output path."),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _load_config(config_path, **flags):
    data = {}
    if config_path:
        data = json.loads(Path(config_path).read_text())
    data.update({k: v for k, v in flags.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc))


def _require_out(cfg):
    if not cfg.out:
        raise click.UsageError("--out is required")
    return cfg.out


@click.group()
def cli():
    """Minimum-norm targeted attacks on small dense classifiers."""


@cli.command("gen-data")
@_options
@click.option("--samples-per-class", type=int)
def gen_data(config_path, samples_per_class, **flags):
    """Write a seeded synthetic dataset as CSV."""
    cfg = _load_config(config_path, samples_per_class=samples_per_class, **flags)
    out = _require_out(cfg)
    l = 2**cfg.n if cfg.encoding == MULTILABEL else cfg.l
    ds = make_synthetic(cfg.seed, cfg.m, cfg.n, l, cfg.encoding, cfg.samples_per_class)
    save_dataset(ds, out)
    click.echo(f"wrote {len(ds)} samples to {out}")


def _codebook(encoding, n, l, codebook_path=None):
    if codebook_path:
        return load_codebook(codebook_path)
    if encoding == ONEHOT:
        n = l
    return default_codebook(encoding, n, l)


@cli.command("train")
@_options
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--codebook", "codebook_path", type=click.Path())
@click.option("--epochs", type=int)
@click.option("--lr", type=float)
@click.option("--hidden", type=str, help="Comma-separated hidden widths, e.g. 32,32.")
@click.option("--activation", type=click.Choice(["tanh", "relu_smooth"]))
def train_cmd(config_path, data_path, codebook_path, hidden, **flags):
    """Train a dense net on a dataset and save it with its clean accuracy."""
    if hidden is not None:
        flags["hidden"] = tuple(int(h) for h in hidden.split(",") if h)
    cfg = _load_config(config_path, **flags)
    out = _require_out(cfg)
    ds = load_dataset(data_path, cfg.encoding)
    if ds.kind == MULTILABEL:
        n, l = ds.y.shape[1], 2 ** ds.y.shape[1]
    else:
        l = max(cfg.l, int(ds.y.max()) + 1)
        n = l if cfg.encoding == ONEHOT else cfg.n
    cb = _codebook(ds.kind if ds.kind == MULTILABEL else cfg.encoding, n, l, codebook_path)
    if ds.kind != MULTILABEL and int(ds.y.max()) >= cb.l:
        raise ConfigMismatch(f"dataset has labels up to {int(ds.y.max())} but codebook has {cb.l} classes")
    net = make_net([ds.m, *cfg.hidden, cb.n], cfg.activation, cfg.seed)
    net = train(net, ds, cb, cfg.epochs, cfg.lr)
    net.meta["classes"] = cb.l
    save_net(net, out)
    acc = net.meta["accuracy"]
    click.echo(f"clean accuracy {acc:.4f}")
    if acc < MIN_ACCURACY:
        click.echo(f"warning: accuracy below {MIN_ACCURACY}; attack will refuse this model", err=True)


@cli.command("attack")
@_options
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--codebook", "codebook_path", type=click.Path())
@click.option("--attack", type=click.Choice(["jma", "lots"]))
@click.option("--epsilon", type=float)
@click.option("--max-iters", type=int)
@click.option("--bs-steps", type=int)
@click.option("--flip-bits", type=int)
@click.option("--flip-relative", type=click.Choice(["prediction", "truth"]))
@click.option("--target-mode", type=click.Choice(["random-class", "random-bit-flip", "from-dataset"]))
@click.option("--samples", type=int)
@click.option("--time-budget-s", type=float)
@click.option("--workers", type=int)
@click.option("--lots-step", type=float, help="LOTS per-update step (default 1/255).")
@click.option("--lots-target", type=click.Choice(["class-mean", "random"]), help="How LOTS builds target logits.")
def attack_cmd(config_path, model_path, data_path, codebook_path, **flags):
    """Attack selected samples; write the report CSV and a JSON summary."""
    net = load_net(model_path)
    encoding = flags["encoding"] or net.meta.get("encoding")
    if encoding is None:
        raise click.UsageError("--encoding is required for models without encoding metadata")
    flags["encoding"] = encoding
    flags.setdefault("n", None)
    if flags["n"] is None:
        flags["n"] = net.n
    cfg = _load_config(config_path, **flags)
    out = _require_out(cfg)
    acc = net.meta.get("accuracy")
    if acc is None or acc < MIN_ACCURACY:
        raise ConfigMismatch(f"model accuracy {acc} below {MIN_ACCURACY}; refusing to attack")
    ds = load_dataset(data_path, encoding)
    l = int(net.meta.get("classes", cfg.l))
    cb = _codebook(encoding, net.n, l, codebook_path)
    rows, _ = run_batch(net, cb, ds, cfg)
    summary = write_report(rows, out, cfg)
    click.echo(json.dumps({k: summary[k] for k in ("asr", "basr", "mse_mean", "nit_mean", "time_ms_mean")}))


@cli.command("report")
@click.argument("reports", nargs=-1, required=True, type=click.Path())
@click.option("--out", type=click.Path(), help="Also write the table as CSV.")
def report_cmd(reports, out):
    """Aggregate report CSVs into one comparison table."""
    header, lines = comparison_table(reports)
    widths = [max(len(str(r[i])) for r in [header, *lines]) for i in range(len(header))]
    for row in [header, *lines]:
        click.echo("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerows([header, *lines])


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="jma", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show()
        return EXIT_USAGE
    except (ConfigMismatch, SchemaMismatch) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_MISMATCH
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
