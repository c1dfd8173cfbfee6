"""Command-line pipeline: ingest, pretrain, finetune, train-mlp, corrupt, impute, evaluate, report.

Settings resolve in this order, later winning: built-in defaults, the
``--scale`` preset, the ``--config`` file (flat ``key=value`` lines), then
explicit flags. Every command writes ``run-manifest-<command>.txt`` with
the effective settings into the output directory; passing that file back
as ``--config`` repeats the run.

The output directory is ``--out``, else ``$SWARMIMPUTE_OUT``, else
``./runs``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset, deepnet, evaluate, imputer, modelstore, plots, rbm
from .errors import LabelMismatch, SwarmImputeError
from .firefly import DEFAULT_ALPHA_FINAL_RATIO, FireflyConfig

log = logging.getLogger("swarmimpute")

OUT_ENV = "SWARMIMPUTE_OUT"

DEFAULTS = {
    "layers": "784,1000,500,250,30",
    "batch_count": 600,
    "batch_seed": 0,
    "cd_epochs": 50,
    "cd_learning_rate": 0.1,
    "cd_seed": 0,
    "finetune_epochs": 1000,
    "finetune_learning_rate": 0.01,
    "finetune_momentum": 0.9,
    "finetune_seed": 0,
    "mlp_hidden": 400,
    "mlp_epochs": 1000,
    "mlp_seed": 0,
    "limit": 0,
    "mechanism": "mcar",
    "rate": 0.1,
    "corrupt_seed": 7,
    "samples": 0,
    "fa_iterations": 1000,
    "fa_alpha": 0.25,
    "fa_beta0": 0.2,
    "fa_gamma": 1.0,
    "fa_alpha_final_ratio": DEFAULT_ALPHA_FINAL_RATIO,
    "fa_seed": 0,
    "tolerance": "none",
    "jobs": 1,
    "method": "deep_ae+fa",
}

# desk-sized runs that finish in minutes on one core
PRESETS = {
    "full": {},
    "desk": {
        "layers": "784,200,30",
        "batch_count": 20,
        "cd_epochs": 10,
        "finetune_epochs": 200,
        "finetune_learning_rate": 20.0,
        "mlp_hidden": 200,
        "mlp_epochs": 55,
        "samples": 100,
        "fa_alpha_final_ratio": 0.01,
    },
}

COMMAND_KEYS = {
    "ingest": ["limit"],
    "pretrain": ["layers", "batch_count", "batch_seed", "cd_epochs", "cd_learning_rate", "cd_seed"],
    "finetune": ["batch_count", "batch_seed", "finetune_epochs", "finetune_learning_rate",
                 "finetune_momentum", "finetune_seed"],
    "train-mlp": ["mlp_hidden", "mlp_epochs", "mlp_seed"],
    "corrupt": ["mechanism", "rate", "corrupt_seed", "samples"],
    "impute": ["fa_iterations", "fa_alpha", "fa_beta0", "fa_gamma", "fa_alpha_final_ratio",
               "fa_seed", "tolerance", "jobs", "method"],
    "evaluate": [],
    "report": [],
}


# path-like arguments; a config file may supply them, flags still win
PATH_KEYS = {
    "ingest": {"images": True, "labels": True, "name": False},
    "pretrain": {"train": True},
    "finetune": {"train": True, "rbms": False},
    "train-mlp": {"train": True},
    "corrupt": {"test": True},
    "impute": {"model": True, "masked": True},
    "evaluate": {"values": True, "train": False, "masked": False},
    "report": {"values": True, "timing": False},
}
LIST_KEYS = {("finetune", "rbms"), ("evaluate", "values")}


class BadArguments(SwarmImputeError):
    pass


def read_config(path) -> dict:
    """Flat ``key=value`` file; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise BadArguments(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    settings.update(PRESETS[args.scale])
    config = read_config(args.config) if args.config else {}
    settings.update({k: v for k, v in config.items() if k in DEFAULTS})
    for key, required in PATH_KEYS[command].items():
        if getattr(args, key, None) is None and config.get(key, "None") != "None":
            value = config[key]
            setattr(args, key, value.split(",") if (command, key) in LIST_KEYS else value)
        if required and getattr(args, key, None) is None:
            raise BadArguments(f"{command} needs --{key}")
    for key in COMMAND_KEYS[command]:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    # coerce to the default's type
    for key, default in DEFAULTS.items():
        value = settings[key]
        if isinstance(default, bool):
            settings[key] = str(value).lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            settings[key] = int(value)
        elif isinstance(default, float):
            settings[key] = float(value)
        else:
            settings[key] = str(value)
    return settings


def tolerance_of(settings) -> float | None:
    value = settings["tolerance"]
    return None if value.lower() == "none" else float(value)


def write_manifest(out: Path, command: str, args, settings: dict) -> Path:
    lines = [f"command={command}", f"scale={args.scale}"]
    for name in PATH_KEYS[command]:
        value = getattr(args, name)
        if isinstance(value, list):
            value = ",".join(map(str, value))
        lines.append(f"{name}={value}")
    for key in COMMAND_KEYS[command]:
        lines.append(f"{key}={settings[key]}")
    suffix = f"-{settings['method']}" if command == "impute" else ""
    path = out / f"run-manifest-{command}{suffix}.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def _layers(settings) -> list[int]:
    return [int(s) for s in settings["layers"].split(",")]


def _load_split(prefix):
    prefix = str(prefix)
    data = np.load(prefix + "-images.npy")
    labels = np.load(prefix + "-labels.npy")
    return data, labels


def _batches(settings, data, labels):
    return dataset.make_balanced_minibatches(data, labels, settings["batch_count"], settings["batch_seed"])


def _check_exists(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input {p} does not exist")


# -- commands ---------------------------------------------------------------------

def cmd_ingest(args, settings, out):
    _check_exists(args.images, args.labels)
    raw = dataset.load_idx_images(args.images)
    labels = dataset.load_idx_labels(args.labels)
    if labels.size != raw.count:
        raise LabelMismatch(f"{raw.count} images but {labels.size} labels")
    data = dataset.normalize(raw)
    if settings["limit"]:
        data, labels = data[:settings["limit"]], labels[:settings["limit"]]
    name = args.name or "train"
    np.save(out / f"{name}-images.npy", data)
    np.save(out / f"{name}-labels.npy", labels.astype(np.int64))
    log.info("ingested %d records of width %d as %r", data.shape[0], data.shape[1], name)


def cmd_pretrain(args, settings, out):
    data, labels = _load_split(args.train)
    cfg = rbm.CdConfig(epochs=settings["cd_epochs"], learning_rate=settings["cd_learning_rate"],
                       seed=settings["cd_seed"])
    stack = rbm.train_stack(_batches(settings, data, labels), _layers(settings), cfg)
    for i, layer in enumerate(stack):
        modelstore.save([layer], out / f"rbm-{i}.model",
                        {"layer": i, "cd_epochs": cfg.epochs, "cd_learning_rate": cfg.learning_rate,
                         "seed": cfg.seed + i})
    log.info("pretrained %d RBMs", len(stack))


def _load_rbms(paths):
    stack = []
    for p in paths:
        model, _ = modelstore.load(p)
        stack.extend(model)
    return stack


def cmd_finetune(args, settings, out):
    rbm_paths = args.rbms or sorted(out.glob("rbm-*.model"), key=lambda p: int(p.stem.split("-")[1]))
    if not rbm_paths:
        raise BadArguments("no RBM model files given or found in the output directory")
    _check_exists(*rbm_paths)
    data, labels = _load_split(args.train)
    cfg = deepnet.FineTuneConfig(epochs=settings["finetune_epochs"],
                                 learning_rate=settings["finetune_learning_rate"],
                                 momentum=settings["finetune_momentum"], seed=settings["finetune_seed"])
    losses = []
    net = deepnet.fine_tune(deepnet.unroll(_load_rbms(rbm_paths)), _batches(settings, data, labels), cfg,
                            callback=lambda epoch, loss: losses.append(loss))
    modelstore.save(net, out / "deep_ae.model",
                    {"epochs": cfg.epochs, "learning_rate": cfg.learning_rate, "momentum": cfg.momentum,
                     "seed": cfg.seed, "final_loss": repr(losses[-1]) if losses else "nan"})
    log.info("fine-tuned deep autoencoder, final training loss %s", losses[-1] if losses else "n/a")


def cmd_train_mlp(args, settings, out):
    data, _ = _load_split(args.train)
    net = deepnet.build_mlp_ae(data.shape[1], settings["mlp_hidden"], settings["mlp_seed"])
    net = deepnet.train_conjugate_gradient(net, data, settings["mlp_epochs"])
    modelstore.save(net, out / "mlp_ae.model",
                    {"epochs": settings["mlp_epochs"], "seed": settings["mlp_seed"],
                     "final_loss": repr(deepnet.mse_loss(net, data))})
    log.info("trained MLP autoencoder")


def cmd_corrupt(args, settings, out):
    data, _ = _load_split(args.test)
    if settings["samples"]:
        data = data[:settings["samples"]]
    masked = dataset.inject(data, settings["mechanism"].upper(), settings["rate"], settings["corrupt_seed"])
    dataset.save_masked(masked, out / "masked")
    log.info("masked %d of %d entries", int(masked.mask.sum()), masked.mask.size)


def cmd_impute(args, settings, out):
    _check_exists(args.model, args.masked)
    net, _ = modelstore.load(args.model)
    masked = dataset.load_masked(args.masked)
    cfg = FireflyConfig(iterations=settings["fa_iterations"], alpha=settings["fa_alpha"],
                        beta0=settings["fa_beta0"], gamma=settings["fa_gamma"],
                        alpha_final_ratio=settings["fa_alpha_final_ratio"], seed=settings["fa_seed"],
                        tolerance=tolerance_of(settings))
    method = settings["method"]
    report = imputer.impute_dataset(net, masked, cfg, jobs=settings["jobs"], method=method)
    evaluate.write_values_csv(report, out / f"{method}-values.csv")
    evaluate.write_timing_csv(report, out / f"{method}-timing.csv")
    evaluate.write_objectives_csv(report, out / f"{method}-objectives.csv")
    summary = evaluate.aggregate(report)
    log.info("%s: mean squared error %.6f over %d values", method, summary.mean_squared_error, summary.rows)


def cmd_evaluate(args, settings, out):
    reports = []
    for path in args.values:
        _check_exists(path)
        report = evaluate.read_values_csv(path, _method_of(path))
        timing = Path(str(path).replace("-values.csv", "-timing.csv"))
        if timing != Path(path) and timing.exists():
            report.per_sample_times = evaluate.read_timing_csv(timing)
        reports.append(report)
    if args.train and args.masked:
        train, _ = _load_split(args.train)
        baseline = evaluate.mean_imputation_baseline(train, dataset.load_masked(args.masked))
        evaluate.write_values_csv(baseline, out / "mean-values.csv")
        reports.append(baseline)
    comparison = evaluate.compare(reports)
    evaluate.write_comparison_csv(comparison, out / "comparison.csv")
    for s in comparison.summaries:
        print(f"{s.method}\trows={s.rows}\tmean_epsilon={s.mean_epsilon:.6f}\t"
              f"mean_squared_error={s.mean_squared_error:.6f}\tmean_seconds={s.mean_seconds:.4f}")


def cmd_report(args, settings, out):
    _check_exists(args.values)
    method = _method_of(args.values)
    report = evaluate.read_values_csv(args.values, method)
    timing = args.timing or str(args.values).replace("-values.csv", "-timing.csv")
    if Path(timing).exists():
        report.per_sample_times = evaluate.read_timing_csv(timing)
    for path in plots.emit_plots(report, out, method):
        log.info("wrote %s", path)


def _method_of(path) -> str:
    name = Path(path).name
    return name[:-len("-values.csv")] if name.endswith("-values.csv") else Path(path).stem


COMMANDS = {
    "ingest": cmd_ingest,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "train-mlp": cmd_train_mlp,
    "corrupt": cmd_corrupt,
    "impute": cmd_impute,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    common.add_argument("--config", help="flat key=value settings file (a run manifest works)")
    common.add_argument("--scale", choices=sorted(PRESETS), default="full")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="swarmimpute", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="IDX files -> normalized arrays")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--name")
    p.add_argument("--limit", type=int)

    p = sub.add_parser("pretrain", parents=[common], help="greedy CD pretraining, one model file per RBM")
    p.add_argument("--train", help="prefix written by ingest, e.g. runs/train")
    p.add_argument("--layers")
    p.add_argument("--batch-count", dest="batch_count", type=int)
    p.add_argument("--batch-seed", dest="batch_seed", type=int)
    p.add_argument("--cd-epochs", dest="cd_epochs", type=int)
    p.add_argument("--cd-learning-rate", dest="cd_learning_rate", type=float)
    p.add_argument("--cd-seed", dest="cd_seed", type=int)

    p = sub.add_parser("finetune", parents=[common], help="unroll the RBMs and fine-tune by backprop")
    p.add_argument("--train")
    p.add_argument("--rbms", nargs="+", help="RBM model files, bottom first (default: rbm-*.model in --out)")
    p.add_argument("--batch-count", dest="batch_count", type=int)
    p.add_argument("--batch-seed", dest="batch_seed", type=int)
    p.add_argument("--epochs", dest="finetune_epochs", type=int)
    p.add_argument("--learning-rate", dest="finetune_learning_rate", type=float)
    p.add_argument("--momentum", dest="finetune_momentum", type=float)
    p.add_argument("--seed", dest="finetune_seed", type=int)

    p = sub.add_parser("train-mlp", parents=[common], help="single-hidden-layer autoencoder baseline")
    p.add_argument("--train")
    p.add_argument("--hidden", dest="mlp_hidden", type=int)
    p.add_argument("--epochs", dest="mlp_epochs", type=int)
    p.add_argument("--seed", dest="mlp_seed", type=int)

    p = sub.add_parser("corrupt", parents=[common], help="inject MCAR/MAR missingness")
    p.add_argument("--test")
    p.add_argument("--mechanism", choices=["mcar", "mar", "MCAR", "MAR"])
    p.add_argument("--rate", type=float)
    p.add_argument("--seed", dest="corrupt_seed", type=int)
    p.add_argument("--samples", type=int, help="use the first N records (0 = all)")

    p = sub.add_parser("impute", parents=[common], help="firefly search over each record's missing entries")
    p.add_argument("--model")
    p.add_argument("--masked", help="directory written by corrupt")
    p.add_argument("--method")
    p.add_argument("--iterations", dest="fa_iterations", type=int)
    p.add_argument("--alpha", dest="fa_alpha", type=float)
    p.add_argument("--beta0", dest="fa_beta0", type=float)
    p.add_argument("--gamma", dest="fa_gamma", type=float)
    p.add_argument("--alpha-final-ratio", dest="fa_alpha_final_ratio", type=float)
    p.add_argument("--seed", dest="fa_seed", type=int)
    p.add_argument("--tolerance", help="stop once the objective is at or below this (or 'none')")
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("evaluate", parents=[common], help="compare value reports, optionally with mean imputation")
    p.add_argument("--values", nargs="+")
    p.add_argument("--train", help="ingest prefix used for the mean-imputation baseline")
    p.add_argument("--masked")

    p = sub.add_parser("report", parents=[common], help="SVG scatter and timing charts")
    p.add_argument("--values")
    p.add_argument("--timing")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = Path(args.out or os.environ.get(OUT_ENV) or "runs")
    try:
        settings = resolve(args.command, args)
        out.mkdir(parents=True, exist_ok=True)
        log.info("settings: %s", {k: settings[k] for k in COMMAND_KEYS[args.command]})
        write_manifest(out, args.command, args, settings)
        COMMANDS[args.command](args, settings, out)
    except BadArguments as exc:
        parser.print_usage(sys.stderr)
        print(f"error: BadArguments: {exc}", file=sys.stderr)
        return 2
    except (SwarmImputeError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
