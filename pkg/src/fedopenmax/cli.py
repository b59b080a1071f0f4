"""Command line entry point: ``fedopenmax run | infer | generate``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .classifier import activations_batch
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import generate, load_external, write_delimited
from .exceptions import FedOpenMaxError
from .experiment import run_experiment, write_artifacts
from .openmax import predict_from_activations
from .persistence import load_calibration, load_model

log = logging.getLogger("fedopenmax")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "output_dir", None):
        cfg = replace(cfg, output_dir=Path(args.output_dir))
    return cfg


def _print_table(rows, out):
    out.write(f"{'phase':<12} {'metric':<16} {'value':>8}\n")
    for phase, metric, value in rows:
        out.write(f"{phase:<12} {metric:<16} {value:>8.4f}\n")


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg, workers=args.workers, transport=args.transport)
    paths = write_artifacts(result, cfg.output_dir)
    _print_table(result.summary_rows(), sys.stdout)
    for p in paths:
        log.info("wrote %s", p)
    return 0


def cmd_infer(args) -> int:
    calibration = load_calibration(args.calibration)
    model = load_model(args.model)
    data = load_external(args.data, args.format)
    d, _, k = model.dims
    if calibration.K != k:
        raise FedOpenMaxError(f"{args.calibration}: calibration has K={calibration.K} but the model has K={k}")
    if data.X.shape[1] != d:
        raise FedOpenMaxError(f"{args.data}: samples have {data.X.shape[1]} features, the model expects {d}")
    out = sys.stdout
    for i, v in enumerate(activations_batch(model, data.X)):
        p = predict_from_activations(v, calibration)
        label = "unknown" if p.is_unknown else str(p.label)
        out.write(f"{i}\t{label}\t{float(np.max(p.probabilities)):.6f}\n")
    return 0


def cmd_generate(args) -> int:
    cfg = _load(args)
    data = generate(cfg.dataset)
    out = Path(args.emit)
    out.mkdir(parents=True, exist_ok=True)
    header = [f"seed={cfg.seed}", f"K={cfg.dataset.K} D={cfg.dataset.D}"]
    for i, part in enumerate(data.client_train):
        write_delimited(out / f"client_{i}_train.csv", part, header_lines=header + [f"client={i}"])
    write_delimited(out / "closed_test.csv", data.closed_test, header_lines=header)
    write_delimited(out / "open_test.csv", data.open_test, header_lines=header)
    log.info("wrote %d files to %s", len(data.client_train) + 2, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedopenmax", description="Federated OpenMax open-set recognition")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train, calibrate and evaluate from a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--output-dir")
    run.add_argument("--workers", type=int, help="parallel client workers (default: number of clients)")
    run.add_argument("--transport", choices=("loopback", "socket"), default="loopback")
    run.set_defaults(func=cmd_run)

    infer = sub.add_parser("infer", help="open-set predictions for a data file")
    infer.add_argument("calibration")
    infer.add_argument("model")
    infer.add_argument("data")
    infer.add_argument("--format", choices=("csv", "tsv"), default="csv")
    infer.set_defaults(func=cmd_infer)

    gen = sub.add_parser("generate", help="write the synthetic dataset of a config as text files")
    gen.add_argument("config")
    gen.add_argument("--emit", required=True, metavar="DIR")
    gen.add_argument("--seed", type=int)
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except FedOpenMaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
