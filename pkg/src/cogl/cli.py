"""Command-line entry point: train, eval, gradcheck, sweep, export-embeddings.

Runs are described by an INI config file with [data], [train] and [output]
sections; command-line flags override file values, which override defaults.
The COGL_OUTPUT_DIR environment variable overrides the configured output
directory (flags still win).  Exit codes: 0 success, 1 config/data error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError, GraphLoadError, NumericalError
from .gradcheck import TOLERANCE, run_gradient_checks
from .graph_io import Graph, load_graph, normalize_adjacency, subsample_nodes
from .topo_gcn import topology_forward
from .trainer import (ModelParams, TrainConfig, evaluate, load_checkpoint,
                      save_checkpoint, train)

MODES = ("cogl", "gcn-baseline")

_DATA_KEYS = ("edges", "features", "labels", "splits", "subsample", "subsample_seed")
_TRAIN_EXTRA_KEYS = ("mode",)


@dataclass
class RunConfig:
    edges: str = ""
    features: str = ""
    labels: str = ""
    splits: str = ""
    subsample: int = 0
    subsample_seed: int = 0
    mode: str = "cogl"
    out_dir: str = "runs/out"
    train: TrainConfig = field(default_factory=TrainConfig)

    def effective_train(self) -> TrainConfig:
        """The TrainConfig actually used; baseline mode forces alpha=beta=0."""
        if self.mode == "gcn-baseline":
            return replace(self.train, alpha=0.0, beta=0.0)
        return self.train

    def resolved(self) -> dict:
        """Every setting materialized, enough to reproduce the run."""
        return {
            "data": {
                "edges": self.edges, "features": self.features,
                "labels": self.labels, "splits": self.splits,
                "subsample": self.subsample, "subsample_seed": self.subsample_seed,
            },
            "mode": self.mode,
            "train": self.effective_train().to_dict(),
            "output": {"dir": self.out_dir},
        }


def _cast(raw: str, target_type, key: str):
    try:
        if target_type is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} "
                          f"as {target_type.__name__}") from None


def load_run_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse the INI config, apply dotted-key overrides, validate."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    raw: dict[str, str] = {}
    for section in parser.sections():
        if section not in ("data", "train", "output"):
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            raw[f"{section}.{key}"] = value
    env_dir = os.environ.get("COGL_OUTPUT_DIR")
    if env_dir:
        raw["output.dir"] = env_dir
    for key, value in (overrides or {}).items():
        raw[key] = value

    cfg = RunConfig()
    train_types = {f.name: f.type for f in fields(TrainConfig)}
    train_kwargs = {}
    for key, value in raw.items():
        section, _, name = key.partition(".")
        if section == "data" and name in _DATA_KEYS:
            current = getattr(cfg, name)
            setattr(cfg, name, _cast(value, type(current) if name not in
                    ("edges", "features", "labels", "splits") else str, key))
        elif section == "output" and name == "dir":
            cfg.out_dir = value
        elif section == "train" and name == "mode":
            cfg.mode = value.strip()
        elif section == "train" and name in train_types:
            current = getattr(TrainConfig(), name)
            train_kwargs[name] = _cast(value, type(current), key)
        else:
            raise ConfigError(f"{path}: unknown config key {key!r}")
    cfg.train = TrainConfig(**train_kwargs)

    for name in ("edges", "features", "labels", "splits"):
        if not getattr(cfg, name):
            raise ConfigError(f"{path}: missing data.{name}")
    if cfg.mode not in MODES:
        raise ConfigError(f"{path}: mode must be one of {MODES}, got {cfg.mode!r}")
    cfg.effective_train().validate()
    return cfg


def _load_dataset(cfg: RunConfig) -> Graph:
    graph = load_graph(cfg.edges, cfg.features, cfg.labels, cfg.splits)
    if cfg.subsample:
        graph = subsample_nodes(graph, cfg.subsample, cfg.subsample_seed)
    return graph


def _overrides_from(args) -> dict[str, str]:
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        overrides[key] = value
    for flag, key in (("seed", "train.seed"), ("alpha", "train.alpha"),
                      ("beta", "train.beta"), ("epochs", "train.epochs"),
                      ("mode", "train.mode"), ("out", "output.dir")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return overrides


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, _overrides_from(args))
    graph = _load_dataset(cfg)
    params, report = train(graph, cfg.effective_train(), verbose=args.verbose)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    summary = {"config": cfg.resolved(), **report.summary()}
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_checkpoint(out / "checkpoint.npz", params, meta=cfg.resolved())
    print(f"test_accuracy {report.test_accuracy:.4f}")
    return 0


def cmd_eval(args) -> int:
    params, meta = load_checkpoint(args.checkpoint)
    cfg = _run_config_from_meta(meta)
    graph = _load_dataset(cfg)
    mask = {"train": graph.train_mask, "val": graph.val_mask,
            "test": graph.test_mask}[args.split]
    acc = evaluate(graph, params, mask)
    print(f"{args.split}_accuracy {acc:.4f}")
    return 0


def _run_config_from_meta(meta: dict) -> RunConfig:
    try:
        data = meta["data"]
        return RunConfig(
            edges=data["edges"], features=data["features"], labels=data["labels"],
            splits=data["splits"], subsample=data["subsample"],
            subsample_seed=data["subsample_seed"], mode=meta["mode"],
            train=TrainConfig(**meta["train"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"checkpoint metadata is incomplete: {exc}") from None


def cmd_gradcheck(args) -> int:
    results = run_gradient_checks(args.seed)
    all_ok = True
    for name in ("L_cont", "L_gcn", "d_loss", "g_loss"):
        err = results[name]
        ok = err < TOLERANCE
        all_ok &= ok
        print(f"{name} max_rel_err={err:.3e} {'PASS' if ok else 'FAIL'}")
    return 0 if all_ok else 2


def _parse_grid(text: str, flag: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} must list at least one value")
    return values


def cmd_sweep(args) -> int:
    cfg = load_run_config(args.config, _overrides_from(args))
    alphas = _parse_grid(args.alphas, "--alphas")
    betas = _parse_grid(args.betas, "--betas")
    graph = _load_dataset(cfg)
    pairs = [(a, b) for a in alphas for b in betas]

    def one(pair):
        a, b = pair
        try:
            _, report = train(graph, replace(cfg.effective_train(), alpha=a, beta=b))
            return a, b, f"{report.test_accuracy:.17g}", "ok"
        except NumericalError as exc:
            print(f"alpha={a} beta={b}: numerical failure: {exc}", file=sys.stderr)
            return a, b, "", "numerical-error"
        except (ConfigError, GraphLoadError) as exc:
            print(f"alpha={a} beta={b}: {exc}", file=sys.stderr)
            return a, b, "", "config-error"

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(one, pairs))
    else:
        rows = [one(pair) for pair in pairs]

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("alpha,beta,test_accuracy,status\n")
        for a, b, acc, status in rows:
            fh.write(f"{a:.17g},{b:.17g},{acc},{status}\n")
    statuses = {status for *_ignored, status in rows}
    if statuses == {"ok"}:
        return 0
    return 2 if "numerical-error" in statuses else 1


def cmd_export_embeddings(args) -> int:
    params, meta = load_checkpoint(args.checkpoint)
    cfg = _run_config_from_meta(meta)
    graph = _load_dataset(cfg)
    logits = topology_forward(normalize_adjacency(graph), nm.constant(graph.features),
                              params.conv, training=False)
    labeled = graph.labels.sum(axis=1) > 0
    classes = np.where(labeled, np.argmax(graph.labels, axis=1), -1)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"emb_{i}" for i in range(logits.cols)) + ",label\n")
        for row, cls in zip(logits.value, classes):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{cls}\n")
    print(f"wrote {graph.n_nodes} embeddings to {out_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for numerical failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _add_run_flags(sub):
    sub.add_argument("--config", required=True, help="INI run config")
    sub.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override any config value (repeatable)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--mode", choices=MODES)
    sub.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cogl", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("train", help="train a model from a config file")
    _add_run_flags(sub)
    sub.add_argument("--verbose", action="store_true")
    sub.set_defaults(func=cmd_train)

    sub = commands.add_parser("eval", help="evaluate a checkpoint on a split")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--split", choices=("train", "val", "test"), default="test")
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("gradcheck", help="finite-difference gradient suite")
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=cmd_gradcheck)

    sub = commands.add_parser("sweep", help="grid of alpha/beta training runs")
    _add_run_flags(sub)
    sub.add_argument("--alphas", required=True, help="comma-separated values")
    sub.add_argument("--betas", required=True, help="comma-separated values")
    sub.add_argument("--workers", type=int, default=1)
    sub.set_defaults(func=cmd_sweep)

    sub = commands.add_parser("export-embeddings",
                              help="write the topology embeddings as CSV")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GraphLoadError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
