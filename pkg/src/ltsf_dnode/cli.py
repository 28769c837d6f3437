"""Command-line entry point: ``ltsf-dnode {eda,decompose,train,evaluate,grid,synth}``.

Every :class:`ExperimentConfig` field can come from a JSON/YAML config file
(``--config``) and be overridden by a flag of the same name, e.g.
``--learning_rate 0.001`` (``--learning-rate`` also works).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import types
import typing
from pathlib import Path

import yaml

from .data import load_csv
from .decomposition import DecompConfig, decompose
from .errors import ForecastError
from .harness import (ExperimentConfig, evaluate_checkpoint, expand_grid, grid_search,
                      prepare_data, regularizer_table, resolve_dataset, run_eda,
                      run_experiment)
from .synth import SynthSpec, synth_generate, to_csv


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _base_type(annotation):
    """Unwrap ``X | None`` and return (scalar type, is_sequence)."""
    hint = annotation
    args = typing.get_args(hint)
    if isinstance(hint, types.UnionType) or typing.get_origin(hint) is typing.Union:
        hint = next(a for a in args if a is not type(None))
        args = typing.get_args(hint)
    if typing.get_origin(hint) is tuple:
        return args[0], True
    return hint, False


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(ExperimentConfig)
    for f in dataclasses.fields(ExperimentConfig):
        scalar, seq = _base_type(hints[f.name])
        conv = _parse_bool if scalar is bool else scalar
        names = [f"--{f.name}"]
        if "_" in f.name:
            names.append(f"--{f.name.replace('_', '-')}")
        parser.add_argument(*names, dest=f.name, type=conv,
                            nargs="+" if seq else None, default=argparse.SUPPRESS)


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(doc, dict):
        raise SystemExit(f"config file {path} must hold a mapping")
    return doc


def config_from_args(args: argparse.Namespace, doc: dict | None = None) -> ExperimentConfig:
    merged = dict(doc if doc is not None else load_config_file(args.config))
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    merged.update({k: v for k, v in vars(args).items() if k in names})
    return ExperimentConfig.from_dict(merged)


def cmd_eda(args) -> int:
    cfg = config_from_args(args)
    data = prepare_data(cfg, load_csv(resolve_dataset(cfg.dataset)))
    report = run_eda(cfg, data.train, data.test)
    print(report.table_row())
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eda.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_decompose(args) -> int:
    panel = load_csv(resolve_dataset(args.dataset))
    stop = args.start + args.length if args.length else panel.n_steps
    window = panel.values[args.start:stop]
    dcmp = decompose(window, DecompConfig(args.kernel_size, args.period,
                                          not args.no_seasonality))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out)
        header = ["date"]
        for part in ("x", "trend", "seasonality", "residual"):
            header += [f"{part}_{n}" for n in panel.feature_names]
        writer.writerow(header)
        stamps = panel.timestamps[args.start:stop]
        for i in range(window.shape[0]):
            writer.writerow([str(stamps[i])] + [repr(float(v)) for v in (
                *window[i], *dcmp.trend[i], *dcmp.seasonality[i], *dcmp.residual[i])])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    report, _ = run_experiment(cfg)
    res = report.test
    print(f"{cfg.dataset_key} H={cfg.H} {cfg.variant}: mse={res.mse:.4f} "
          f"mae={res.mae:.4f} params={report.n_parameters}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = config_from_args(args)
    res = evaluate_checkpoint(cfg, args.checkpoint)
    print(json.dumps(dataclasses.asdict(res), sort_keys=True))
    return 0


def cmd_grid(args) -> int:
    doc = load_config_file(args.config)
    axes = doc.pop("grid", {}) or {}
    base = config_from_args(args, doc)
    if args.regularizers:
        rows = regularizer_table(base, args.regularizers)
        writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
        return 0
    best = grid_search(expand_grid(base, **axes))
    for (dataset, H), report in sorted(best.items()):
        res = report.test
        chosen = {k: report.config[k] for k in axes}
        print(f"{dataset} H={H} val_mse={report.val_mse:.4f} test_mse={res.mse:.4f} "
              f"test_mae={res.mae:.4f} chosen={chosen}")
        if base.output_dir:
            out = Path(base.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"best_{Path(dataset).stem}_{H}.json").write_text(report.to_json())
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(length=args.length, n_features=args.n_features,
                     amplitude=args.amplitude, period=args.period,
                     trend_slope=args.trend_slope, noise=args.noise,
                     shift=args.shift, freq=args.freq)
    to_csv(synth_generate(spec, args.seed), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltsf-dnode")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON or YAML experiment config")
        add_config_flags(p)
        p.set_defaults(func=func)
        return p

    with_config("eda", cmd_eda, "dataset statistics and kernel/period selection")
    with_config("train", cmd_train, "train one model and write report.json")
    p = with_config("evaluate", cmd_evaluate, "score a saved checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p = with_config("grid", cmd_grid, "grid search, selected by validation MSE")
    p.add_argument("--regularizers", type=float, nargs="+",
                   help="emit a lambda_k x lambda_j table over these values instead")

    p = sub.add_parser("decompose", help="dump trend/seasonality/residual as CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kernel_size", "--kernel-size", type=int, default=25)
    p.add_argument("--period", type=int, default=24)
    p.add_argument("--no_seasonality", "--no-seasonality", action="store_true")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("synth", help="write a synthetic panel as CSV")
    p.add_argument("--output", required=True)
    d = SynthSpec()
    p.add_argument("--length", type=int, default=d.length)
    p.add_argument("--n_features", "--n-features", type=int, default=d.n_features)
    p.add_argument("--amplitude", type=float, default=d.amplitude)
    p.add_argument("--period", type=int, default=d.period)
    p.add_argument("--trend_slope", "--trend-slope", type=float, default=d.trend_slope)
    p.add_argument("--noise", type=float, default=d.noise)
    p.add_argument("--shift", type=float, default=d.shift)
    p.add_argument("--freq", default=d.freq)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ForecastError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
