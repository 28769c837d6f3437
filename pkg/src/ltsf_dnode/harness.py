"""Experiment runner: configuration, pipeline assembly, training, reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import eda as eda_mod
from .data import Panel, SplitSpec, load_csv, split, window_arrays, zscore_fit_transform
from .decomposition import DecompConfig
from .errors import ConfigError, DecompError
from .metrics import EvalResult, evaluate, naive_last_value_baseline
from .node import (ModelParams, SolverConfig, checkpoint_dict, count_parameters,
                   model_from_dict)
from .pipeline import VARIANTS, PipelineSpec, init_model, make_spec, predict
from .training import TrainConfig, TrainReport, train

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "LTSF_DATA_ROOT"

# Per-dataset defaults: selected kernel/period, whether seasonality is
# extracted and whether instance normalization is used.
DATASET_PRESETS = {
    "electricity": dict(kernel_size=25, period=24, use_seasonality=True, use_instance_norm=False),
    "exchange_rate": dict(kernel_size=10, period=7, use_seasonality=False, use_instance_norm=False),
    "weather": dict(kernel_size=10, period=6, use_seasonality=False, use_instance_norm=False),
    "national_illness": dict(kernel_size=25, period=52, use_seasonality=False, use_instance_norm=True),
    "etth1": dict(kernel_size=10, period=48, use_seasonality=True, use_instance_norm=True),
    "etth2": dict(kernel_size=25, period=24, use_seasonality=True, use_instance_norm=True),
    "ettm1": dict(kernel_size=50, period=7, use_seasonality=True, use_instance_norm=False),
    "ettm2": dict(kernel_size=25, period=7, use_seasonality=True, use_instance_norm=True),
}
_ALIASES = {"exchange": "exchange_rate", "ili": "national_illness", "ecl": "electricity"}

# Candidate periods per sampling interval (seconds).
_PERIODS_BY_STEP = {
    600: (6, 36, 72, 144),
    900: (4, 7, 24, 48, 96),
    3600: (12, 24, 48),
    86400: (5, 7, 30),
    604800: (4, 13, 26, 52),
}

EDA_FIELDS = ("kernel_size", "period", "use_seasonality", "use_instance_norm")


@dataclass
class ExperimentConfig:
    dataset: str = ""
    L: int | None = None
    H: int = 96
    variant: str = "ltsf_dnode"
    # decomposition / normalization overrides; None = preset or EDA
    kernel_size: int | None = None
    period: int | None = None
    use_seasonality: bool | None = None
    use_instance_norm: bool | None = None
    auto_eda: bool = False
    kernels: tuple[int, ...] = (10, 25, 50)
    periods: tuple[int, ...] | None = None
    seasonality_threshold: float = 0.5
    shift_threshold: float = 0.5
    # data protocol
    split: tuple[float, float, float] | None = None
    overlap_context: bool = True
    # model
    norm_axis: str = "feature"
    individual: bool = False
    solver: str = "rk4"
    n_steps: int = 2
    # training
    learning_rate: float = 0.005
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    lambda_k: float = 0.0
    lambda_j: float = 0.0
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        for name in ("kernels", "periods", "split"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                setattr(self, name, tuple(value))

    @property
    def dataset_key(self) -> str:
        stem = Path(self.dataset).stem.lower()
        return _ALIASES.get(stem, stem)

    def resolved_L(self) -> int:
        if self.L is not None:
            return self.L
        return 104 if self.dataset_key == "national_illness" else 336

    def split_spec(self) -> SplitSpec:
        if self.split is not None:
            return SplitSpec(*self.split)
        if self.dataset_key.startswith("ett"):
            return SplitSpec(0.6, 0.2, 0.2)
        return SplitSpec(0.7, 0.1, 0.2)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.max_epochs,
                           self.patience, self.lambda_k, self.lambda_j,
                           SolverConfig(self.solver, self.n_steps), self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunReport:
    config: dict
    pipeline: dict
    eda: dict | None
    results: dict[str, dict]
    baselines: dict[str, dict]
    n_parameters: int
    val_mse: float
    train: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    @property
    def test(self) -> EvalResult:
        (res,) = self.results.values()
        return EvalResult(**res)


def resolve_dataset(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        for candidate in (Path(root) / name, Path(root) / f"{name}.csv"):
            if candidate.exists():
                return candidate
    raise FileNotFoundError(
        f"dataset {name!r} not found (set {DATA_ROOT_ENV} to its directory)")


def default_periods(panel: Panel, L: int) -> tuple[int, ...]:
    step = int((panel.timestamps[1] - panel.timestamps[0]) / np.timedelta64(1, "s"))
    periods = _PERIODS_BY_STEP.get(step, (7, 12, 24))
    return tuple(p for p in periods if p < L) or (2,)


def run_eda(config: ExperimentConfig, train_panel: Panel, test_panel: Panel
            ) -> eda_mod.EdaReport:
    L = config.resolved_L()
    periods = config.periods or default_periods(train_panel, L)
    kernels = tuple(k for k in config.kernels if k < L)
    grid = eda_mod.CandidateGrid(kernels, periods, L)
    return eda_mod.select_parameters(
        train_panel, grid, test=test_panel,
        seasonality_threshold=config.seasonality_threshold,
        shift_threshold=config.shift_threshold)


def _needs_eda(config: ExperimentConfig) -> bool:
    if config.variant in ("linear", "nlinear", "linear_tr", "linear_tsr"):
        return False
    if all(getattr(config, f) is not None for f in EDA_FIELDS):
        return False
    return config.auto_eda or config.dataset_key not in DATASET_PRESETS


def _check_overrides(config: ExperimentConfig) -> None:
    v = config.variant
    given = {f for f in EDA_FIELDS if getattr(config, f) is not None}
    if v in ("linear", "nlinear") and given:
        raise ConfigError(f"variant {v} takes no decomposition/normalization overrides: {sorted(given)}")
    if v == "no_dcmp" and given & {"kernel_size", "period", "use_seasonality"}:
        raise ConfigError("variant no_dcmp forbids decomposition overrides")
    if v == "no_norm" and config.use_instance_norm:
        raise ConfigError("variant no_norm cannot enable instance normalization")
    if v in ("linear_tr", "linear_tsr") and config.use_instance_norm:
        raise ConfigError(f"variant {v} has no normalization block")
    if v == "linear_tr" and config.use_seasonality:
        raise ConfigError("variant linear_tr decomposes into trend/residual only")
    if v == "linear_tsr" and config.use_seasonality is False:
        raise ConfigError("variant linear_tsr always extracts seasonality")


def resolve_flags(config: ExperimentConfig, eda: eda_mod.EdaReport | None) -> dict:
    """Decomposition/normalization flags: override > dataset preset > EDA."""
    preset = DATASET_PRESETS.get(config.dataset_key, {}) if not config.auto_eda else {}
    flags = {}
    for name in EDA_FIELDS:
        value = getattr(config, name)
        if value is None:
            value = preset.get(name)
        if value is None and eda is not None:
            value = getattr(eda, name)
        flags[name] = value
    defaults = dict(kernel_size=25, period=24, use_seasonality=True, use_instance_norm=False)
    return {k: defaults[k] if v is None else v for k, v in flags.items()}


def build_pipeline(config: ExperimentConfig, eda: eda_mod.EdaReport | None
                   ) -> PipelineSpec:
    """Block layout for ``config``: DCMP, NORM/DENORM, NODE or plain linear maps."""
    _check_overrides(config)
    flags = resolve_flags(config, eda)
    try:
        return make_spec(config.variant, config.resolved_L(), config.H,
                         solver=SolverConfig(config.solver, config.n_steps),
                         norm_axis=config.norm_axis,
                         individual=config.individual, **flags)
    except (ValueError, DecompError) as exc:
        raise ConfigError(str(exc)) from exc


def spec_to_dict(spec: PipelineSpec) -> dict:
    d = asdict(spec)
    d["blocks"] = spec.blocks
    d["components"] = list(spec.components)
    return d


def spec_from_dict(d: dict) -> PipelineSpec:
    d = {k: v for k, v in d.items() if k not in ("blocks", "components")}
    d["decomp"] = DecompConfig(**d["decomp"]) if d.get("decomp") else None
    d["solver"] = SolverConfig(**d["solver"])
    return PipelineSpec(**d)


@dataclass
class PreparedData:
    train: Panel
    val: Panel
    test: Panel
    mean: np.ndarray
    std: np.ndarray
    xy: dict = field(default_factory=dict)


def prepare_data(config: ExperimentConfig, panel: Panel) -> PreparedData:
    """Split, z-score with train statistics, and cut stride-1 windows.

    With ``overlap_context`` the val/test windows may look back into the
    preceding split, so the first forecast starts at the split boundary.
    """
    L, H = config.resolved_L(), config.H
    train_p, val_p, test_p = split(panel, config.split_spec(),
                                   None if config.overlap_context else L,
                                   None if config.overlap_context else H)
    (train_p, val_p, test_p), mean, std = zscore_fit_transform(train_p, [val_p, test_p])
    out = PreparedData(train_p, val_p, test_p, mean, std)
    ctx = L if config.overlap_context else 0
    sources = {
        "train": train_p,
        "val": Panel.concat([train_p.slice(train_p.n_steps - ctx, train_p.n_steps), val_p]),
        "test": Panel.concat([val_p.slice(val_p.n_steps - ctx, val_p.n_steps), test_p]),
    }
    for name, p in sources.items():
        out.xy[name] = window_arrays(p.values, L, H)
    return out


def run_experiment(config: ExperimentConfig, panel: Panel | None = None,
                   write: bool = True) -> tuple[RunReport, ModelParams]:
    """EDA (unless overridden), split, train, evaluate on test windows."""
    if panel is None:
        panel = load_csv(resolve_dataset(config.dataset))
    data = prepare_data(config, panel)
    eda = run_eda(config, data.train, data.test) if _needs_eda(config) else None
    spec = build_pipeline(config, eda)
    rng = np.random.default_rng(config.seed)
    model = init_model(spec, panel.n_features, rng)
    tcfg = config.train_config()
    best, treport = train(spec, data.xy["train"], data.xy["val"], model, tcfg)
    x_te, y_te = data.xy["test"]
    result = evaluate(predict(spec, best, x_te), y_te)
    treport.test_mse, treport.test_mae = result.mse, result.mae
    naive = evaluate(naive_last_value_baseline(x_te, config.H), y_te)
    report = RunReport(
        config=_plain(config.to_dict()),
        pipeline=_plain(spec_to_dict(spec)),
        eda=_plain(eda.to_dict()) if eda is not None else None,
        results={str(config.H): asdict(result)},
        baselines={"naive_last_value": asdict(naive)},
        n_parameters=count_parameters(best),
        val_mse=treport.best_val_mse,
        train=treport.to_dict(include_timing=False),
    )
    if write and config.output_dir:
        write_outputs(Path(config.output_dir), report, treport, best, spec)
    log.info("%s H=%d %s: test mse %.4f mae %.4f", config.dataset_key, config.H,
             config.variant, result.mse, result.mae)
    return report, best


def _plain(d: dict) -> dict:
    """JSON-native copy (tuples become lists) so reports round-trip exactly."""
    return json.loads(json.dumps(d))


def write_outputs(out: Path, report: RunReport, treport: TrainReport,
                  model: ModelParams, spec: PipelineSpec) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "timing.json").write_text(
        json.dumps({"wall_clock_seconds": treport.wall_clock_seconds}))
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "horizon", "mse", "mae", "mape_paper", "n_windows"])
        for h, res in report.results.items():
            w.writerow([spec.variant, h, res["mse"], res["mae"], res["mape_paper"], res["n_windows"]])
        for name, res in report.baselines.items():
            w.writerow([name, spec.H, res["mse"], res["mae"], res["mape_paper"], res["n_windows"]])
    with open(out / "losses.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_mse"])
        for i, (tl, vl) in enumerate(zip(treport.train_losses, treport.val_losses)):
            w.writerow([i, tl, vl])
    doc = checkpoint_dict(model)
    doc["pipeline"] = spec_to_dict(spec)
    (out / "model.json").write_text(json.dumps(doc))


def load_model(path: str | Path) -> tuple[ModelParams, PipelineSpec]:
    doc = json.loads(Path(path).read_text())
    return model_from_dict(doc), spec_from_dict(doc["pipeline"])


def evaluate_checkpoint(config: ExperimentConfig, checkpoint: str | Path,
                        panel: Panel | None = None) -> EvalResult:
    model, spec = load_model(checkpoint)
    if panel is None:
        panel = load_csv(resolve_dataset(config.dataset))
    config = dataclasses.replace(config, L=spec.L, H=spec.H)
    x_te, y_te = prepare_data(config, panel).xy["test"]
    return evaluate(predict(spec, model, x_te), y_te)


def select_best(val_mses: Sequence[float]) -> int:
    """Index of the lowest validation MSE (first on ties). Sees no test data."""
    if not val_mses:
        raise ValueError("nothing to select from")
    return int(np.argmin(np.asarray(val_mses, dtype=np.float64)))


def grid_search(configs: Sequence[ExperimentConfig],
                panels: dict[str, Panel] | None = None
                ) -> dict[tuple[str, int], RunReport]:
    """Run every config; per (dataset, H) keep the run with the lowest val MSE."""
    if not configs:
        raise ValueError("empty grid")
    panels = dict(panels or {})
    groups: dict[tuple[str, int], list[RunReport]] = {}
    for cfg in configs:
        if cfg.dataset not in panels:
            panels[cfg.dataset] = load_csv(resolve_dataset(cfg.dataset))
        report, _ = run_experiment(cfg, panels[cfg.dataset], write=False)
        groups.setdefault((cfg.dataset, cfg.H), []).append(report)
    return {key: runs[select_best([r.val_mse for r in runs])]
            for key, runs in groups.items()}


def expand_grid(base: ExperimentConfig, **axes: Sequence) -> list[ExperimentConfig]:
    """Cartesian product of ``axes`` (field name -> values) over ``base``."""
    configs = [base]
    for name, values in axes.items():
        configs = [dataclasses.replace(c, **{name: v}) for c in configs for v in values]
    return configs


def regularizer_table(base: ExperimentConfig, values: Sequence[float] = (0.0, 0.5, 1.0),
                      panel: Panel | None = None) -> list[dict]:
    """Test MSE over a lambda_k x lambda_j grid (rows ready for CSV)."""
    if panel is None:
        panel = load_csv(resolve_dataset(base.dataset))
    rows = []
    for cfg in expand_grid(base, lambda_k=values, lambda_j=values):
        report, _ = run_experiment(cfg, panel, write=False)
        rows.append({"lambda_k": cfg.lambda_k, "lambda_j": cfg.lambda_j,
                     "val_mse": report.val_mse, "test_mse": report.test.mse})
    return rows
