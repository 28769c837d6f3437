"""Regularized MSE loss, Adam, and the early-stopping training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import pipeline
from .data import WindowPair
from .errors import NumericsError
from .node import GradientBundle, ModelParams, SolverConfig, TrajectoryStats
from .pipeline import PipelineSpec

log = logging.getLogger(__name__)

LEARNING_RATES = (0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001)
BATCH_SIZES = (8, 16, 32, 64)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    lambda_k: float = 0.0
    lambda_j: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_k", "lambda_j"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mse: float = float("inf")
    epochs_run: int = 0
    stopped_early: bool = False
    test_mse: float | None = None
    test_mae: float | None = None
    wall_clock_seconds: float = 0.0
    error: str | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_clock_seconds")
        return d


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def zeros(cls, model: ModelParams) -> "AdamState":
        return cls(model.zeros_like(), model.zeros_like(), 0)


def loss(pred: np.ndarray, target: np.ndarray,
         stats: dict[str, TrajectoryStats] | list[TrajectoryStats],
         lambda_k: float, lambda_j: float) -> float:
    """MSE over all elements plus lambda_k*kinetic + lambda_j*jacobian per component."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if isinstance(stats, dict):
        stats = list(stats.values())
    reg = sum(lambda_k * s.kinetic + lambda_j * s.jacobian for s in stats)
    return float(np.mean((pred - target) ** 2) + reg)


def backward(window: WindowPair | tuple[np.ndarray, np.ndarray],
             model: ModelParams, spec: PipelineSpec, lambda_k: float = 0.0,
             lambda_j: float = 0.0, eps_seed: int = 0
             ) -> tuple[float, GradientBundle]:
    """Loss and exact gradients for one window (or a stacked batch of them)."""
    if isinstance(window, WindowPair):
        x, y = window.x, window.y
    else:
        x, y = window
    result = pipeline.forward(spec, model, x, eps_seed=eps_seed, record=True)
    return pipeline.backward(spec, model, result, y, lambda_k, lambda_j)


def adam_step(model: ModelParams, grads: GradientBundle, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, in place on ``model`` and ``state``."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    g_all = dict(grads.arrays())
    m_all = dict(state.m.arrays())
    v_all = dict(state.v.arrays())
    for key, p in model.arrays():
        g = g_all[key]
        m, v = m_all[key], v_all[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return model, state


def evaluate_mse(spec: PipelineSpec, model: ModelParams, x: np.ndarray,
                 y: np.ndarray, batch_size: int = 256) -> float:
    pred = pipeline.predict(spec, model, x, batch_size)
    return float(np.mean((pred - y) ** 2))


def train(spec: PipelineSpec, train_xy: tuple[np.ndarray, np.ndarray],
          val_xy: tuple[np.ndarray, np.ndarray], model: ModelParams,
          config: TrainConfig) -> tuple[ModelParams, TrainReport]:
    """Minibatch Adam with early stopping on validation MSE.

    ``train_xy``/``val_xy`` are stacked windows ``(n, L, F)``, ``(n, H, F)``.
    Returns the parameters of the best validation epoch. Shuffling and the
    Jacobian probes come from one generator seeded by ``config.seed``.
    """
    x_tr, y_tr = train_xy
    x_va, y_va = val_xy
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ValueError("train and validation windows must be nonempty")
    rng = np.random.default_rng(config.seed)
    model = model.copy()
    best = model.copy()
    state = AdamState.zeros(model)
    report = TrainReport()
    start = time.perf_counter()
    stale = 0
    try:
        for epoch in range(config.max_epochs):
            order = rng.permutation(len(x_tr))
            total, count = 0.0, 0
            for i in range(0, len(order), config.batch_size):
                idx = np.sort(order[i:i + config.batch_size])
                eps_seed = int(rng.integers(2**31))
                value, grads = backward((x_tr[idx], y_tr[idx]), model, spec,
                                        config.lambda_k, config.lambda_j,
                                        eps_seed)
                adam_step(model, grads, state, config.learning_rate)
                total += value * len(idx)
                count += len(idx)
            if not model.all_finite():
                raise NumericsError(f"parameters diverged in epoch {epoch}")
            val = evaluate_mse(spec, model, x_va, y_va)
            report.train_losses.append(total / count)
            report.val_losses.append(val)
            report.epochs_run = epoch + 1
            log.debug("epoch %d train %.6f val %.6f", epoch, total / count, val)
            if val < report.best_val_mse:
                report.best_val_mse = val
                report.best_epoch = epoch
                best = model.copy()
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    report.stopped_early = True
                    break
    except NumericsError as exc:
        report.error = str(exc)
        log.warning("training aborted: %s", exc)
    report.wall_clock_seconds = time.perf_counter() - start
    return best, report
