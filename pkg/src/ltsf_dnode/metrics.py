"""Evaluation metrics and the last-value baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import WindowPair
from .errors import MetricError


@dataclass(frozen=True)
class EvalResult:
    mse: float
    mae: float
    mape_paper: float
    n_windows: int


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise MetricError("empty input")
    return pred, target


def mse(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean((target - pred) ** 2))


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(target - pred)))


def mape_paper(pred, target, tol: float = 1e-8) -> float:
    """Mean of |(Y - Yhat) / Y|, skipping elements with |Y| < tol."""
    pred, target = _pair(pred, target)
    keep = np.abs(target) >= tol
    if not keep.any():
        return 0.0
    return float(np.mean(np.abs((target[keep] - pred[keep]) / target[keep])))


def evaluate(pred, target) -> EvalResult:
    """All metrics over a stack of forecasts shaped (n_windows, H, F)."""
    pred, target = _pair(pred, target)
    n = pred.shape[0] if pred.ndim == 3 else 1
    return EvalResult(mse(pred, target), mae(pred, target),
                      mape_paper(pred, target), n)


def naive_last_value_baseline(window: WindowPair | np.ndarray,
                              H: int | None = None) -> np.ndarray:
    """Repeat the last observed row over the horizon.

    Accepts a :class:`WindowPair` or a look-back array ``(..., L, F)``
    together with ``H``.
    """
    if isinstance(window, WindowPair):
        x, H = window.x, window.y.shape[0]
    else:
        x = np.asarray(window, dtype=np.float64)
        if H is None:
            raise ValueError("H is required when passing an array")
    last = x[..., -1:, :]
    reps = [1] * x.ndim
    reps[-2] = H
    return np.tile(last, reps)
