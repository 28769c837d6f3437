"""Additive trend / seasonality / residual decomposition of look-back windows.

Every function works on arrays shaped ``(..., L, F)``: time on the second to
last axis, features on the last, any number of leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecompError


@dataclass(frozen=True)
class DecompConfig:
    kernel_size: int = 25
    period: int = 24
    extract_seasonality: bool = True

    def __post_init__(self):
        if self.kernel_size < 1:
            raise DecompError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if self.extract_seasonality and self.period < 2:
            raise DecompError(f"period must be >= 2, got {self.period}")

    def check_length(self, L: int) -> None:
        if self.extract_seasonality and self.period > L:
            raise DecompError(
                f"period {self.period} exceeds window length {L}")


@dataclass(frozen=True)
class DecomposedWindow:
    trend: np.ndarray
    seasonality: np.ndarray
    residual: np.ndarray
    config: DecompConfig

    def reconstruct(self) -> np.ndarray:
        return self.trend + self.seasonality + self.residual

    def components(self) -> dict[str, np.ndarray]:
        """Named components that feed the forecaster (seasonality only if extracted)."""
        out = {"trend": self.trend}
        if self.config.extract_seasonality:
            out["seasonality"] = self.seasonality
        out["residual"] = self.residual
        return out


def _as_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def pad_replicate(x: np.ndarray, kernel: int) -> np.ndarray:
    """Replicate the first row ceil((k-1)/2) times in front, the last row
    floor((k-1)/2) times at the back."""
    x = _as_series(x)
    front = kernel // 2          # == ceil((kernel - 1) / 2)
    back = (kernel - 1) // 2
    if front == 0 and back == 0:
        return x.copy()
    pad = [(0, 0)] * x.ndim
    pad[-2] = (front, back)
    return np.pad(x, pad, mode="edge")


def moving_average_trend(x: np.ndarray, kernel: int) -> np.ndarray:
    """Stride-1 average pooling over the replicate-padded window; length L."""
    x = _as_series(x)
    if kernel < 1:
        raise DecompError(f"kernel must be >= 1, got {kernel}")
    L = x.shape[-2]
    # averaging offsets from the first row keeps a constant window exactly constant
    ref = x[..., :1, :]
    padded = pad_replicate(x - ref, kernel)
    csum = np.cumsum(padded, axis=-2)
    zero = np.zeros_like(csum[..., :1, :])
    csum = np.concatenate([zero, csum], axis=-2)
    sums = csum[..., kernel:kernel + L, :] - csum[..., :L, :]
    return ref + sums / kernel


def seasonal_fragments(detrended: np.ndarray, period: int) -> np.ndarray:
    """Average rows i, i+P, i+2P, ... of the detrended window for each phase i."""
    d = _as_series(detrended)
    L = d.shape[-2]
    if not 2 <= period <= L:
        raise DecompError(f"period must satisfy 2 <= P <= L={L}, got {period}")
    m_max = -(-L // period)
    pad = [(0, 0)] * d.ndim
    pad[-2] = (0, m_max * period - L)
    blocks = np.pad(d, pad).reshape(*d.shape[:-2], m_max, period, d.shape[-1])
    counts = -(-(L - np.arange(period)) // period)
    return blocks.sum(axis=-3) / counts[:, None]


def tile_seasonality(fragments: np.ndarray, L: int) -> np.ndarray:
    fragments = _as_series(fragments)
    period = fragments.shape[-2]
    return np.take(fragments, np.arange(L) % period, axis=-2)


def decompose(x: np.ndarray, config: DecompConfig) -> DecomposedWindow:
    x = _as_series(x)
    L = x.shape[-2]
    config.check_length(L)
    trend = moving_average_trend(x, config.kernel_size)
    detrended = x - trend
    if config.extract_seasonality:
        seasonality = tile_seasonality(
            seasonal_fragments(detrended, config.period), L)
    else:
        seasonality = np.zeros_like(x)
    residual = detrended - seasonality
    return DecomposedWindow(trend, seasonality, residual, config)
