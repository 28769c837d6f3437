"""Dataset characteristics and data-driven choice of decomposition settings.

Seasonality and stationarity are measured on non-overlapping windows: each
window is decomposed, the detrended part is checked for autocorrelation at
the candidate period, and the residual is put through an ADF test.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .adf import adf_test
from .data import Panel
from .decomposition import DecompConfig, decompose, moving_average_trend
from .errors import EdaError


@dataclass(frozen=True)
class CandidateGrid:
    kernel_sizes: tuple[int, ...] = (10, 25, 50)
    periods: tuple[int, ...] = (12, 24, 48)
    window_length: int = 336

    def __post_init__(self):
        object.__setattr__(self, "kernel_sizes", tuple(sorted(set(self.kernel_sizes))))
        object.__setattr__(self, "periods", tuple(sorted(set(self.periods))))
        if not self.kernel_sizes or not self.periods:
            raise EdaError("candidate grid is empty")
        if max(self.periods) >= self.window_length:
            raise EdaError("every period must be shorter than the window")
        if max(self.kernel_sizes) >= self.window_length:
            raise EdaError("every kernel must be shorter than the window")
        if min(self.periods) < 2 or min(self.kernel_sizes) < 2:
            raise EdaError("kernels and periods must be >= 2")


@dataclass
class EdaReport:
    forecastability: float
    trend_slope: float
    seasonality_ratio: float
    stationarity_ratio: float
    kernel_size: int
    period: int
    use_seasonality: bool
    use_instance_norm: bool
    candidates: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EdaReport":
        return cls(**d)

    def table_row(self) -> str:
        return (f"forecastability={self.forecastability:.3f} "
                f"trend={self.trend_slope:.2E} kernel={self.kernel_size} "
                f"period={self.period} "
                f"seasonality={100 * self.seasonality_ratio:.2f}% "
                f"stationarity={100 * self.stationarity_ratio:.2f}% "
                f"use_seasonality={self.use_seasonality} "
                f"use_instance_norm={self.use_instance_norm}")


def _values(panel: Panel | np.ndarray) -> np.ndarray:
    v = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=np.float64)
    return v[:, None] if v.ndim == 1 else v


def forecastability(series: np.ndarray) -> float:
    """One minus the normalized Shannon entropy of the power spectrum.

    Uses the K = floor(n/2) positive-frequency bins; the entropy is divided
    by log K so white noise scores near 0 and a single spectral line 1.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise EdaError("forecastability needs at least 4 points")
    k = n // 2
    power = np.abs(np.fft.rfft(x)[1:k + 1]) ** 2
    total = power.sum()
    if total <= 0.0 or not np.isfinite(total):
        return 0.0
    p = power / total
    p = p[p > 0]
    h = -float(np.sum(p * np.log(p)))
    return float(min(max(1.0 - h / math.log(k), 0.0), 1.0))


def trend_slope(series: np.ndarray) -> float:
    """OLS slope against the step index, divided by the mean absolute value."""
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if n < 2:
        raise EdaError("trend_slope needs at least 2 points")
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    scale = float(np.mean(np.abs(y)))
    return slope / scale if scale > 0.0 else slope


def _split_windows(values: np.ndarray, window_length: int) -> np.ndarray:
    n_win = values.shape[0] // window_length
    if n_win < 1:
        raise EdaError(
            f"series of length {values.shape[0]} holds no window of {window_length}")
    return values[:n_win * window_length].reshape(n_win, window_length, -1)


def acf_at_lag(x: np.ndarray, lag: int, axis: int = -1) -> np.ndarray:
    """Sample autocorrelation (biased, mean-removed) at one lag; NaN if constant."""
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    d = x - x.mean(axis=-1, keepdims=True)
    num = np.sum(d[..., lag:] * d[..., :-lag], axis=-1)
    den = np.sum(d * d, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def _seasonal_flags(values, window_length, kernel, period):
    if period >= window_length or kernel >= window_length:
        raise EdaError("period and kernel must be shorter than the window")
    w = _split_windows(values, window_length)
    detrended = w - moving_average_trend(w, kernel)
    acf = acf_at_lag(detrended, period, axis=1)       # (n_win, F)
    bound = 1.96 / math.sqrt(window_length)
    return np.nan_to_num(acf, nan=-np.inf) > bound


def acf_seasonal_ratio(panel: Panel | np.ndarray, window_length: int,
                       kernel: int, period: int) -> float:
    """Share of (window, feature) pairs whose detrended ACF at ``period``
    exceeds the 95% band 1.96/sqrt(window_length)."""
    flags = _seasonal_flags(_values(panel), window_length, kernel, period)
    return float(flags.mean())


def adf_stationary_ratio(panel: Panel | np.ndarray, window_length: int,
                         kernel: int, period: int, significance: float = 0.05,
                         extract_seasonality: bool = True
                         ) -> tuple[float, np.ndarray]:
    """Share of window residuals rejecting a unit root, plus every p-value.

    The p-value array has shape (n_windows, F).
    """
    if window_length < 20:
        raise EdaError("ADF windows need at least 20 points")
    w = _split_windows(_values(panel), window_length)
    resid = decompose(w, DecompConfig(kernel, period, extract_seasonality)).residual
    return residual_stationary_ratio(resid, significance)


def residual_stationary_ratio(residuals: np.ndarray, significance: float = 0.05
                              ) -> tuple[float, np.ndarray]:
    """ADF stage alone: share of residual windows (n_windows, L, F) that
    reject a unit root, plus the (n_windows, F) p-values."""
    resid = np.asarray(residuals, dtype=np.float64)
    if resid.ndim == 2:
        resid = resid[..., None]
    n_win, _, n_feat = resid.shape
    flags = np.zeros((n_win, n_feat), dtype=bool)
    pvals = np.zeros((n_win, n_feat))
    for i in range(n_win):
        for j in range(n_feat):
            res = adf_test(resid[i, :, j], level=significance)
            flags[i, j] = res.stationary
            pvals[i, j] = res.pvalue
    return float(flags.mean()), pvals


def detect_distribution_shift(train: Panel | np.ndarray, test: Panel | np.ndarray,
                              kernel: int, threshold: float = 0.5) -> bool:
    """True if, for some feature, the train and test trend means differ by
    more than ``threshold`` train standard deviations."""
    a, b = _values(train), _values(test)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EdaError("both panels must be nonempty")
    gap = np.abs(moving_average_trend(a, kernel).mean(axis=0)
                 - moving_average_trend(b, kernel).mean(axis=0))
    scale = np.maximum(a.std(axis=0), 1e-12)
    return bool((gap > threshold * scale).any())


def _lowest_p_counts(pvals: list[np.ndarray]) -> np.ndarray:
    """Per candidate, how many windows have its p-value strictly lowest."""
    stack = np.stack([p.ravel() for p in pvals])
    best = stack.min(axis=0)
    unique = (stack == best).sum(axis=0) == 1
    return ((stack == best) & unique).sum(axis=1)


def select_parameters(panel: Panel | np.ndarray, grid: CandidateGrid, *,
                      test: Panel | np.ndarray | None = None,
                      seasonality_threshold: float = 0.5,
                      shift_threshold: float = 0.5,
                      significance: float = 0.05,
                      top_k: int = 3, tie_tol: float = 1e-6) -> EdaReport:
    """Pick kernel size and period from ``grid``.

    Keep the ``top_k`` most seasonal periods per kernel, then take the
    candidate whose residuals are most often stationary. Near-ties go to the
    candidate with the most windows holding the lowest ADF p-value, then to
    grid order. ``test``, when given, drives the distribution-shift flag.
    """
    values = _values(panel)
    rows = []
    for kernel in grid.kernel_sizes:
        scored = [(acf_seasonal_ratio(values, grid.window_length, kernel, p), p)
                  for p in grid.periods]
        ranked = sorted(scored, key=lambda s: -s[0])[:top_k]
        for ratio, period in ranked:
            rows.append({"kernel_size": kernel, "period": period,
                         "seasonality_ratio": ratio})
    pvals = []
    for row in rows:
        ratio, p = adf_stationary_ratio(values, grid.window_length,
                                        row["kernel_size"], row["period"],
                                        significance)
        row["stationarity_ratio"] = ratio
        pvals.append(p)
    top = max(r["stationarity_ratio"] for r in rows)
    tied = [i for i, r in enumerate(rows) if top - r["stationarity_ratio"] <= tie_tol]
    if len(tied) > 1:
        counts = _lowest_p_counts([pvals[i] for i in tied])
        winner = tied[int(np.argmax(counts))]
    else:
        winner = tied[0]
    best = rows[winner]
    shift = False
    if test is not None:
        shift = detect_distribution_shift(values, test, best["kernel_size"],
                                          shift_threshold)
    return EdaReport(
        forecastability=float(np.mean([forecastability(c) for c in values.T])),
        trend_slope=float(np.mean([trend_slope(c) for c in values.T])),
        seasonality_ratio=best["seasonality_ratio"],
        stationarity_ratio=best["stationarity_ratio"],
        kernel_size=best["kernel_size"],
        period=best["period"],
        use_seasonality=best["seasonality_ratio"] >= seasonality_threshold,
        use_instance_norm=shift,
        candidates=rows,
    )


def summarize(panel: Panel | np.ndarray) -> dict[str, float]:
    """Full-series forecastability and trend, averaged over features."""
    values = _values(panel)
    return {"forecastability": float(np.mean([forecastability(c) for c in values.T])),
            "trend_slope": float(np.mean([trend_slope(c) for c in values.T]))}

