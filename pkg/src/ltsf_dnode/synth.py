"""Deterministic synthetic panels: linear trend + periodic signal + noise,
with an optional level shift over the final 20% of the series.

The periodic signal is a sinusoid, or with ``peak_sharpness > 0`` a train of
sharp seasonal peaks exp(k*cos(.)) rescaled to the same amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Panel


@dataclass(frozen=True)
class SynthSpec:
    length: int = 2000
    n_features: int = 3
    amplitude: float = 1.0
    period: int = 24
    trend_slope: float = 0.0
    noise: float = 0.1
    shift: float = 0.0
    peak_sharpness: float = 0.0
    freq: str = "h"
    start: str = "2016-07-01 00:00:00"


# Weekly, short, one yearly cycle per 52 steps, like the influenza panel.
ILI_LIKE = SynthSpec(length=966, n_features=7, amplitude=1.0, period=52,
                     trend_slope=0.002, noise=0.3, shift=1.0, peak_sharpness=3.0, freq="7D",
                     start="2002-01-01")


def synth_generate(spec: SynthSpec, seed: int = 0, L: int | None = None,
                   H: int | None = None) -> Panel:
    if L is not None and H is not None and spec.length < 4 * (L + H):
        raise ValueError(f"length {spec.length} < 4*(L+H) = {4 * (L + H)}")
    rng = np.random.default_rng(seed)
    t = np.arange(spec.length, dtype=np.float64)[:, None]
    j = np.arange(spec.n_features, dtype=np.float64)[None, :]
    amp = spec.amplitude * (1.0 + 0.25 * j)
    phase = 2.0 * np.pi * j / max(spec.n_features, 1)
    angle = 2.0 * np.pi * t / spec.period + phase
    if spec.peak_sharpness > 0:
        k = spec.peak_sharpness
        # rescale exp(k*cos) from [e^-k, e^k] onto [-1, 1]
        wave = (np.exp(k * np.cos(angle)) - np.cosh(k)) / np.sinh(k)
    else:
        wave = np.sin(angle)
    values = spec.trend_slope * t + amp * wave
    if spec.noise > 0:
        values = values + spec.noise * rng.standard_normal(values.shape)
    if spec.shift:
        values[int(0.8 * spec.length):] += spec.shift
    stamps = np.arange(spec.length) * np.timedelta64(_step_seconds(spec.freq), "s")
    stamps = np.datetime64(spec.start, "s") + stamps
    names = tuple(f"f{i}" for i in range(spec.n_features))
    return Panel(stamps, values, names)


def _step_seconds(freq: str) -> int:
    import pandas as pd
    return int(pd.Timedelta(pd.tseries.frequencies.to_offset(freq)).total_seconds())


def to_csv(panel: Panel, path) -> None:
    import pandas as pd
    frame = pd.DataFrame(panel.values, columns=list(panel.feature_names))
    frame.insert(0, "date", pd.to_datetime(panel.timestamps).strftime("%Y-%m-%d %H:%M:%S"))
    frame.to_csv(path, index=False, float_format="%.17g")
