"""Panel loading, chronological splitting, z-scoring and sliding windows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import IngestError, SplitError, WindowError


@dataclass(frozen=True)
class Panel:
    """A multivariate series: ``values`` has shape (N timesteps, F features)."""

    timestamps: np.ndarray
    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise IngestError(f"values must be 2-D, got shape {values.shape}")
        ts = np.asarray(self.timestamps, dtype="datetime64[ns]")
        if ts.shape[0] != values.shape[0]:
            raise IngestError(
                f"{ts.shape[0]} timestamps for {values.shape[0]} rows")
        if len(self.feature_names) != values.shape[1]:
            raise IngestError(
                f"{len(self.feature_names)} names for {values.shape[1]} columns")
        if np.isnan(values).any():
            raise IngestError("panel contains missing values")
        if ts.shape[0] > 1:
            steps = np.diff(ts)
            if (steps <= np.timedelta64(0, "ns")).any():
                raise IngestError("timestamps must be strictly increasing")
            if (steps != steps[0]).any():
                raise IngestError("timestamps must have uniform granularity")
        values.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_steps

    def slice(self, start: int, stop: int) -> "Panel":
        return Panel(self.timestamps[start:stop], self.values[start:stop],
                     self.feature_names)

    def with_values(self, values: np.ndarray) -> "Panel":
        return Panel(self.timestamps, values, self.feature_names)

    @classmethod
    def concat(cls, panels: Sequence["Panel"]) -> "Panel":
        return cls(np.concatenate([p.timestamps for p in panels]),
                   np.concatenate([p.values for p in panels]),
                   panels[0].feature_names)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    val_frac: float = 0.1
    test_frac: float = 0.2

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise SplitError(f"split fractions must lie in (0, 1): {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise SplitError(f"split fractions must sum to 1: {fracs}")


@dataclass(frozen=True)
class WindowPair:
    x: np.ndarray
    y: np.ndarray
    start_index: int = field(default=0)


def load_csv(path: str | Path, datetime_column: str | None = None) -> Panel:
    """Read a benchmark CSV (datetime column first, numeric columns after).

    Blank cells, unparseable numbers and non-monotone timestamps raise
    :class:`IngestError`.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"cannot parse {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise IngestError("need a datetime column and at least one feature")
    if datetime_column is None:
        datetime_column = frame.columns[0]
    if datetime_column not in frame.columns:
        raise IngestError(f"column {datetime_column!r} not in {path}")
    try:
        stamps = pd.to_datetime(frame[datetime_column])
    except (ValueError, TypeError) as exc:
        raise IngestError(f"unparseable timestamps in {path}: {exc}") from exc
    features = frame.drop(columns=[datetime_column])
    if features.isna().to_numpy().any():
        raise IngestError(f"{path} contains missing values")
    try:
        values = features.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise IngestError(f"non-numeric feature column in {path}") from exc
    return Panel(stamps.to_numpy(dtype="datetime64[ns]"), values,
                 tuple(str(c) for c in features.columns))


def split(panel: Panel, spec: SplitSpec, L: int | None = None,
          H: int | None = None) -> tuple[Panel, Panel, Panel]:
    """Cut ``panel`` into contiguous train/val/test pieces (no shuffling).

    If ``L`` and ``H`` are given, every piece must hold at least one window.
    """
    n = panel.n_steps
    # the epsilon keeps e.g. 100 * 0.7 from flooring to 69
    n_train = math.floor(n * spec.train_frac + 1e-9)
    n_val = math.floor(n * spec.val_frac + 1e-9)
    b1, b2 = n_train, n_train + n_val
    parts = (panel.slice(0, b1), panel.slice(b1, b2), panel.slice(b2, n))
    need = 1 if L is None or H is None else L + H
    for name, part in zip(("train", "val", "test"), parts):
        if part.n_steps < need:
            raise SplitError(
                f"{name} split has {part.n_steps} rows, needs at least {need}")
    return parts


def zscore_fit_transform(train: Panel, others: Sequence[Panel] = ()
                         ) -> tuple[list[Panel], np.ndarray, np.ndarray]:
    """Standardize every panel with the train split's per-feature mean/std."""
    if train.n_steps == 0:
        raise SplitError("cannot fit z-score on an empty train split")
    mean = train.values.mean(axis=0)
    std = np.maximum(train.values.std(axis=0), 1e-8)
    out = [p.with_values((p.values - mean) / std) for p in (train, *others)]
    return out, mean, std


def window_arrays(values: np.ndarray, L: int, H: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 windows as read-only views of shape (n, L, F) and (n, H, F)."""
    if L < 1 or H < 1:
        raise WindowError(f"L and H must be positive, got L={L}, H={H}")
    values = np.asarray(values)
    n = values.shape[0]
    if n < L + H:
        raise WindowError(f"series of length {n} is shorter than L+H={L + H}")
    view = np.lib.stride_tricks.sliding_window_view(values, L + H, axis=0)
    # view: (n - L - H + 1, F, L + H)
    view = view.transpose(0, 2, 1)
    return view[:, :L, :], view[:, L:, :]


def windows(panel: Panel, L: int, H: int) -> list[WindowPair]:
    x, y = window_arrays(panel.values, L, H)
    return [WindowPair(x[i], y[i], i) for i in range(x.shape[0])]
