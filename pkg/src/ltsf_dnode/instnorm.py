"""Instance normalization with exact inversion (NORM / DENORM blocks).

By default statistics are taken across the feature axis, one (mean, std)
pair per timestep. ``axis="time"`` gives the conventional per-feature
statistics instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NormError

EPS_FLOOR = 1e-5


@dataclass(frozen=True)
class NormState:
    """Statistics captured by :func:`normalize`.

    ``mu`` and ``sigma`` keep the reduced axis as a length-1 dimension so they
    broadcast against the ``(..., L, F)`` component they came from.
    """

    mu: np.ndarray
    sigma: np.ndarray
    axis: str = "feature"

    def for_horizon(self, H: int) -> "NormState":
        """Statistics to denormalize an H-step forecast.

        Per-timestep statistics of the final look-back step are carried
        across the horizon; per-feature statistics apply unchanged.
        """
        if self.axis == "time":
            return self
        reps = [1] * self.mu.ndim
        reps[-2] = H
        return NormState(np.tile(self.mu[..., -1:, :], reps),
                         np.tile(self.sigma[..., -1:, :], reps), self.axis)


def _reduce_axis(axis: str) -> int:
    if axis == "feature":
        return -1
    if axis == "time":
        return -2
    raise NormError(f"axis must be 'feature' or 'time', got {axis!r}")


def normalize(c: np.ndarray, eps_floor: float = EPS_FLOOR, axis: str = "feature"
              ) -> tuple[np.ndarray, NormState]:
    c = np.asarray(c, dtype=np.float64)
    ax = _reduce_axis(axis)
    mu = c.mean(axis=ax, keepdims=True)
    sigma = np.maximum(np.sqrt(((c - mu) ** 2).mean(axis=ax, keepdims=True)),
                       eps_floor)
    return (c - mu) / sigma, NormState(mu, sigma, axis)


def denormalize(c_tilde: np.ndarray, state: NormState) -> np.ndarray:
    c_tilde = np.asarray(c_tilde, dtype=np.float64)
    ax = _reduce_axis(state.axis)
    keep = -2 if ax == -1 else -1
    if (c_tilde.ndim != state.mu.ndim
            or c_tilde.shape[keep] != state.mu.shape[keep]
            or c_tilde.shape[:-2] != state.mu.shape[:-2]):
        raise NormError(
            f"cannot denormalize shape {c_tilde.shape} with statistics of "
            f"shape {state.mu.shape} ({state.axis} axis)")
    return state.sigma * c_tilde + state.mu
