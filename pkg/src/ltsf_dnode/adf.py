"""Augmented Dickey-Fuller unit-root test (constant-only regression).

Regression: dy_t = a + g*y_{t-1} + sum_{i=1..p} b_i*dy_{t-i} + e_t, with the
statistic g_hat / se(g_hat). Critical values use MacKinnon's (2010) response
surface; p-values MacKinnon's (1994) approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# MacKinnon (1994), constant-only, one series.
_TAU_MAX, _TAU_MIN, _TAU_STAR = 2.74, -18.83, -1.61
_SMALL_P = (2.1659, 1.4412, 0.038269)
_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)

# MacKinnon (2010) response surface: tau(T) = b0 + b1/T + b2/T^2 + b3/T^3.
_CRIT_SURFACE = {
    0.01: (-3.43035, -6.5393, -16.786, -79.433),
    0.05: (-2.86154, -2.8903, -4.234, -40.04),
    0.10: (-2.56677, -1.5384, -2.809, 0.0),
}


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    pvalue: float
    critical_value: float
    nobs: int
    lags: int

    @property
    def stationary(self) -> bool:
        return self.statistic < self.critical_value


def schwert_lag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def critical_value(nobs: float, level: float = 0.05) -> float:
    b = _CRIT_SURFACE[level]
    if math.isinf(nobs):
        return b[0]
    inv = 1.0 / nobs
    return b[0] + b[1] * inv + b[2] * inv**2 + b[3] * inv**3


def mackinnon_pvalue(stat: float) -> float:
    if stat > _TAU_MAX:
        return 1.0
    if stat < _TAU_MIN:
        return 0.0
    coef = _SMALL_P if stat <= _TAU_STAR else _LARGE_P
    z = sum(c * stat**i for i, c in enumerate(coef))
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def adf_test(x: np.ndarray, lags: int | None = None,
             level: float = 0.05) -> AdfResult:
    """ADF statistic for a 1-D series; ``lags`` defaults to the Schwert rule.

    A degenerate (constant) series has no unit root to speak of and is
    reported stationary with statistic -inf and p-value 0.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    p = schwert_lag(n) if lags is None else lags
    nobs = n - p - 1
    if nobs < p + 3:
        raise ValueError(f"series of length {n} too short for {p} lags")
    if np.ptp(x) == 0.0:
        return AdfResult(-math.inf, 0.0, critical_value(nobs, level), nobs, p)
    dx = np.diff(x)
    target = dx[p:]
    cols = [x[p:n - 1], np.ones(nobs)]
    cols += [dx[p - i:n - 1 - i] for i in range(1, p + 1)]
    X = np.column_stack(cols)
    beta, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ beta
    dof = nobs - X.shape[1]
    sigma2 = float(resid @ resid) / dof
    if rank < X.shape[1] or sigma2 <= 0.0:
        # exactly explained differences: treat as stationary
        return AdfResult(-math.inf, 0.0, critical_value(nobs, level), nobs, p)
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = math.sqrt(sigma2 * xtx_inv[0, 0])
    stat = float(beta[0] / se)
    return AdfResult(stat, mackinnon_pvalue(stat), critical_value(nobs, level),
                     nobs, p)
