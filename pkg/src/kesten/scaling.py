"""Power-law and log-linear fits of mean exit time against R, and the Hill estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NonPositive(ValueError):
    pass


class DegenerateTail(ArithmeticError):
    pass


@dataclass(frozen=True)
class ScalingFit:
    mode: str           # "loglog" or "semilog"
    slope: float
    intercept: float
    r_squared: float
    residual_max: float
    points_used: int
    excluded: tuple = ()


@dataclass(frozen=True)
class HillEstimate:
    alpha_hill: float
    k: int
    n_samples: int


def _points(points):
    """Split points into (R, tau) arrays, dropping entries flagged unreliable.

    Accepts (R, tau) pairs or ExitBatchStats-like objects.
    """
    R, tau, dropped = [], [], []
    for p in points:
        if hasattr(p, "mean_tau"):
            if getattr(p, "unreliable", False):
                dropped.append(float(p.R))
                continue
            R.append(float(p.R))
            tau.append(float(p.mean_tau))
        else:
            r, t = p
            R.append(float(r))
            tau.append(float(t))
    R, tau = np.asarray(R), np.asarray(tau)
    if R.size < 3:
        raise ValueError(f"need at least 3 usable points, got {R.size}")
    if np.any(np.diff(R) <= 0):
        raise ValueError("R must be strictly increasing")
    if np.any(R <= 0) or np.any(tau <= 0):
        raise NonPositive("R and mean_tau must be positive")
    return R, tau, tuple(dropped)


def _ols(x, y):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    res = y - (intercept + slope * x)
    sst = np.sum((y - ym) ** 2)
    r2 = 1.0 - float(np.sum(res ** 2) / sst) if sst > 0 else 1.0
    return slope, intercept, min(max(r2, 0.0), 1.0), float(np.max(np.abs(res)))


def fit_contractive(points) -> ScalingFit:
    """OLS of log mean_tau on log R; the slope estimates the tail index."""
    R, tau, dropped = _points(points)
    s, c, r2, rm = _ols(np.log(R), np.log(tau))
    return ScalingFit("loglog", s, c, r2, rm, R.size, dropped)


def fit_explosive(points) -> ScalingFit:
    """OLS of mean_tau on log R; the slope is compared with 1/gamma_L."""
    R, tau, dropped = _points(points)
    s, c, r2, rm = _ols(np.log(R), tau)
    return ScalingFit("semilog", s, c, r2, rm, R.size, dropped)


def default_k(n: int) -> int:
    return max(10, int(n ** 0.6))


def hill_tail_index(samples, k: int | None = None) -> HillEstimate:
    """k / sum_{i<=k} log(X_(i) / X_(k+1)) over descending order statistics."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite and nonnegative")
    k = default_k(n) if k is None else int(k)
    if k < 10 or k >= n:
        raise ValueError(f"need 10 <= k < n, got k={k}, n={n}")
    top = -np.sort(-x)[: k + 1]
    if top[k] <= 0:
        raise DegenerateTail("threshold order statistic is zero")
    s = float(np.sum(np.log(top[:k] / top[k])))
    if s <= 0:
        raise DegenerateTail("top order statistics are all equal")
    return HillEstimate(k / s, k, n)
