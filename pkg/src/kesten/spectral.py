"""Lyapunov exponent, moment function h(s) and tail index by Monte Carlo.

All products A_n ... A_1 are carried in renormalised form: a matrix of unit
Frobenius norm plus an accumulated log-scale.  The operator norm of the unit
part is taken only when a value of log ||Pi_n|| is actually read out, so
explosive runs never overflow and no per-step power iteration is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _parallel
from .linalg import invert_batch, mat_mat, operator_norm
from .models import Model
from .paths import block_len, draw_steps

Z95 = 1.959963984540054
ESS_FLOOR = 100.0


class NumericalFailure(ArithmeticError):
    """A renormalised product hit a zero or non-finite norm."""


class SingularSample(NumericalFailure):
    pass


class DegenerateESS(ArithmeticError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


class NoRoot(ArithmeticError):
    pass


@dataclass(frozen=True)
class LyapunovEstimate:
    gamma_hat: float
    std_err: float
    n_steps: int
    replicas: int


@dataclass(frozen=True)
class HEstimate:
    s: float
    log_h_hat: float
    ci_halfwidth: float
    ess: float
    n_steps: int
    replicas: int

    @property
    def reliable(self) -> bool:
        return self.ess >= ESS_FLOOR


@dataclass(frozen=True)
class HBounds:
    s: float
    lower: float
    lower_ci: float
    upper: float
    upper_ci: float
    singular_frac: float


@dataclass(frozen=True)
class TailIndexResult:
    alpha_hat: float
    bracket: tuple[float, float]
    iterations: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DichotomyReport:
    gamma: float
    alpha_hat: float
    n_grid: tuple
    log_moments: tuple
    slope: float
    trend: str
    expected: str

    @property
    def consistent(self) -> bool:
        return self.trend == self.expected


def _log_norms_chunk(model, n_steps, seed, ids, record, inverse):
    n, d = ids.size, model.dim
    P = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    L = np.zeros(n)
    out = np.empty((n, len(record)))
    rec = {k: j for j, k in enumerate(record)}
    t = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while t < n_steps:
            k = block_len(model, n, t, n_steps)
            A, _ = draw_steps(model, seed, ids, t, k)
            if inverse:
                A, sing = invert_batch(A)
                if sing.any():
                    raise SingularSample("singular A encountered while inverting")
            for j in range(k):
                P = mat_mat(P, A[:, j]) if inverse else mat_mat(A[:, j], P)
                f = np.sqrt(np.sum(P * P, axis=(-2, -1)))
                if not np.all(np.isfinite(f) & (f > 0)):
                    raise NumericalFailure("renormalised product has zero or non-finite norm")
                P = P / f[:, None, None]
                L = L + np.log(f)
                if t + j + 1 in rec:
                    out[:, rec[t + j + 1]] = L + np.log(operator_norm(P))
            t += k
    return out


def log_norms(model: Model, n_steps: int, replicas: int, seed: int,
              record=None, inverse: bool = False) -> np.ndarray:
    """log ||Pi_n|| per replica (or log ||Pi_n^{-1}|| with ``inverse``).

    ``record`` lists the step counts to read out (default: just ``n_steps``);
    the result has shape ``(replicas, len(record))``.
    """
    record = tuple(sorted(set(record))) if record else (n_steps,)
    if record[0] < 1 or record[-1] > n_steps:
        raise ValueError("record steps must lie in [1, n_steps]")
    parts = _parallel.map_replicas(
        lambda ids: _log_norms_chunk(model, n_steps, seed, ids, record, inverse), replicas)
    return np.concatenate(parts, axis=0)


def _lyapunov(model, n_steps, replicas, seed, inverse):
    if n_steps < 1 or replicas < 2:
        raise ValueError("need n_steps >= 1 and replicas >= 2")
    g = log_norms(model, n_steps, replicas, seed, inverse=inverse)[:, 0] / n_steps
    return LyapunovEstimate(float(np.mean(g)), float(np.std(g, ddof=1) / math.sqrt(replicas)),
                            n_steps, replicas)


def estimate_lyapunov(model: Model, n_steps: int = 64, replicas: int = 1000, seed: int = 0) -> LyapunovEstimate:
    """Mean over replicas of (1/n) log ||A_n ... A_1||."""
    return _lyapunov(model, n_steps, replicas, seed, inverse=False)


def estimate_inverse_lyapunov(model: Model, n_steps: int = 64, replicas: int = 1000, seed: int = 0) -> LyapunovEstimate:
    """Mean over replicas of (1/n) log ||A_1^{-1} ... A_n^{-1}||.

    For d >= 2 this tracks the smallest Lyapunov exponent (with a minus
    sign), which equals minus the top exponent only when the spectrum is
    degenerate.
    """
    return _lyapunov(model, n_steps, replicas, seed, inverse=True)


def h_from_log_norms(L: np.ndarray, s: float, n_steps: int) -> HEstimate:
    """(1/n) log-mean-exp of s * log||Pi_n|| with an ESS diagnostic."""
    L = np.asarray(L, dtype=np.float64)
    N = L.size
    if s == 0:
        return HEstimate(0.0, 0.0, 0.0, float(N), n_steps, N)
    a = s * L
    w = np.exp(a - a.max())
    sw = w.sum()
    ess = float(sw * sw / np.sum(w * w))
    log_h = float((logsumexp(a) - math.log(N)) / n_steps)
    rel_se = float(np.std(w, ddof=1) / (w.mean() * math.sqrt(N))) if N > 1 else math.inf
    return HEstimate(float(s), log_h, Z95 * rel_se / n_steps, ess, n_steps, N)


def estimate_h(model: Model, s: float, n_steps: int = 64, replicas: int = 10_000,
               seed: int = 0, check: bool = True) -> HEstimate:
    """Estimate log h(s) = lim (1/n) log E||Pi_n||^s at finite ``n_steps``.

    Raises DegenerateESS (carrying the estimate) when the importance weights
    have ESS below 100, unless ``check`` is False.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    L = log_norms(model, n_steps, replicas, seed)[:, 0]
    est = h_from_log_norms(L, s, n_steps)
    if check and not est.reliable:
        raise DegenerateESS(f"ESS {est.ess:.1f} < {ESS_FLOOR:g} at s={s}", est)
    return est


def h_n_trend(model: Model, s: float, ns=(32, 64, 128), replicas: int = 10_000, seed: int = 0) -> dict:
    """log h(s) at several n on shared paths, plus a Richardson extrapolate."""
    ns = tuple(sorted(ns))
    L = log_norms(model, ns[-1], replicas, seed, record=ns)
    ests = [h_from_log_norms(L[:, j], s, n) for j, n in enumerate(ns)]
    a, b = ests[-2], ests[-1]
    r = b.n_steps / a.n_steps
    extrap = (r * b.log_h_hat - a.log_h_hat) / (r - 1.0)
    return {"estimates": ests, "richardson": extrap}


def _moment_draws(model, replicas, seed):
    A, _ = draw_steps(model, seed, np.arange(replicas, dtype=np.uint64), 0, 1)
    A = A[:, 0]
    up = operator_norm(A)
    inv, sing = invert_batch(A)
    inv = np.where(sing[:, None, None], 0.0, inv)
    n_inv = operator_norm(inv)
    low = np.where(sing, 0.0, 1.0 / np.where(sing, 1.0, n_inv))
    return low, up, sing


def h_bounds(model: Model, s: float, replicas: int = 10_000, seed: int = 0) -> HBounds:
    """Single-step Monte Carlo of E||A^{-1}||^{-s} <= h(s) <= E||A||^s.

    Singular draws contribute 0 to the lower moment.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    low, up, sing = _moment_draws(model, replicas, seed)
    if s == 0:
        return HBounds(0.0, 1.0, 0.0, 1.0, 0.0, float(sing.mean()))
    with np.errstate(divide="ignore"):
        lo_s = np.where(low > 0, low ** s, 0.0)
    up_s = up ** s
    ci = lambda v: Z95 * float(np.std(v, ddof=1)) / math.sqrt(replicas)
    return HBounds(float(s), float(lo_s.mean()), ci(lo_s), float(up_s.mean()), ci(up_s),
                   float(sing.mean()))


def convexity_check(s_grid, values, ses) -> dict:
    s_grid = np.asarray(s_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    pooled = float(np.sqrt(np.mean(np.square(ses))))
    # second differences on a uniform grid
    d2 = v[2:] - 2 * v[1:-1] + v[:-2]
    slack = 2.0 * pooled
    return {"grid": s_grid.tolist(), "log_h": v.tolist(), "min_second_diff": float(d2.min()),
            "slack": slack, "passed": bool(d2.min() >= -slack)}


def solve_tail_index(model: Model, n_steps: int = 64, replicas: int = 10_000, seed: int = 0,
                     s_max: float = 64.0, tol: float = 1e-3) -> TailIndexResult:
    """Root of log h(s) = 0 by doubling/halving then bisection.

    One set of paths is shared by every s, which makes s -> log h(s) a
    deterministic convex function, so bisection is well defined.
    """
    L = log_norms(model, n_steps, replicas, seed)[:, 0]

    def f(s):
        e = h_from_log_norms(L, s, n_steps)
        if not e.reliable:
            raise NoRoot(f"ESS {e.ess:.1f} below {ESS_FLOOR:g} at s={s:g} before a sign change")
        return e

    iterations = 0
    s = 1.0
    first = f(s)
    if first.log_h_hat < 0:
        lo = s
        while True:
            s *= 2.0
            iterations += 1
            if s > s_max:
                raise NoRoot(f"log h stays negative up to s_max={s_max:g}")
            if f(s).log_h_hat >= 0:
                hi = s
                break
            lo = s
    else:
        hi = s
        while True:
            s /= 2.0
            iterations += 1
            if s < 2.0**-20:
                raise NoRoot("log h is nonnegative near 0 (no contraction)")
            if f(s).log_h_hat < 0:
                lo = s
                break
            hi = s
    bracket = (lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if f(mid).log_h_hat < 0:
            lo = mid
        else:
            hi = mid
    grid = np.linspace(0.0, bracket[1], 9)
    ests = [h_from_log_norms(L, g, n_steps) for g in grid]
    conv = convexity_check(grid, [e.log_h_hat for e in ests], [e.ci_halfwidth / Z95 for e in ests])
    return TailIndexResult(0.5 * (lo + hi), (lo, hi), iterations, {"convexity": conv})


def moment_dichotomy_probe(model: Model, gamma: float, alpha_hat: float, n_grid=range(1, 5),
                           replicas: int = 100_000, seed: int = 0) -> DichotomyReport:
    """Trend of log E||Pi_n||^gamma along n (slope of an OLS line)."""
    n_grid = tuple(int(n) for n in n_grid)
    L = log_norms(model, max(n_grid), replicas, seed, record=n_grid)
    logs = []
    for j, n in enumerate(n_grid):
        e = h_from_log_norms(L[:, j], gamma, 1)
        if not e.reliable:
            raise DegenerateESS(f"ESS {e.ess:.1f} at n={n}", e)
        logs.append(e.log_h_hat)
    slope = float(np.polyfit(np.asarray(n_grid, float), np.asarray(logs), 1)[0]) if gamma else 0.0
    trend = "flat" if gamma == 0 else ("decreasing" if slope < 0 else "increasing")
    expected = "flat" if gamma == 0 else ("decreasing" if gamma < alpha_hat else "increasing")
    return DichotomyReport(gamma, alpha_hat, n_grid, tuple(logs), slope, trend, expected)
