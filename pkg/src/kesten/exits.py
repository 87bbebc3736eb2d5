"""Exit times of X_{n+1} = A X_n + B from closed balls, by Monte Carlo.

A single simulated path records the first crossing time of every radius in a
grid, so the exit times across radii are pathwise monotone.  Paths whose
state exceeds ``OVERFLOW`` in any coordinate are stopped and counted as
exiting every radius not yet crossed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from .linalg import mat_mat, mat_vec, vec_norm
from .models import Arch, Model
from .paths import block_len, draw_steps

OVERFLOW = 1e150
Z95 = 1.959963984540054
UNRELIABLE_CENSORING = 1e-3
CENSORED = -1


@dataclass(frozen=True)
class TrajectoryState:
    x: np.ndarray
    step: int
    overflowed: bool = False


@dataclass(frozen=True)
class Exited:
    tau: int
    exit_point: np.ndarray


@dataclass(frozen=True)
class Censored:
    cap: int


@dataclass(frozen=True)
class ExitBatchStats:
    R: float
    replicas: int
    censored_frac: float
    mean_tau: float
    ci_halfwidth: float
    mean_log_exit_norm: float
    cap: int

    @property
    def unreliable(self) -> bool:
        return self.censored_frac > UNRELIABLE_CENSORING


@dataclass
class Crossings:
    """Per-replica first-passage data, shape (replicas, levels)."""

    tau: np.ndarray        # first n with the statistic above the level, or -1
    log_norm: np.ndarray   # log |X_tau| at the crossing (nan if censored)
    first: np.ndarray      # first n with X_n[0] > level (component levels)


def default_cap(R: float, alpha_hat: float | None = None, explosive: bool = False) -> int:
    """10 ceil(R^(alpha+1/2)) when contractive with alpha known, else 10^4 ceil(log R)."""
    if explosive or alpha_hat is None:
        return int(10_000 * max(1, math.ceil(math.log(R))))
    return int(10 * math.ceil(R ** (alpha_hat + 0.5)))


def _crossing_chunk(model, x0, radii, comp_levels, cap, seed, ids):
    n, d = ids.size, model.dim
    radii = np.asarray(radii, dtype=np.float64)
    comp = np.asarray(comp_levels, dtype=np.float64)
    nr, nc = radii.size, comp.size
    tau = np.full((n, nr), CENSORED, dtype=np.int64)
    lnorm = np.full((n, nr), np.nan)
    first = np.full((n, nc), CENSORED, dtype=np.int64)

    x = np.broadcast_to(np.asarray(x0, dtype=np.float64), (n, d)).copy()
    r0 = vec_norm(x)
    with np.errstate(divide="ignore"):
        lr0 = np.log(r0)
    hit0 = r0[:, None] > radii[None, :]
    tau[hit0] = 0
    lnorm[hit0] = np.broadcast_to(lr0[:, None], hit0.shape)[hit0]
    if nc:
        first[x[:, :1] > comp[None, :]] = 0

    def open_mask():
        m = (tau == CENSORED).any(axis=1)
        if nc:
            m |= (first == CENSORED).any(axis=1)
        return m

    alive = np.flatnonzero(open_mask())
    x = x[alive]
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while alive.size and t < cap:
            k = block_len(model, alive.size, t, cap)
            A, B = draw_steps(model, seed, ids[alive], t, k)
            for j in range(k):
                x = mat_vec(A[:, j], x) + B[:, j]
                nrm = vec_norm(x)
                over = ~(np.abs(x) <= OVERFLOW).all(axis=1)
                sub_tau = tau[alive]
                newly = (sub_tau == CENSORED) & ((nrm[:, None] > radii[None, :]) | over[:, None])
                if newly.any():
                    rows, cols = np.nonzero(newly)
                    tau[alive[rows], cols] = t + j + 1
                    lnorm[alive[rows], cols] = np.log(np.where(over[rows], OVERFLOW, nrm[rows]))
                if nc:
                    sub_first = first[alive]
                    newc = (sub_first == CENSORED) & ((x[:, :1] > comp[None, :]) | over[:, None])
                    if newc.any():
                        rows, cols = np.nonzero(newc)
                        first[alive[rows], cols] = t + j + 1
                if over.any():
                    # overflowed paths are finished at every level
                    keep = ~over
                    alive, x = alive[keep], x[keep]
                    A, B = A[keep], B[keep]
                    if not alive.size:
                        break
            t += k
            keep = open_mask()[alive]
            alive, x = alive[keep], x[keep]
    return tau, lnorm, first


def first_crossings(model: Model, x0, radii, cap: int, replicas: int, seed: int,
                    comp_levels=()) -> Crossings:
    """Run ``replicas`` paths from ``x0`` until every level is crossed or ``cap``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.size != model.dim:
        raise ValueError(f"x0 has dimension {x0.size}, model has {model.dim}")
    parts = _parallel.map_replicas(
        lambda ids: _crossing_chunk(model, x0, radii, comp_levels, cap, seed, ids), replicas)
    return Crossings(*(np.concatenate(p, axis=0) for p in zip(*parts)))


def simulate_exit(model: Model, x0, R: float, cap: int, seed: int = 0, stream: int = 0):
    """Exit record of a single path (replica ``stream`` of ``seed``)."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if vec_norm(x0) > R:
        return Exited(0, x0.copy())
    x = x0.copy()
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while t < cap:
            k = min(cap - t, 64)
            A, B = draw_steps(model, seed, [stream], t, k)
            for j in range(k):
                x = mat_vec(A[0, j], x) + B[0, j]
                if vec_norm(x) > R or not (np.abs(x) <= OVERFLOW).all():
                    return Exited(t + j + 1, x)
            t += k
    return Censored(cap)


def _stats(R, tau_col, lnorm_col, cap) -> ExitBatchStats:
    n = tau_col.size
    cens = tau_col == CENSORED
    vals = np.where(cens, cap, tau_col).astype(np.float64)
    ci = Z95 * float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    ok = ~cens
    mlog = float(np.mean(lnorm_col[ok])) if ok.any() else math.nan
    return ExitBatchStats(float(R), n, float(cens.mean()), float(vals.mean()), ci, mlog, int(cap))


def estimate_mean_exit(model: Model, x0, R: float, replicas: int, cap: int, seed: int = 0) -> ExitBatchStats:
    """Mean exit time; censored paths count as ``cap`` (a certified lower bound)."""
    if replicas < 2:
        raise ValueError("need at least two replicas")
    c = first_crossings(model, x0, [R], cap, replicas, seed)
    return _stats(R, c.tau[:, 0], c.log_norm[:, 0], cap)


def exit_sweep(model: Model, x0, R_grid, replicas: int, cap: int, seed: int = 0,
               return_paths: bool = False):
    """One ExitBatchStats per radius, all radii read off the same paths."""
    R_grid = np.asarray(R_grid, dtype=np.float64)
    if R_grid.size == 0 or np.any(np.diff(R_grid) <= 0):
        raise ValueError("R_grid must be strictly increasing")
    if replicas < 2:
        raise ValueError("need at least two replicas")
    c = first_crossings(model, x0, R_grid, cap, replicas, seed)
    stats = [_stats(R, c.tau[:, j], c.log_norm[:, j], cap) for j, R in enumerate(R_grid)]
    return (stats, c) if return_paths else stats


def _coupled_chunk(model, y, z, n, seed):
    d = model.dim
    A, B = draw_steps(model, seed, [0], 0, n)
    A, B = A[0], B[0]
    xy, xz = y.copy(), z.copy()
    P = np.eye(d)
    logscale = 0.0
    diff0 = y - z
    worst = 0.0
    for k in range(n):
        xy = mat_vec(A[k], xy) + B[k]
        xz = mat_vec(A[k], xz) + B[k]
        if not (np.isfinite(xy).all() and np.isfinite(xz).all()) or \
                np.abs(xy).max() > OVERFLOW or np.abs(xz).max() > OVERFLOW:
            break
        P = mat_mat(A[k], P)
        f = math.sqrt(float(np.sum(P * P)))
        if f == 0:
            break
        P = P / f
        logscale += math.log(f)
        pred = math.exp(logscale) * mat_vec(P, diff0)
        denom = float(vec_norm(pred))
        if denom == 0 or not math.isfinite(denom):
            break
        worst = max(worst, float(vec_norm(xy - xz - pred)) / denom)
    return worst


def coupled_difference_check(model: Model, y, z, n: int, seed: int = 0) -> float:
    """Max over k <= n of |X_k(y) - X_k(z) - Pi_k (y - z)| / |Pi_k (y - z)|.

    Both trajectories consume the same draws; Pi_k is accumulated separately
    in renormalised form.  Steps after an overflow are not compared.
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if np.array_equal(y, z):
        return 0.0
    return _coupled_chunk(model, y, z, n, seed)


@dataclass(frozen=True)
class SandwichReport:
    violations: int
    checked: int
    censored: int
    p: int


def arch_sandwich_check(model: Arch, x0, R: float, replicas: int, seed: int = 0,
                        cap: int = 100_000) -> SandwichReport:
    """Count paths violating tau_R <= hat-tau_R <= tau_{sqrt(p) R} + p.

    hat-tau_R is the first n with X_n^2 (the leading coordinate) above R.
    Paths censored at ``cap`` on any of the three times are excluded.
    """
    if not isinstance(model, Arch):
        raise TypeError("arch_sandwich_check needs an Arch model")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if np.any(x0 < 0):
        raise ValueError("ARCH state must be componentwise nonnegative")
    p = model.dim
    c = first_crossings(model, x0, [R, math.sqrt(p) * R], cap, replicas, seed, comp_levels=[R])
    t_r, t_big, t_hat = c.tau[:, 0], c.tau[:, 1], c.first[:, 0]
    cens = (t_r == CENSORED) | (t_big == CENSORED) | (t_hat == CENSORED)
    ok = ~cens
    bad = (t_r[ok] > t_hat[ok]) | (t_hat[ok] > t_big[ok] + p)
    return SandwichReport(int(bad.sum()), int(ok.sum()), int(cens.sum()), p)


def stationary_samples(model: Model, n_samples: int, seed: int = 0, burn_in: int = 1000,
                       thin: int = 10, chains: int = 100, x0=None) -> np.ndarray:
    """|X_n| sampled from long runs: ``chains`` parallel chains after burn-in, thinned."""
    per = -(-n_samples // chains)
    steps = burn_in + thin * per
    d = model.dim
    ids = np.arange(chains, dtype=np.uint64)
    x = np.zeros((chains, d)) if x0 is None else np.broadcast_to(np.asarray(x0, float), (chains, d)).copy()
    out = np.empty((chains, per))
    t = 0
    kept = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while t < steps:
            k = block_len(model, chains, t, steps)
            A, B = draw_steps(model, seed, ids, t, k)
            for j in range(k):
                x = mat_vec(A[:, j], x) + B[:, j]
                n = t + j + 1
                if n > burn_in and (n - burn_in) % thin == 0:
                    out[:, kept] = vec_norm(x)
                    kept += 1
            t += k
    return out.T.reshape(-1)[:n_samples]
