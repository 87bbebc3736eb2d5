"""Monte Carlo verdicts on the standing assumptions of a Kesten model.

Every check returns an AuditEntry with a verdict in {Pass, Fail,
Inconclusive}, a scalar statistic and a detail string naming the sample
sizes and thresholds.  One-sided bounds use 99% confidence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import spectral
from .linalg import invert_batch, mat_mat, operator_norm, vec_norm
from .models import Arch, Model
from .paths import block_len, draw_steps
from .rng import derive_seed

PASS, FAIL, INCONCLUSIVE = "Pass", "Fail", "Inconclusive"
CONTRACTIVE, EXPLOSIVE = "contractive", "explosive"
Z99 = 2.5758293035489004
CONF = 0.99
FIXED_TOL = 1e-10
DEGENERATE_TOL = 1e-12
LOG_CLIP = -700.0
OVERFLOW = 1e150
Z_GRID = tuple(2.0 ** (1 + k / 4) for k in range(21))   # 2 .. 64
MIN_DENOM_HITS = 30
MIN_HITS = 10


@dataclass(frozen=True)
class AuditEntry:
    name: str
    verdict: str
    statistic: float
    detail: str


@dataclass
class AuditReport:
    regime: str
    entries: list = field(default_factory=list)
    gamma_hat: float = math.nan
    alpha_hat: float | None = None

    @property
    def all_pass(self) -> bool:
        return all(e.verdict == PASS for e in self.entries)

    def verdict(self, name: str) -> str:
        for e in self.entries:
            if e.name == name:
                return e.verdict
        raise KeyError(name)

    def rows(self):
        return [(e.name, e.verdict, e.statistic, e.detail) for e in self.entries]


# ---------------------------------------------------------------- helpers

def one_step(model: Model, replicas: int, seed: int):
    """``replicas`` independent draws of (A, B)."""
    A, B = draw_steps(model, seed, np.arange(replicas, dtype=np.uint64), 0, 1)
    return A[:, 0], B[:, 0]


def _upper(count, n):
    """One-sided 99% Clopper-Pearson upper bound on a proportion."""
    return 1.0 if count >= n else float(stats.beta.ppf(CONF, count + 1, n - count))


def _lower(count, n):
    return 0.0 if count <= 0 else float(stats.beta.ppf(1 - CONF, count, n - count + 1))


def _unit(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _aux_rng(seed, label):
    # auxiliary randomness for test points, derived from the audit seed
    return np.random.default_rng(derive_seed(seed, label))


def _arch_kappa(model):
    if isinstance(model, Arch):
        return model.alphas[0] / sum(model.alphas[1:])
    return None


def default_candidates(model: Model, seed: int = 0, n_random: int = 8) -> list:
    d = model.dim
    rng = _aux_rng(seed, 1)
    cands = [np.zeros(d)]
    cands += list(rng.standard_normal((n_random, d)) * 10 ** rng.uniform(-1, 2, (n_random, 1)))
    k = _arch_kappa(model)
    if k is not None:
        cands.append(-k * np.ones(d))
    return cands


# ---------------------------------------------------------------- checks

def check_lyapunov_sign(model: Model, regime: str, replicas: int = 2000, n_steps: int = 64,
                        seed: int = 0) -> AuditEntry:
    est = spectral.estimate_lyapunov(model, n_steps, replicas, seed)
    lo, hi = est.gamma_hat - Z99 * est.std_err, est.gamma_hat + Z99 * est.std_err
    want_neg = regime == CONTRACTIVE
    if (hi < 0) if want_neg else (lo > 0):
        v = PASS
    elif (lo > 0) if want_neg else (hi < 0):
        v = FAIL
    else:
        v = INCONCLUSIVE
    return AuditEntry("lyapunov_sign", v, est.gamma_hat,
                      f"gamma_hat={est.gamma_hat:.6g} se={est.std_err:.3g} n_steps={n_steps} "
                      f"replicas={replicas}; 99% interval [{lo:.4g}, {hi:.4g}] vs required sign "
                      f"{'<0' if want_neg else '>0'}")


def check_fixed_point(model: Model, candidates=None, replicas: int = 10_000, seed: int = 0) -> AuditEntry:
    """P(Ax + B = x) < 1 at every candidate x (one non-fixed draw proves it)."""
    if candidates is None:
        candidates = default_candidates(model, seed)
    A, B = one_step(model, replicas, seed)
    worst, worst_x = -1.0, None
    for x in candidates:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.einsum("nij,j->ni", A, x) + B
        fixed = vec_norm(y - x) < FIXED_TOL * (1.0 + float(np.linalg.norm(x)))
        p = float(fixed.mean())
        if p > worst:
            worst, worst_x = p, x
    v = FAIL if worst >= 1.0 else PASS
    return AuditEntry("fixed_point", v, worst,
                      f"max empirical P(|Ax+B-x| < {FIXED_TOL:g}(1+|x|)) = {worst:.4g} at x={np.round(worst_x, 6).tolist()}; "
                      f"{len(candidates)} candidates, replicas={replicas}")


def _exceed_counts(model, x, radii, replicas, seed):
    A, B = one_step(model, replicas, seed)
    r = vec_norm(np.einsum("nij,j->ni", A, x) + B)
    return np.array([(r > t).sum() for t in radii])


def _test_points(model, R, n_points, rng):
    d = model.dim
    pts = [np.zeros(d)]
    for i in range(min(d, 4)):
        e = np.zeros(d)
        e[i] = R
        pts += [e, -e]
    m = max(0, n_points - len(pts))
    u = _unit(rng, m, d)
    radii = np.where(np.arange(m) % 2 == 0, R, R * rng.random(m) ** (1.0 / d))
    pts += list(u * radii[:, None])
    k = _arch_kappa(model)
    if k is not None and k * math.sqrt(d) <= R:
        pts.append(-k * np.ones(d))
    return pts


def _decay_profile(counts, zs, n, transform):
    """Per-z lower/upper confidence bounds on the decay exponent of p(z)/p(1).

    ``transform(z)`` is log z (power decay) or log log z (log-power decay).
    Also flags super-power decay: local slopes between successive resolved
    levels increasing by more than 99% noise.
    """
    c1 = counts[0]
    p1_lo, p1_hi = _lower(c1, n), _upper(c1, n)
    lcb, ucb, est = [], [], []
    for c, z in zip(counts[1:], zs):
        t = transform(z)
        if t <= 0:
            continue
        hi = _upper(c, n) / p1_lo
        lo = _lower(c, n) / p1_hi
        lcb.append(-math.log(min(hi, 1.0)) / t)
        ucb.append(math.inf if lo <= 0 else -math.log(lo) / t)
        est.append(math.inf if c == 0 else -math.log(c / c1) / t)
    # concavity of log p(z) in log z on resolved levels (weights = counts)
    lv = [(1.0, c1)] + [(z, c) for z, c in zip(zs, counts[1:]) if c >= MIN_HITS]
    super_power = False
    if len(lv) >= 4:
        lz = np.log([z for z, _ in lv])
        c = np.array([c for _, c in lv], dtype=np.float64)
        X = np.stack([np.ones_like(lz), lz, lz * lz], axis=1)
        w = c
        cov = np.linalg.inv(X.T @ (X * w[:, None]))
        coef = cov @ (X.T @ (w * np.log(c)))
        super_power = bool(coef[2] < -Z99 * math.sqrt(cov[2, 2]))
    return (max(lcb) if lcb else 0.0, ucb, est, super_power)


def _tail_check(name, model, R_grid, z_grid, n_points, replicas, seed, transform, threshold, label):
    rng = _aux_rng(seed, 2)
    zs = [float(z) for z in z_grid]
    resolved = unresolved = 0
    worst_lcb, worst_est = math.inf, math.inf
    fail_at = None
    for iR, R in enumerate(R_grid):
        for ix, x in enumerate(_test_points(model, float(R), n_points, rng)):
            radii = [R] + [z * R for z in zs]
            counts = _exceed_counts(model, x, radii, replicas, derive_seed(seed, 3, iR, ix))
            if counts[0] < MIN_DENOM_HITS:
                unresolved += 1
                continue
            resolved += 1
            lcb, ucbs, ests, sp = _decay_profile(counts, zs, replicas, transform)
            levels = 1 + sum(c >= MIN_HITS for c in counts[1:])
            if math.isinf(threshold) and not sp and levels < 4:
                # without a finite threshold only the curvature test is informative
                resolved -= 1
                unresolved += 1
                continue
            lcb = math.inf if sp else lcb
            finite = [e for e in ests if math.isfinite(e)]
            worst_est = min(worst_est, math.inf if sp else (finite[-1] if finite else math.inf))
            worst_lcb = min(worst_lcb, lcb)
            # evidence against: the exponent at the largest informative z sits below threshold
            inform = [u for u, c in zip(ucbs, counts[1:]) if c >= MIN_HITS]
            if not sp and inform and inform[-1] < threshold and math.isfinite(threshold) and fail_at is None:
                fail_at = (float(R), np.round(x, 4).tolist(), inform[-1])
    base = (f"R_grid={list(map(float, R_grid))} z_grid={zs} points/R={n_points} replicas/point={replicas}; "
            f"resolved={resolved} unresolved={unresolved} (need >= {MIN_DENOM_HITS} hits at z=1); "
            f"threshold {label}={threshold:.4g}")
    if resolved == 0:
        return AuditEntry(name, INCONCLUSIVE, math.nan, base)
    stat = worst_est
    if fail_at is not None:
        return AuditEntry(name, FAIL, stat, base + f"; exponent upper bound {fail_at[2]:.4g} at R={fail_at[0]} x={fail_at[1]}")
    if worst_lcb > threshold or worst_lcb == math.inf:
        return AuditEntry(name, PASS, stat, base + f"; worst exponent lower bound {worst_lcb:.4g}")
    return AuditEntry(name, INCONCLUSIVE, stat, base + f"; worst exponent lower bound {worst_lcb:.4g}")


def check_tail_ratio(model: Model, alpha_hat: float | None, R_grid=(10.0, 20.0, 40.0),
                     z_grid=Z_GRID, n_points: int = 12,
                     replicas: int = 100_000, seed: int = 0) -> AuditEntry:
    """Decay exponent of P(|Ax+B| > zR) / P(|Ax+B| > R) in z against alpha_hat.

    The statistic is the smallest fitted exponent over sampled (R, x) (inf
    for decay faster than any power).  With ``alpha_hat`` None only
    super-power decay can pass.
    """
    thr = math.inf if alpha_hat is None else float(alpha_hat)
    return _tail_check("tail_ratio", model, R_grid, z_grid, n_points, replicas, seed,
                       math.log, thr, "alpha_hat")


def check_log_tail_ratio(model: Model, R_grid=(10.0, 100.0, 1000.0), z_grid=Z_GRID,
                         n_points: int = 12, replicas: int = 100_000, seed: int = 0) -> AuditEntry:
    """Same ratio against (log z)^-beta0; passes when beta0 > 1 is supported."""
    return _tail_check("log_tail_ratio", model, R_grid, z_grid, n_points, replicas, seed,
                       lambda z: math.log(math.log(z)) if z > math.e else 0.0, 1.0, "beta0")


def _product(model, n0, replicas, seed):
    A, _ = draw_steps(model, seed, np.arange(replicas, dtype=np.uint64), 0, n0)
    P = A[:, 0]
    for j in range(1, n0):
        P = mat_mat(A[:, j], P)
    return P


def default_direction_pairs(d: int, seed: int = 0, n_random: int = 16) -> list:
    eye = np.eye(d)
    pairs = [(eye[i], eye[j]) for i in range(d) for j in range(d)]
    rng = _aux_rng(seed, 4)
    pairs += list(zip(_unit(rng, n_random, d), _unit(rng, n_random, d)))
    return pairs


def check_nondegeneracy(model: Model, n0_max: int | None = None, pairs=None, replicas: int = 10_000,
                        seed: int = 0) -> AuditEntry:
    """P(x . Pi_n0 y = 0) < 1 for every tested (x, y), for some n0 <= n0_max."""
    d = model.dim
    n0_max = 2 * d - 1 if n0_max is None else int(n0_max)
    pairs = default_direction_pairs(d, seed) if pairs is None else pairs
    X = np.array([p[0] for p in pairs], dtype=np.float64)
    Y = np.array([p[1] for p in pairs], dtype=np.float64)
    stat = 1.0
    for n0 in range(1, n0_max + 1):
        P = _product(model, n0, replicas, seed)
        nrm = operator_norm(P)
        nrm = np.atleast_1d(nrm)
        vals = np.abs(np.einsum("ki,nij,kj->nk", X, P, Y))
        degen = (vals <= DEGENERATE_TOL * nrm[:, None]).mean(axis=0)
        worst = float(degen.max())
        stat = min(stat, worst)
        if worst < 1.0:
            return AuditEntry("nondegeneracy", PASS, worst,
                              f"passes at n0={n0}: max over {len(pairs)} pairs of P(|x.Pi y| <= "
                              f"{DEGENERATE_TOL:g}||Pi||) = {worst:.4g}, replicas={replicas}")
    k = int(np.argmax(degen))
    return AuditEntry("nondegeneracy", FAIL, stat,
                      f"every n0 <= {n0_max} has a pair with all {replicas} draws degenerate; "
                      f"e.g. x={X[k].round(4).tolist()} y={Y[k].round(4).tolist()}; {len(pairs)} pairs, replicas={replicas}")


def _mean_map_fixed_point(model, A, B):
    d = model.dim
    M = A.mean(axis=0) - np.eye(d)
    try:
        return np.linalg.solve(M, -B.mean(axis=0))
    except np.linalg.LinAlgError:
        return None


def default_drift_grid(model: Model, A=None, B=None, seed: int = 0) -> list:
    d = model.dim
    rng = _aux_rng(seed, 5)
    grid = [np.zeros(d)]
    for r in (1.0, 10.0, 100.0):
        for i in range(d):
            e = np.zeros(d)
            e[i] = r
            grid += [e, -e]
        grid += list(_unit(rng, 4, d) * r)
    k = _arch_kappa(model)
    if k is not None:
        c = -k * np.ones(d)
        grid += [c] + [c + 10.0 ** -j * rng.standard_normal(d) for j in (1, 3, 6)]
    if A is not None:
        fp = _mean_map_fixed_point(model, A, B)
        if fp is not None and np.all(np.isfinite(fp)):
            grid.append(fp)
    return grid


def check_drift_lower_bound(model: Model, x_grid=None, replicas: int = 10_000, seed: int = 0) -> AuditEntry:
    """inf_x E log|Ax + B - x| > -inf, over a finite grid, with log clipped at -700."""
    A, B = one_step(model, replicas, seed)
    grid = default_drift_grid(model, A, B, seed) if x_grid is None else x_grid
    worst_mean, worst_clip, worst_x = math.inf, -1.0, None
    for x in grid:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        r = vec_norm(np.einsum("nij,j->ni", A, x) + B - x)
        with np.errstate(divide="ignore"):
            lg = np.log(r)
        clipped = lg < LOG_CLIP
        m = float(np.mean(np.where(clipped, LOG_CLIP, lg)))
        c = float(clipped.mean())
        if (c, -m) > (worst_clip, -worst_mean):
            worst_clip, worst_x = c, x
        worst_mean = min(worst_mean, m)
    clip_ub = _upper(int(round(worst_clip * replicas)), replicas)
    base = (f"min over {len(grid)} grid points of E log|Ax+B-x| = {worst_mean:.4g}; "
            f"max clip frequency {worst_clip:.4g} (clip at {LOG_CLIP:g}, tolerance 1e-4) "
            f"at x={None if worst_x is None else np.round(worst_x, 4).tolist()}; replicas={replicas}")
    if clip_ub < 1e-4:
        v = PASS
    elif _lower(int(round(worst_clip * replicas)), replicas) > 1e-4:
        v = FAIL
    else:
        v = INCONCLUSIVE
    return AuditEntry("drift_lower_bound", v, worst_mean, base)


def check_contraction_criterion(model: Model, s_grid=(0.5, 1, 2, 4, 8, 16, 32),
                                replicas: int = 100_000, seed: int = 0) -> AuditEntry:
    """P(||A^-1|| < 1) > 0 and the largest s with a stable estimate of E||A||^s."""
    A, _ = one_step(model, replicas, seed)
    inv, sing = invert_batch(A)
    inv = np.where(sing[:, None, None], 0.0, inv)
    n_inv = np.atleast_1d(operator_norm(inv))
    hits = int(np.sum(~sing & (n_inv < 1.0)))
    log_norm = np.log(np.maximum(np.atleast_1d(operator_norm(A)), 1e-300))
    s_ok = 0.0
    for s in sorted(s_grid):
        if spectral.h_from_log_norms(log_norm, s, 1).reliable:
            s_ok = float(s)
        else:
            break
    p = hits / replicas
    detail = (f"P(||A^-1|| < 1) ~ {p:.4g} ({hits}/{replicas}, singular draws {int(sing.sum())}); "
              f"largest s on grid {list(s_grid)} with ESS >= {spectral.ESS_FLOOR:g}: {s_ok:g}; replicas={replicas}")
    # no hit leaves the criterion unestablished rather than refuted
    v = PASS if hits > 0 else INCONCLUSIVE
    return AuditEntry("contraction_criterion", v, p, detail)


def check_invertibility(model: Model, replicas: int = 10_000, seed: int = 0) -> AuditEntry:
    A, _ = one_step(model, replicas, seed)
    _, sing = invert_batch(A)
    n = int(sing.sum())
    v = PASS if n == 0 else FAIL
    return AuditEntry("invertibility", v, n / replicas,
                      f"{n}/{replicas} sampled A singular (pivot below 1e-12 of row scale); replicas={replicas}")


def check_irreducibility(model: Model, replicas: int = 200, n_max: int | None = None,
                         seed: int = 0) -> AuditEntry:
    """Orbits of start vectors under random products must span R^d.

    Start vectors are the basis, random directions and real eigenvectors of
    sampled A (the natural candidates for a common invariant subspace).
    Sampling cannot prove reducibility, so the check never reports Fail.
    """
    d = model.dim
    if d == 1:
        return AuditEntry("irreducibility", PASS, 1.0, "d=1 has no proper nontrivial subspace (no sampling, replicas=0)")
    n_max = d if n_max is None else n_max
    A, _ = draw_steps(model, seed, np.arange(replicas, dtype=np.uint64), 0, n_max)
    rng = _aux_rng(seed, 6)
    starts = list(np.eye(d)) + list(_unit(rng, 4, d))
    for k in range(min(8, replicas)):
        w, V = np.linalg.eig(A[k, 0])
        starts += [np.real(V[:, j]) for j in range(d) if abs(w[j].imag) < 1e-12]
    worst = d
    for v in starts:
        vecs = []
        x = np.broadcast_to(v, (replicas, d)).copy()
        for j in range(n_max):
            x = np.einsum("nij,nj->ni", A[:, j], x)
            x /= np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-300)
            vecs.append(x)
        M = np.concatenate([v[None, :]] + vecs, axis=0)
        sv = np.linalg.svd(M, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        worst = min(worst, rank)
    v = PASS if worst == d else INCONCLUSIVE
    return AuditEntry("irreducibility", v, float(worst),
                      f"min orbit span rank {worst}/{d} over {len(starts)} start vectors, "
                      f"products up to length {n_max}, replicas={replicas}")


def check_unbounded_support(model: Model, steps: int = 20_000, chains: int = 64, seed: int = 0) -> AuditEntry:
    """Long-run max |X_n| should keep growing with run length (heuristic; never Fail)."""
    d = model.dim
    ids = np.arange(chains, dtype=np.uint64)
    x = np.zeros((chains, d))
    marks = {steps // 10: None, steps: None}
    run_max = np.zeros(chains)
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while t < steps:
            k = block_len(model, chains, t, steps)
            A, B = draw_steps(model, seed, ids, t, k)
            for j in range(k):
                x = np.einsum("nij,nj->ni", A[:, j], x) + B[:, j]
                run_max = np.maximum(run_max, np.minimum(vec_norm(x), OVERFLOW))
                if t + j + 1 in marks:
                    marks[t + j + 1] = run_max.copy()
            t += k
    short, long_ = marks[steps // 10], marks[steps]
    frac = float(np.mean(long_ > short))
    lo = _lower(int(np.sum(long_ > short)), chains)
    v = PASS if lo > 0.5 else INCONCLUSIVE
    return AuditEntry("unbounded_support", v, frac,
                      f"fraction of {chains} chains whose max |X_n| grows from {steps // 10} to {steps} steps: "
                      f"{frac:.3f} (99% lower bound {lo:.3f}, pass above 0.5); median maxima "
                      f"{np.median(short):.4g} -> {np.median(long_):.4g}")


# ---------------------------------------------------------------- aggregate

def _tail_index(model, budget, seed):
    n_steps = 1 if model.dim == 1 else 32
    try:
        return spectral.solve_tail_index(model, n_steps=n_steps, replicas=budget, seed=seed).alpha_hat
    except (spectral.NoRoot, spectral.NumericalFailure):
        return None


def audit(model: Model, regime: str, budget: int = 100_000, seed: int = 0) -> AuditReport:
    """Run the checks relevant to ``regime`` ("contractive" or "explosive")."""
    regime = regime.lower()
    if regime not in (CONTRACTIVE, EXPLOSIVE):
        raise ValueError(f"unknown regime {regime!r}")
    budget = int(budget)
    sub = lambda k: derive_seed(seed, 100 + k)
    rep = AuditReport(regime)
    ly = check_lyapunov_sign(model, regime, replicas=max(100, budget // 50), seed=sub(0))
    rep.entries.append(ly)
    rep.gamma_hat = ly.statistic
    if regime == CONTRACTIVE:
        rep.alpha_hat = _tail_index(model, budget, sub(1))
        rep.entries.append(check_contraction_criterion(model, replicas=budget, seed=sub(2)))
        rep.entries.append(check_fixed_point(model, replicas=max(1000, budget // 10), seed=sub(3)))
        rep.entries.append(check_tail_ratio(model, rep.alpha_hat, replicas=budget, seed=sub(4)))
        rep.entries.append(check_nondegeneracy(model, replicas=max(1000, budget // 10), seed=sub(5)))
        rep.entries.append(check_unbounded_support(model, seed=sub(6)))
    else:
        rep.entries.append(check_invertibility(model, replicas=max(1000, budget // 10), seed=sub(7)))
        rep.entries.append(check_irreducibility(model, seed=sub(8)))
        rep.entries.append(check_drift_lower_bound(model, replicas=budget, seed=sub(9)))
        rep.entries.append(check_log_tail_ratio(model, replicas=budget, seed=sub(10)))
    return rep
