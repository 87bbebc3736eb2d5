"""The work behind each CLI subcommand: run engines, write tables and figures."""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import audit as AU, exits as E, scaling as F, spectral as S
from .config import ConfigError, RunConfig
from .models import SgdQuadratic
from .report import line_chart, write_csv, write_manifest


@dataclass
class ResultBundle:
    command: str
    config: dict
    tables: dict = field(default_factory=dict)    # file name -> (header, rows)
    figures: list = field(default_factory=list)
    ok: bool = True
    summary: str = ""


def _finish(cfg: RunConfig, bundle: ResultBundle, out_dir: str, started: float) -> ResultBundle:
    os.makedirs(out_dir, exist_ok=True)
    for name, (header, rows) in bundle.tables.items():
        write_csv(os.path.join(out_dir, name), header, rows)
    write_manifest(out_dir, cfg.to_dict(), cfg.seed, list(bundle.tables) + bundle.figures, started)
    return bundle


def _param(cfg, key, default):
    return cfg.params.get(key, default)


# ---------------------------------------------------------------- lyapunov

def cmd_lyapunov(cfg: RunConfig, out_dir: str) -> ResultBundle:
    t0 = time.time()
    model = cfg.build_model()
    est = S.estimate_lyapunov(model, cfg.n_steps, cfg.replicas, cfg.seed)
    header = ("n_steps", "replicas", "gamma_hat", "std_err")
    b = ResultBundle("lyapunov", cfg.to_dict())
    b.tables["lyapunov.csv"] = (header, [(est.n_steps, est.replicas, est.gamma_hat, est.std_err)])
    if _param(cfg, "inverse", False):
        inv = S.estimate_inverse_lyapunov(model, cfg.n_steps, cfg.replicas, cfg.seed)
        b.tables["lyapunov_inverse.csv"] = (header, [(inv.n_steps, inv.replicas, inv.gamma_hat, inv.std_err)])
    b.summary = f"gamma_hat = {est.gamma_hat:.6g} +- {est.std_err:.2g}"
    return _finish(cfg, b, out_dir, t0)


# ---------------------------------------------------------------- alpha

def cmd_alpha(cfg: RunConfig, out_dir: str) -> ResultBundle:
    t0 = time.time()
    model = cfg.build_model()
    n = cfg.n_steps
    res = S.solve_tail_index(model, n_steps=n, replicas=cfg.replicas, seed=cfg.seed,
                             s_max=float(_param(cfg, "s_max", 64.0)), tol=float(_param(cfg, "tol", 1e-3)))
    L = S.log_norms(model, n, cfg.replicas, cfg.seed)[:, 0]
    rows = []
    for s in _param(cfg, "s_grid", [0.25, 0.5, 1.0, 1.5, 2.0]):
        e = S.h_from_log_norms(L, float(s), n)
        hb = S.h_bounds(model, float(s), replicas=cfg.replicas, seed=cfg.seed)
        lo = math.log(hb.lower) if hb.lower > 0 else -math.inf
        rows.append((float(s), e.log_h_hat, e.ci_halfwidth, e.ess, lo, math.log(hb.upper)))
    conv = res.diagnostics["convexity"]
    b = ResultBundle("alpha", cfg.to_dict())
    b.tables["hfun.csv"] = (("s", "log_h_hat", "ci", "ess", "lower", "upper"), rows)
    b.tables["alpha.csv"] = (("alpha_hat", "bracket_lo", "bracket_hi", "iterations", "convexity_passed",
                              "min_second_diff"),
                             [(res.alpha_hat, res.bracket[0], res.bracket[1], res.iterations, conv["passed"],
                               conv["min_second_diff"])])
    drows = []
    for g in _param(cfg, "gammas", [0.5 * res.alpha_hat, 1.5 * res.alpha_hat]):
        rep = S.moment_dichotomy_probe(model, float(g), res.alpha_hat, n_grid=_param(cfg, "n_grid", [1, 2, 3, 4]),
                                       replicas=cfg.replicas, seed=cfg.seed)
        drows.append((rep.gamma, rep.slope, rep.trend, rep.expected, rep.consistent))
    b.tables["dichotomy.csv"] = (("gamma", "slope", "trend", "expected", "consistent"), drows)
    b.summary = f"alpha_hat = {res.alpha_hat:.6g}"
    return _finish(cfg, b, out_dir, t0)


# ---------------------------------------------------------------- exit

def cmd_exit(cfg: RunConfig, out_dir: str) -> ResultBundle:
    t0 = time.time()
    model = cfg.build_model()
    R_grid = [float(r) for r in cfg.R_grid]
    x0 = cfg.x0 if cfg.x0 is not None else [0.0] * model.dim
    contractive = cfg.regime == "contractive"
    alpha_hat = _param(cfg, "alpha_hat", None)
    if contractive and alpha_hat is None:
        ns = 1 if model.dim == 1 else cfg.n_steps
        alpha_hat = S.solve_tail_index(model, n_steps=ns, replicas=max(cfg.replicas, 10_000), seed=cfg.seed).alpha_hat
    cap = cfg.cap or E.default_cap(R_grid[-1], alpha_hat, explosive=not contractive)
    st = E.exit_sweep(model, x0, R_grid, cfg.replicas, cap, seed=cfg.seed)
    b = ResultBundle("exit", cfg.to_dict())
    b.tables["exit.csv"] = (("R", "mean_tau", "ci", "censored_frac"),
                            [(s.R, s.mean_tau, s.ci_halfwidth, s.censored_frac) for s in st])
    fit = (F.fit_contractive if contractive else F.fit_explosive)(st)
    kv = [("mode", fit.mode), ("slope", fit.slope), ("intercept", fit.intercept), ("r_squared", fit.r_squared),
          ("residual_max", fit.residual_max), ("points_used", fit.points_used),
          ("excluded_R", " ".join(repr(r) for r in fit.excluded)), ("cap", cap)]
    if contractive:
        kv.append(("alpha_hat", alpha_hat))
        if _param(cfg, "hill", True):
            xs = E.stationary_samples(model, int(_param(cfg, "hill_samples", 100_000)), seed=cfg.seed)
            h = F.hill_tail_index(xs, _param(cfg, "hill_k", None))
            kv += [("alpha_hill", h.alpha_hill), ("hill_k", h.k)]
    else:
        ly = S.estimate_lyapunov(model, cfg.n_steps, min(cfg.replicas, 10_000), cfg.seed)
        kv += [("gamma_hat", ly.gamma_hat), ("inverse_gamma_hat", 1.0 / ly.gamma_hat if ly.gamma_hat else math.inf),
               ("slope_over_inverse_gamma", fit.slope * ly.gamma_hat)]
    b.tables["scaling.csv"] = (("quantity", "value"), kv)
    line_chart(os.path.join(_ensure_dir(out_dir), "exit.svg"),
               [("mean exit time", [s.R for s in st], [s.mean_tau for s in st])],
               title=f"mean exit time ({cfg.regime})", xlabel="R", ylabel="E tau_R",
               logx=True, logy=contractive)
    b.figures.append("exit.svg")
    b.summary = f"{fit.mode} slope = {fit.slope:.6g}"
    return _finish(cfg, b, out_dir, t0)


def _ensure_dir(d):
    os.makedirs(d, exist_ok=True)
    return d


# ---------------------------------------------------------------- audit

def cmd_audit(cfg: RunConfig, out_dir: str) -> ResultBundle:
    t0 = time.time()
    rep = AU.audit(cfg.build_model(), cfg.regime, budget=int(_param(cfg, "budget", cfg.replicas)), seed=cfg.seed)
    b = ResultBundle("audit", cfg.to_dict())
    b.tables["audit.csv"] = (("check", "verdict", "statistic", "detail"), rep.rows())
    b.summary = ", ".join(f"{e.name}={e.verdict}" for e in rep.entries)
    return _finish(cfg, b, out_dir, t0)


# ---------------------------------------------------------------- learning-rate sweep

def lr_sweep(etas, d=1, m=1, Sigma=None, sigma_b=1.0, n_steps=64, replicas=1000, seed=0, refine=0):
    """Lyapunov exponent of SGD on a quadratic along a learning-rate grid.

    Every eta reuses the same seed, so the curve is smooth in eta.  With
    ``refine`` > 0 each sign change is bisected that many times.
    """
    Sigma = np.eye(d).tolist() if Sigma is None else Sigma

    def gamma(eta):
        e = S.estimate_lyapunov(SgdQuadratic(float(eta), m, Sigma, sigma_b), n_steps, replicas, seed)
        return e.gamma_hat, e.std_err

    pts = {float(e): gamma(float(e)) for e in etas}

    def brackets():
        xs = sorted(pts)
        return [(a, b) for a, b in zip(xs, xs[1:]) if pts[a][0] < 0 < pts[b][0] or pts[a][0] > 0 > pts[b][0]]

    for a, b in brackets():
        for _ in range(refine):
            mid = 0.5 * (a + b)
            pts[mid] = gamma(mid)
            if (pts[mid][0] < 0) == (pts[a][0] < 0):
                a = mid
            else:
                b = mid
    rows = [(e, pts[e][0], pts[e][1]) for e in sorted(pts)]
    return {"rows": rows, "crossings": brackets()}


def cmd_sweep_lr(cfg: RunConfig, out_dir: str) -> ResultBundle:
    t0 = time.time()
    etas = _param(cfg, "etas", [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
    if any(float(e) < 0 for e in etas):
        raise ConfigError("learning rates must be nonnegative")
    d = int(_param(cfg, "d", 1))
    res = lr_sweep(etas, d=d, m=int(_param(cfg, "m", 1)), Sigma=_param(cfg, "Sigma", None),
                   sigma_b=float(_param(cfg, "sigma_b", 1.0)), n_steps=cfg.n_steps, replicas=cfg.replicas,
                   seed=cfg.seed, refine=int(_param(cfg, "refine", 6)))
    b = ResultBundle("sweep-lr", cfg.to_dict())
    b.tables["sweep.csv"] = (("eta", "gamma_hat", "std_err"), res["rows"])
    b.tables["sweep_crossing.csv"] = (("eta_lo", "eta_hi"), res["crossings"])
    rows = res["rows"]
    line_chart(os.path.join(_ensure_dir(out_dir), "sweep.svg"),
               [("gamma_hat", [r[0] for r in rows], [r[1] for r in rows])],
               title="Lyapunov exponent vs learning rate", xlabel="eta", ylabel="gamma_hat", hline=0.0)
    b.figures.append("sweep.svg")
    b.summary = f"crossings: {res['crossings']}"
    return _finish(cfg, b, out_dir, t0)


# ---------------------------------------------------------------- reproduce

def cmd_reproduce(cfg: RunConfig, out_dir: str, only=None, log=print) -> ResultBundle:
    from . import acceptance
    t0 = time.time()
    os.makedirs(out_dir, exist_ok=True)
    results = acceptance.run_all(cfg.seed, out_dir, only=only, log=log)
    b = ResultBundle("reproduce", cfg.to_dict())
    b.ok = all(r.passed for r in results)
    b.summary = f"{sum(r.passed for r in results)}/{len(results)} criteria passed"
    files = [f for f in os.listdir(out_dir) if f.endswith(".csv")]
    write_manifest(out_dir, cfg.to_dict(), cfg.seed, files, t0)
    return b


COMMANDS = {
    "lyapunov": cmd_lyapunov,
    "alpha": cmd_alpha,
    "exit": cmd_exit,
    "audit": cmd_audit,
    "sweep-lr": cmd_sweep_lr,
    "reproduce": cmd_reproduce,
}
