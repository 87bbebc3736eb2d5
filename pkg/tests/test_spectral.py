import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kesten import _parallel
from kesten import spectral as S
from kesten.models import Arch, Explicit, Scalar, constant, gaussian, lognormal, sgd_isotropic

E_LOG_CHI2 = -1.270363   # E log Z^2, Z standard normal (scripts/oracles.py)
ELOG_SGD = {0.1: -0.124672, 1.0: -0.416992, 2.0: -0.116247, 10.0: 1.130578}


def scaled_identity(c, d=2):
    return Explicit(((1.0, (c * np.eye(d)).tolist(), [1.0] * d),))


def lognormal_model(mu, sigma):
    return Scalar(lognormal(mu, sigma), gaussian(0.0, 1.0))


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
def test_lyapunov_of_scaled_identity(c):
    e = S.estimate_lyapunov(scaled_identity(c), n_steps=50, replicas=10, seed=1)
    assert e.gamma_hat == pytest.approx(math.log(c), abs=1e-12)
    assert e.std_err == 0.0


def test_lyapunov_lognormal():
    e = S.estimate_lyapunov(lognormal_model(-0.3, 0.8), n_steps=16, replicas=20_000, seed=2)
    assert abs(e.gamma_hat + 0.3) <= 4 * e.std_err


def test_lyapunov_arch1():
    a1 = 0.3
    e = S.estimate_lyapunov(Arch((1.0, a1)), n_steps=16, replicas=20_000, seed=3)
    assert abs(e.gamma_hat - (math.log(a1) + E_LOG_CHI2)) <= 4 * e.std_err


def test_inverse_lyapunov():
    e = S.estimate_inverse_lyapunov(scaled_identity(2.0), n_steps=20, replicas=4, seed=0)
    assert e.gamma_hat == pytest.approx(-math.log(2.0), abs=1e-12)
    m = lognormal_model(0.4, 0.5)
    e = S.estimate_inverse_lyapunov(m, n_steps=16, replicas=20_000, seed=4)
    assert abs(e.gamma_hat + 0.4) <= 4 * e.std_err


def test_inverse_lyapunov_singular_sample():
    m = Explicit(((0.5, [[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0]), (0.5, np.eye(2).tolist(), [0.0, 0.0])))
    with pytest.raises(S.SingularSample):
        S.estimate_inverse_lyapunov(m, n_steps=10, replicas=100, seed=0)


def test_inverse_matches_forward_in_one_dimension():
    m = lognormal_model(0.2, 0.7)
    fw = S.estimate_lyapunov(m, 32, 5000, seed=5)
    bw = S.estimate_inverse_lyapunov(m, 32, 5000, seed=5)
    assert abs(fw.gamma_hat + bw.gamma_hat) <= 3 * math.hypot(fw.std_err, bw.std_err)


def test_rerun_bit_exact():
    m = sgd_isotropic(1.5, d=2)
    a = S.estimate_lyapunov(m, 32, 2, seed=77)
    b = S.estimate_lyapunov(m, 32, 2, seed=77)
    assert a == b


def test_thread_count_invariance():
    m = sgd_isotropic(1.5, d=2)
    with _parallel.forced_threads(1):
        a = S.log_norms(m, 20, 9000, seed=3)
    with _parallel.forced_threads(4):
        b = S.log_norms(m, 20, 9000, seed=3)
    assert np.array_equal(a, b)


def test_sgd_sign_flip_and_quadrature():
    for eta, ref in ELOG_SGD.items():
        e = S.estimate_lyapunov(sgd_isotropic(eta), n_steps=1, replicas=200_000, seed=6)
        assert abs(e.gamma_hat - ref) <= 4 * e.std_err
    assert S.estimate_lyapunov(sgd_isotropic(0.1), 64, 2000, seed=1).gamma_hat < 0
    assert S.estimate_lyapunov(sgd_isotropic(10.0), 64, 2000, seed=1).gamma_hat > 0


def test_h_trivial_cases():
    m = lognormal_model(-0.5, 1.0)
    assert S.estimate_h(m, 0.0, n_steps=4, replicas=100, seed=0).log_h_hat == 0.0
    e = S.estimate_h(scaled_identity(3.0), 1.5, n_steps=16, replicas=200, seed=0)
    assert e.log_h_hat == pytest.approx(1.5 * math.log(3.0), abs=1e-12)
    assert e.ess == pytest.approx(200)
    with pytest.raises(ValueError):
        S.estimate_h(m, -1.0)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 1.5])
def test_h_lognormal_closed_form(s):
    mu, sig = -0.5, 1.0
    e = S.estimate_h(lognormal_model(mu, sig), s, n_steps=1, replicas=400_000, seed=7)
    assert abs(e.log_h_hat - (mu * s + 0.5 * sig * sig * s * s)) <= max(2 * e.ci_halfwidth, 0.03)
    assert e.ess <= e.replicas


def test_degenerate_ess():
    m = lognormal_model(-0.5, 1.0)
    with pytest.raises(S.DegenerateESS) as info:
        S.estimate_h(m, 12.0, n_steps=1, replicas=1000, seed=0)
    assert info.value.estimate.ess < S.ESS_FLOOR
    assert not S.estimate_h(m, 12.0, n_steps=1, replicas=1000, seed=0, check=False).reliable


def test_h_bounds():
    b = S.h_bounds(scaled_identity(2.0), 1.5, replicas=100, seed=0)
    assert b.lower == pytest.approx(2.0 ** 1.5, rel=1e-12)
    assert b.upper == pytest.approx(2.0 ** 1.5, rel=1e-12)
    b = S.h_bounds(lognormal_model(-0.5, 1.0), 1.0, replicas=10_000, seed=1)
    assert b.lower == pytest.approx(b.upper, rel=1e-12)
    assert S.h_bounds(lognormal_model(-0.5, 1.0), 0.0).upper == 1.0


def test_h_inside_bounds_arch1():
    m = Arch((1.0, 0.4))
    for s in (0.5, 1.0, 2.0):
        e = S.estimate_h(m, s, n_steps=1, replicas=100_000, seed=8)
        b = S.h_bounds(m, s, replicas=100_000, seed=9)
        h = math.exp(e.log_h_hat)
        assert b.lower - 2 * b.lower_ci <= h <= b.upper + 2 * b.upper_ci


def test_h_bounds_singular_draws_give_zero_lower():
    m = Explicit(((1.0, [[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0]),))
    b = S.h_bounds(m, 1.0, replicas=50, seed=0)
    assert b.lower == 0.0 and b.singular_frac == 1.0 and b.upper == pytest.approx(1.0)


@pytest.mark.parametrize("mu,alpha", [(-0.5, 1.0), (-1.0, 2.0)])
def test_tail_index_lognormal(mu, alpha):
    r = S.solve_tail_index(lognormal_model(mu, 1.0), n_steps=1, replicas=400_000, seed=10)
    assert abs(r.alpha_hat - alpha) <= 0.05
    lo, hi = r.bracket
    assert lo <= r.alpha_hat <= hi and hi - lo <= 1e-3
    assert r.diagnostics["convexity"]["passed"]


def test_tail_index_no_root_for_contraction():
    with pytest.raises(S.NoRoot):
        S.solve_tail_index(scaled_identity(0.5), n_steps=8, replicas=100, seed=0)


def test_tail_index_no_root_when_expanding():
    with pytest.raises(S.NoRoot):
        S.solve_tail_index(scaled_identity(2.0), n_steps=8, replicas=100, seed=0)


def test_moment_dichotomy():
    m = lognormal_model(-0.5, 1.0)
    flat = S.moment_dichotomy_probe(m, 0.0, 1.0, n_grid=(1, 2, 3), replicas=1000, seed=0)
    assert flat.trend == "flat" and flat.consistent and flat.log_moments == (0.0, 0.0, 0.0)
    lo = S.moment_dichotomy_probe(m, 0.5, 1.0, n_grid=(1, 2, 3), replicas=200_000, seed=1)
    hi = S.moment_dichotomy_probe(m, 1.5, 1.0, n_grid=(1, 2, 3), replicas=200_000, seed=2)
    assert lo.trend == "decreasing" and lo.consistent
    assert hi.trend == "increasing" and hi.consistent


def test_n_trend_shares_paths():
    out = S.h_n_trend(lognormal_model(-0.5, 1.0), 0.5, ns=(2, 4, 8), replicas=5000, seed=0)
    assert [e.n_steps for e in out["estimates"]] == [2, 4, 8]
    assert math.isfinite(out["richardson"])


_L = S.log_norms(Arch((1.0, 0.4)), 4, 20_000, seed=11)[:, 0]


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_log_h_convex_on_shared_paths(a, b):
    # log-mean-exp of s L is exactly convex in s, so midpoint convexity holds up to rounding
    fa = S.h_from_log_norms(_L, a, 4).log_h_hat
    fb = S.h_from_log_norms(_L, b, 4).log_h_hat
    fm = S.h_from_log_norms(_L, 0.5 * (a + b), 4).log_h_hat
    assert fm <= 0.5 * (fa + fb) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 10.0))
def test_ess_bounded_by_replicas(s):
    e = S.h_from_log_norms(_L, s, 4)
    assert 1.0 - 1e-9 <= e.ess <= e.replicas * (1 + 1e-12)
