import math

import numpy as np
import pytest

from kesten import audit as AU
from kesten import spectral as S
from kesten.models import Arch, Explicit, Scalar, constant, gaussian, lognormal, pareto, sgd_isotropic
from oracles import gaussian_tail_ratio


def det(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return Explicit(((1.0, A.tolist(), list(np.atleast_1d(np.asarray(B, dtype=float)))),))


def test_fixed_point_identity_fails():
    e = AU.check_fixed_point(det(np.eye(2), [0.0, 0.0]), replicas=100)
    assert e.verdict == AU.FAIL and e.statistic == 1.0


def test_fixed_point_affine_contraction_fails_at_two():
    m = det([[0.5]], [1.0])
    assert AU.check_fixed_point(m, candidates=[[2.0]], replicas=100).verdict == AU.FAIL
    assert AU.check_fixed_point(m, candidates=[[0.0], [1.0]], replicas=100).verdict == AU.PASS


def test_fixed_point_arch_passes():
    e = AU.check_fixed_point(Arch((1.0, 0.3, 0.2)), replicas=5000, seed=1)
    assert e.verdict == AU.PASS


def test_default_candidates_include_arch_point():
    m = Arch((1.0, 0.3, 0.2))
    c = AU.default_candidates(m)
    assert np.array_equal(c[0], np.zeros(2))
    assert any(np.allclose(x, -2.0 * np.ones(2)) for x in c)   # kappa = 1 / (0.3 + 0.2)


def test_contraction_criterion():
    assert AU.check_contraction_criterion(det(2 * np.eye(2), [0, 0]), replicas=100).verdict == AU.PASS
    e = AU.check_contraction_criterion(det(0.5 * np.eye(2), [0, 0]), replicas=100)
    assert e.verdict == AU.INCONCLUSIVE and e.statistic == 0.0
    with pytest.raises(S.NoRoot):
        S.solve_tail_index(det(0.5 * np.eye(2), [0, 0]), n_steps=4, replicas=100)
    assert AU.check_contraction_criterion(Arch((1.0, 0.5)), replicas=100_000, seed=2).verdict == AU.PASS


def test_drift_examples():
    doubling = det([[2.0]], [0.0])
    e = AU.check_drift_lower_bound(doubling, x_grid=[[1.0], [10.0], [100.0]], replicas=50_000)
    assert e.verdict == AU.PASS and e.statistic == 0.0
    # the origin is a deterministic fixed point of this map, so the default grid must catch it
    assert AU.check_drift_lower_bound(doubling, replicas=100).verdict == AU.FAIL
    assert AU.check_drift_lower_bound(det(np.eye(2), [0, 0]), replicas=100).verdict == AU.FAIL


def test_drift_near_arch_point_is_finite():
    m = Arch((1.0, 10.0))
    e = AU.check_drift_lower_bound(m, replicas=60_000, seed=3)
    assert e.verdict == AU.PASS and math.isfinite(e.statistic)


def test_gaussian_tail_ratio_oracle():
    # P(|B| > zR) / P(|B| > R) for B ~ N(0, 101), the law of A x + B with A, B ~ N(0,1) at |x| = 10
    vals = [gaussian_tail_ratio(z, 10.0, math.sqrt(101.0)) for z in (2, 4, 8)]
    assert vals == pytest.approx([1.457e-1, 2.154e-4, 5.368e-15], rel=1e-3)


def test_tail_ratio_gaussian_passes():
    m = Scalar(gaussian(0.0, 1.0), gaussian(0.0, 1.0))
    e = AU.check_tail_ratio(m, alpha_hat=5.0, R_grid=(3.0, 5.0), replicas=100_000, seed=4)
    assert e.verdict == AU.PASS


def test_tail_ratio_pareto_fails():
    m = Scalar(constant(0.0), pareto(0.5))
    e = AU.check_tail_ratio(m, alpha_hat=1.0, replicas=100_000, seed=5)
    assert e.verdict == AU.FAIL
    assert abs(e.statistic - 0.5) < 0.1


def test_tail_ratio_arch1_passes():
    e = AU.check_tail_ratio(Arch((1.0, 0.5)), alpha_hat=1.0, replicas=100_000, seed=6)
    assert e.verdict == AU.PASS


def test_nondegeneracy():
    from kesten.acceptance import RankOneGaussian
    assert AU.check_nondegeneracy(RankOneGaussian(0.5), n0_max=1, replicas=1000).verdict == AU.PASS
    e = AU.check_nondegeneracy(det([[1.0, 0.0], [0.0, 0.0]], [0, 0]), n0_max=3, replicas=1000)
    assert e.verdict == AU.FAIL and e.statistic == 1.0
    assert AU.check_nondegeneracy(Arch((1.0, 0.4, 0.3)), replicas=2000).verdict == AU.PASS


def test_irreducibility_never_fails():
    reducible = Explicit(((0.5, [[2.0, 1.0], [0.0, 0.5]], [0.0, 0.0]),
                          (0.5, [[0.5, 3.0], [0.0, 2.0]], [0.0, 0.0])))
    assert AU.check_irreducibility(reducible, seed=1).verdict == AU.INCONCLUSIVE
    assert AU.check_irreducibility(sgd_isotropic(10.0, d=2), seed=1).verdict == AU.PASS


def test_unbounded_support_never_fails():
    e = AU.check_unbounded_support(det([[0.5]], [1.0]), steps=2000, chains=16)
    assert e.verdict == AU.INCONCLUSIVE
    m = Scalar(lognormal(-0.5, 1.0), gaussian(0.0, 1.0))
    assert AU.check_unbounded_support(m, steps=5000, chains=32).verdict == AU.PASS


def test_contractive_audit_arch():
    # alpha_1 = 1: E (Z^2)^s = 1 at s = 1, so the tail index is exactly 1
    rep = AU.audit(Arch((1.0, 1.0)), "contractive", budget=100_000, seed=1)
    assert rep.gamma_hat < 0 and rep.all_pass, rep.rows()
    assert rep.alpha_hat == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("model", [Arch((1.0, 10.0)), sgd_isotropic(10.0)], ids=["arch1", "sgd1"])
def test_explosive_audit(model):
    rep = AU.audit(model, "explosive", budget=100_000, seed=2)
    assert rep.gamma_hat > 0 and rep.all_pass, rep.rows()
    fw = S.estimate_lyapunov(model, 32, 4000, seed=3)
    bw = S.estimate_inverse_lyapunov(model, 32, 4000, seed=3)
    assert abs(fw.gamma_hat + bw.gamma_hat) <= 3 * math.hypot(fw.std_err, bw.std_err)


def test_audit_deterministic():
    a = AU.audit(Arch((1.0, 10.0)), "explosive", budget=20_000, seed=9)
    b = AU.audit(Arch((1.0, 10.0)), "explosive", budget=20_000, seed=9)
    assert a.rows() == b.rows()
    with pytest.raises(ValueError):
        AU.audit(Arch((1.0, 10.0)), "critical")


def test_report_lists_sample_sizes():
    rows = AU.audit(Arch((1.0, 1.0)), "contractive", budget=20_000, seed=1).rows()
    rows += AU.audit(Arch((1.0, 10.0)), "explosive", budget=20_000, seed=1).rows()
    rows += AU.audit(sgd_isotropic(10.0, d=2), "explosive", budget=20_000, seed=1).rows()
    for name, verdict, stat, detail in rows:
        assert verdict in (AU.PASS, AU.FAIL, AU.INCONCLUSIVE)
        assert "replicas" in detail or "chains" in detail
