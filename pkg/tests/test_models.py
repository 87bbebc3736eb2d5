import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtri

from kesten.models import (Arch, Explicit, Garch, InvalidModel, Scalar, SgdMomentum, SgdQuadratic,
                           arch_squared_series_step, constant, dimension, gaussian, lognormal, model_from_dict,
                           sample, sgd_isotropic, two_point, uniform)
from kesten.paths import draw_steps
from kesten.rng import RngStream


def test_sgd_zero_learning_rate_is_identity():
    m = SgdQuadratic(0.0, 3, np.eye(2).tolist())
    A, B = draw_steps(m, 5, np.arange(100), 0, 4)
    assert np.array_equal(A, np.broadcast_to(np.eye(2), A.shape))
    assert not B.any()


def test_sgd_layout_matches_definition():
    m = SgdQuadratic(0.3, 2, [[2.0, 0.5], [0.5, 1.0]], 1.5)
    u = RngStream(1, 0).uniforms(m.n_uniforms)
    H, g = m.hessian_and_gradient(u)
    z = ndtri(u).reshape(2, 3)
    L = np.linalg.cholesky(np.array([[2.0, 0.5], [0.5, 1.0]]))
    a = z[:, :2] @ L.T
    b = 1.5 * z[:, 2]
    assert np.allclose(H, (a[:, :, None] * a[:, None, :]).mean(axis=0))
    assert np.allclose(g, (b[:, None] * a).mean(axis=0))
    A, B = m.draw(u)
    assert np.allclose(A, np.eye(2) - 0.3 * H)
    assert np.allclose(B, 0.3 * g)


def test_momentum_without_momentum_matches_vanilla_block():
    inner = SgdQuadratic(0.7, 1, np.eye(3).tolist())
    mom = SgdMomentum(0.7, 0.0, inner)
    u = RngStream(3, 9).uniforms(inner.n_uniforms)
    C, D = mom.draw(u)
    A, B = inner.draw(u)
    assert np.allclose(C[:3, :3], A)
    assert np.allclose(D[:3], B)
    assert dimension(mom) == 6


def test_arch_layout():
    m = Arch((1.0, 0.5, 0.25))
    u = np.array([[0.9]])
    w = m.noise(u)[0]
    A, B = m.draw(u)
    assert np.allclose(A[0], [[0.5 * w * w, 0.25 * w * w], [1.0, 0.0]])
    assert np.allclose(B[0], [w * w, 0.0])


def test_garch_layout():
    m = Garch(0.2, 0.3, (0.4, 0.1))
    u = np.array([[0.3]])
    w = ndtri(0.3)
    A, B = m.draw(u)
    assert np.allclose(A[0], [[0.4 + 0.3 * w * w, 0.1], [1.0, 0.0]])
    assert np.allclose(B[0], [0.2, 0.0])


def test_dimensions():
    assert dimension(Scalar(constant(1.0), constant(0.0))) == 1
    assert dimension(Arch((1.0, 0.2, 0.1, 0.3))) == 3
    assert dimension(Garch(1.0, 0.1, (0.2, 0.3, 0.4))) == 3
    assert dimension(SgdMomentum(0.1, 0.5, sgd_isotropic(0.1, d=4))) == 8


def test_arch_series_step_examples():
    assert arch_squared_series_step([0.0, 0.0], 1.0, (0.7, 0.2, 0.1)) == 0.7
    assert arch_squared_series_step([2.0], 2.0, (1.0, 0.5)) == 8.0
    with pytest.raises(ValueError):
        arch_squared_series_step([-1.0], 1.0, (1.0, 0.5))


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_vector_step_is_scalar_step_with_shifted_history(p):
    rng = np.random.default_rng(p)
    alphas = (0.5,) + tuple(rng.uniform(0.05, 0.5, p))
    m = Arch(alphas)
    x = rng.uniform(0, 3, p)
    u = np.array([[0.77]])
    w = m.noise(u)[0]
    A, B = m.draw(u)
    nxt = A[0] @ x + B[0]
    assert nxt[0] == pytest.approx(arch_squared_series_step(x, w, alphas), rel=1e-14)
    assert np.array_equal(nxt[1:], x[:-1])


def test_positivity_of_arch_and_garch_paths():
    for m in (Arch((1.0, 0.6, 0.3)), Garch(1.0, 0.4, (0.3, 0.2))):
        x = np.zeros((200, m.dim))
        A, B = draw_steps(m, 1, np.arange(200), 0, 300)
        for j in range(300):
            x = np.einsum("nij,nj->ni", A[:, j], x) + B[:, j]
            assert (x >= 0).all()


def test_explicit_frequencies():
    probs = (0.2, 0.5, 0.3)
    m = Explicit(tuple((p, [[float(k)]], [0.0]) for k, p in enumerate(probs)))
    A, _ = draw_steps(m, 42, np.arange(1000), 0, 100)
    vals = A.reshape(-1)
    n = vals.size
    for k, p in enumerate(probs):
        f = np.mean(vals == k)
        assert abs(f - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_sgd_large_batch_concentrates():
    devs = []
    for m in (1, 8, 64, 512):
        model = SgdQuadratic(0.5, m, np.eye(2).tolist())
        A, _ = draw_steps(model, 0, np.arange(400), 0, 1)
        devs.append(np.mean(np.linalg.norm(A[:, 0] - 0.5 * np.eye(2), 2, axis=(1, 2))))
    assert all(a > b for a, b in zip(devs, devs[1:]))


@pytest.mark.parametrize("build", [
    lambda: Explicit(((0.5, [[1.0]], [0.0]), (0.6, [[2.0]], [0.0]))),
    lambda: Explicit(((1.0, [[1.0]], [0.0]), (0.0, [[1.0]], [0.0]))),
    lambda: Arch((1.0, 0.0, 0.5)),
    lambda: Arch((0.0, 0.5)),
    lambda: Arch((1.0, 0.5, 0.0)),
    lambda: Garch(1.0, 0.5, (0.3, 0.0)),
    lambda: SgdQuadratic(0.1, 1, [[1.0, 2.0], [0.0, 1.0]]),
    lambda: SgdQuadratic(0.1, 1, [[1.0, 0.0], [0.0, -1.0]]),
    lambda: SgdQuadratic(-0.1, 1, [[1.0]]),
    lambda: SgdMomentum(0.1, 1.0, sgd_isotropic(0.1)),
    lambda: two_point(1.0, 2.0, 1.5),
    lambda: lognormal(0.0, -1.0),
])
def test_invalid_models_rejected(build):
    with pytest.raises(InvalidModel):
        build()


def test_sample_advances_stream():
    m = Scalar(uniform(0.0, 1.0), gaussian(0.0, 1.0))
    rng = RngStream(8, 1)
    s1, s2 = sample(m, rng), sample(m, rng)
    assert rng.counter == 2
    assert s1.A.shape == (1, 1) and s1.B.shape == (1,)
    assert s1.A[0, 0] != s2.A[0, 0]


models = st.sampled_from([
    Scalar(lognormal(-0.5, 1.0), gaussian(0.0, 1.0)),
    Scalar(two_point(2.0, 0.5, 0.6), constant(0.0)),
    Arch((1.0, 0.5, 0.25), 0.1, 2.0),
    Garch(1.0, 0.3, (0.2, 0.1)),
    SgdQuadratic(0.3, 2, [[2.0, 0.5], [0.5, 1.0]], 0.7),
    SgdMomentum(0.2, 0.9, sgd_isotropic(1.0, d=2)),
    Explicit(((0.25, [[1.0, 2.0], [0.0, 1.0]], [1.0, 0.0]), (0.75, [[0.0, 0.0], [1.0, 0.0]], [0.0, 3.0]))),
])


@settings(max_examples=30, deadline=None)
@given(models, st.integers(0, 2**64 - 1))
def test_descriptor_round_trip(m, seed):
    m2 = model_from_dict(m.to_dict())
    assert m2.to_dict() == m.to_dict()
    a = draw_steps(m, seed, np.arange(3), 0, 2)
    b = draw_steps(m2, seed, np.arange(3), 0, 2)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
