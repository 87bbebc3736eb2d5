import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kesten.linalg import Singular, invert, mat_mat, mat_vec, operator_norm, vec_norm

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=finite)


dims = st.integers(1, 5)


def test_small_examples():
    assert operator_norm(np.eye(4)) == pytest.approx(1.0, rel=1e-12)
    assert operator_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0, rel=1e-12)
    assert operator_norm(np.zeros((3, 3))) == 0.0
    assert np.array_equal(mat_vec([[1, 2], [3, 4]], [1, 1]), [3.0, 7.0])
    x = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(mat_vec(np.eye(3), x), x)
    assert np.array_equal(mat_vec(np.zeros((3, 3)), x), np.zeros(3))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        mat_vec(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        mat_mat(np.eye(2), np.eye(3))


def test_norm_against_sphere_sampling():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((5, 5))
    v = rng.standard_normal((100_000, 5))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    brute = np.max(np.linalg.norm(v @ M.T, axis=1))
    nrm = operator_norm(M)
    assert nrm >= brute
    assert nrm == pytest.approx(brute, rel=1e-3) or nrm <= brute * 1.3
    assert nrm == pytest.approx(np.linalg.norm(M, 2), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(dims.flatmap(lambda d: st.tuples(square(d), square(d))))
def test_submultiplicative(pair):
    M, N = pair
    assert operator_norm(mat_mat(M, N)) <= operator_norm(M) * operator_norm(N) * (1 + 1e-9) + 1e-300


@settings(max_examples=200, deadline=None)
@given(dims.flatmap(lambda d: st.tuples(square(d), arrays(np.float64, (d,), elements=finite))))
def test_norm_dominates_action(pair):
    M, x = pair
    nx = vec_norm(x)
    if nx == 0:
        return
    assert operator_norm(M) >= vec_norm(mat_vec(M, x)) / nx - 1e-9


@settings(max_examples=200, deadline=None)
@given(dims.flatmap(square))
def test_norm_matches_svd(M):
    want = np.linalg.norm(M, 2)
    assert operator_norm(M) == pytest.approx(want, rel=1e-10, abs=1e-12)
    cols = np.sqrt((M * M).sum(axis=0)).max()
    assert operator_norm(M) >= cols / np.sqrt(M.shape[0]) - 1e-12


def test_batched_equals_single():
    rng = np.random.default_rng(1)
    Ms = rng.standard_normal((20, 3, 3))
    batch = operator_norm(Ms)
    assert np.array_equal(batch, [operator_norm(M) for M in Ms])
    Ns = rng.standard_normal((20, 3, 3))
    assert np.array_equal(mat_mat(Ms, Ns)[7], mat_mat(Ms[7], Ns[7]))


def test_invert_examples():
    assert np.array_equal(invert(np.eye(3)), np.eye(3))
    assert np.allclose(invert(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), rtol=0, atol=1e-15)
    with pytest.raises(Singular):
        invert(np.diag([1.0, 0.0]))


def _cofactor_det(M):
    if len(M) == 1:
        return M[0][0]
    return sum((-1) ** j * M[0][j] * _cofactor_det([row[:j] + row[j + 1:] for row in M[1:]])
               for j in range(len(M)))


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_arch_companion_invertible(p):
    from kesten.models import Arch
    alphas = (1.0,) + tuple(0.1 * (i + 1) for i in range(p))
    m = Arch(alphas)
    u = np.array([[0.8]])
    A = m.draw(u)[0][0]
    w = m.noise(u)[0]
    det = _cofactor_det(A.tolist())
    assert abs(abs(det) - alphas[-1] * w * w) < 1e-12
    assert np.allclose(mat_mat(A, invert(A)), np.eye(p), atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(dims.flatmap(square))
def test_invert_involution(M):
    M = M + 25.0 * np.eye(M.shape[0])   # diagonally dominant: well conditioned
    assert np.allclose(invert(invert(M)), M, rtol=1e-8, atol=1e-8)
    assert np.max(np.abs(mat_mat(M, invert(M)) - np.eye(M.shape[0]))) <= 1e-8
