"""Small dense real linear algebra with a fixed summation order.

Every routine accepts a single matrix/vector or a stack of them (leading batch
axes).  Products are accumulated column by column in index order so a stacked
call gives bit-identical results to the same call on any sub-stack.
"""
from __future__ import annotations

import numpy as np

POWER_MAX_ITER = 10_000
POWER_TOL = 1e-12
PIVOT_TOL = 1e-12


class Singular(ArithmeticError):
    """A pivot fell below the relative singularity threshold."""


def mat_vec(M, x) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if M.shape[-1] != x.shape[-1] or M.shape[-2] != M.shape[-1]:
        raise ValueError(f"dimension mismatch: {M.shape} @ {x.shape}")
    y = M[..., :, 0] * x[..., None, 0]
    for j in range(1, M.shape[-1]):
        y = y + M[..., :, j] * x[..., None, j]
    return y


def mat_mat(M, N) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    if M.shape[-1] != N.shape[-2]:
        raise ValueError(f"dimension mismatch: {M.shape} @ {N.shape}")
    C = M[..., :, 0, None] * N[..., None, 0, :]
    for k in range(1, M.shape[-1]):
        C = C + M[..., :, k, None] * N[..., None, k, :]
    return C


def transpose(M) -> np.ndarray:
    return np.swapaxes(np.asarray(M, dtype=np.float64), -1, -2)


def vec_norm(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.sum(x * x, axis=-1))


def _rayleigh_iterate(G, v, max_iter, tol):
    rq = np.einsum("...i,...i->...", v, mat_vec(G, v))
    active = np.ones(rq.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)
        w = mat_vec(G[idx], v[idx])
        nw = vec_norm(w)
        ok = nw > 0
        vn = np.where(ok[..., None], w / np.where(ok, nw, 1.0)[..., None], v[idx])
        new = np.einsum("...i,...i->...", vn, mat_vec(G[idx], vn))
        done = (np.abs(new - rq[idx]) <= tol * np.abs(new)) | ~ok
        v[idx] = vn
        rq[idx] = np.where(ok, new, rq[idx])
        sub = active[idx]
        sub[done] = False
        active[idx] = sub
    return rq


def _top_direction(G, squarings):
    """Power iteration on G^(2^k) by repeated squaring, from the all-ones vector.

    The normalised powers converge to the projector on the top eigenspace, so
    even a tiny spectral gap is resolved after a few dozen squarings.  When
    the start vector is (numerically) orthogonal to that eigenspace the
    heaviest column of the power is used instead.
    """
    n, d, _ = G.shape
    P = G / np.sqrt(np.sum(G * G, axis=(-2, -1)))[:, None, None]
    active = np.arange(n)
    for _ in range(squarings):
        Pa = P[active]
        Q = mat_mat(Pa, Pa)
        Q = Q / np.sqrt(np.sum(Q * Q, axis=(-2, -1)))[:, None, None]
        moved = np.max(np.abs(Q - Pa), axis=(-2, -1)) > 1e-15
        P[active] = Q
        active = active[moved]
        if not active.size:
            break
    v = mat_vec(P, np.full((n, d), 1.0 / np.sqrt(d)))
    nv = vec_norm(v)
    cols = np.sum(P * P, axis=-2)
    best = np.argmax(cols, axis=-1)
    weak = nv <= 1e-8 * np.sqrt(cols[np.arange(n), best])
    if weak.any():
        v[weak] = P[np.flatnonzero(weak), :, best[weak]]
        nv = vec_norm(v)
    return v / nv[:, None]


def operator_norm(M, max_iter: int = POWER_MAX_ITER, tol: float = POWER_TOL):
    """Spectral norm sup_{|x|=1} |Mx| by power iteration on M^T M.

    The start vector is pushed through repeated squarings of M^T M first, so
    the final Rayleigh-quotient iteration (tolerance ``tol``) starts essentially
    on the top singular direction.  The result is never below the largest
    column norm.
    """
    M = np.asarray(M, dtype=np.float64)
    scalar = M.ndim == 2
    Mb = M.reshape((-1,) + M.shape[-2:])
    d = Mb.shape[-1]
    if d == 1:
        out = np.abs(Mb[:, 0, 0])
        return float(out[0]) if scalar else out.reshape(M.shape[:-2])
    out = np.zeros(len(Mb))
    nz = np.flatnonzero(np.any(Mb != 0, axis=(-2, -1)))
    if nz.size:
        Mz = Mb[nz]
        # rescale so that M^T M can neither overflow nor underflow
        scale = np.max(np.abs(Mz), axis=(-2, -1))
        Mz = Mz / scale[:, None, None]
        G = mat_mat(transpose(Mz), Mz)
        v = _top_direction(G, 64)
        rq = _rayleigh_iterate(G, v, max_iter, tol)
        cmax = np.max(np.sum(Mz * Mz, axis=-2), axis=-1)
        out[nz] = scale * np.sqrt(np.maximum(rq, cmax))
    return float(out[0]) if scalar else out.reshape(M.shape[:-2])


def invert_batch(M):
    """Gauss-Jordan with partial pivoting over a stack.

    Returns ``(inverse, singular_mask)``; singular entries are left as NaN.
    A pivot counts as singular when it is below ``PIVOT_TOL`` times the
    largest magnitude in its (original) row.
    """
    M = np.array(M, dtype=np.float64)
    shape = M.shape
    A = M.reshape((-1,) + shape[-2:]).copy()
    n, d, _ = A.shape
    scale = np.max(np.abs(A), axis=-1)
    inv = np.broadcast_to(np.eye(d), A.shape).copy()
    singular = np.zeros(n, dtype=bool)
    rows = np.arange(n)
    for k in range(d):
        p = k + np.argmax(np.abs(A[:, k:, k]), axis=-1)
        if np.any(p != k):
            for arr in (A, inv, scale[..., None]):
                tmp = arr[rows, k].copy()
                arr[rows, k] = arr[rows, p]
                arr[rows, p] = tmp
        piv = A[:, k, k]
        bad = np.abs(piv) <= PIVOT_TOL * scale[:, k]
        singular |= bad
        piv = np.where(bad, 1.0, piv)
        A[:, k, :] /= piv[:, None]
        inv[:, k, :] /= piv[:, None]
        for i in range(d):
            if i == k:
                continue
            f = A[:, i, k].copy()
            A[:, i, :] -= f[:, None] * A[:, k, :]
            inv[:, i, :] -= f[:, None] * inv[:, k, :]
    inv[singular] = np.nan
    return inv.reshape(shape), singular.reshape(shape[:-2])


def invert(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError("invert needs a square matrix")
    inv, singular = invert_batch(M)
    if np.any(singular):
        raise Singular("matrix is singular to working precision")
    return inv
