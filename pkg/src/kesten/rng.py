"""Counter-based random numbers (Philox4x32-10), vectorised over streams.

A draw is a pure function of ``(master_seed, stream_id, counter)``: the key is
the 64-bit master seed and the 128-bit Philox counter holds the 64-bit block
counter followed by the 64-bit stream id.  Every block yields two doubles, so
an entire replica population can be advanced in one numpy call and the result
never depends on how replicas are batched or scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_LO = np.uint64(0xFFFFFFFF)
_32 = np.uint64(32)
_11 = np.uint64(11)
_U64 = (1 << 64) - 1


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Philox4x32 bijection on uint64 arrays holding 32-bit words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _32) ^ c1 ^ k0,
            p1 & _LO,
            (p0 >> _32) ^ c3 ^ k1,
            p0 & _LO,
        )
        k0 = (k0 + _W0) & _LO
        k1 = (k1 + _W1) & _LO
    return c0, c1, c2, c3


def _split(v):
    v = np.asarray(v, dtype=np.uint64)
    return v & _LO, v >> _32


def uniform_blocks(seed: int, streams, counters, n_blocks: int) -> np.ndarray:
    """Uniform doubles in (0, 1) for each stream.

    ``streams`` and ``counters`` are broadcastable uint64 arrays of shape
    ``(n,)``; block ``j`` of stream ``i`` uses counter ``counters[i] + j``.
    Returns an array of shape ``(n, 2 * n_blocks)``.
    """
    seed &= _U64
    streams = np.asarray(streams, dtype=np.uint64).reshape(-1, 1)
    counters = np.asarray(counters, dtype=np.uint64).reshape(-1, 1)
    streams, counters = np.broadcast_arrays(streams, counters)
    ctr = counters + np.arange(n_blocks, dtype=np.uint64)[None, :]
    c0, c1 = _split(ctr)
    c2, c3 = _split(np.broadcast_to(streams, ctr.shape))
    k0, k1 = _split(np.uint64(seed))
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, k0, k1)
    hi = (r0 << _32) | r1
    lo = (r2 << _32) | r3
    out = np.empty(ctr.shape + (2,), dtype=np.float64)
    out[..., 0] = ((hi >> _11).astype(np.float64) + 0.5) * 2.0**-53
    out[..., 1] = ((lo >> _11).astype(np.float64) + 0.5) * 2.0**-53
    return out.reshape(ctr.shape[0], 2 * n_blocks)


def blocks_for(n_uniforms: int) -> int:
    return (n_uniforms + 1) // 2


def derive_seed(seed: int, *labels: int) -> int:
    """Deterministically derive a sub-seed (keeps unrelated tasks uncorrelated)."""
    k0, k1 = _split(np.uint64(seed & _U64))
    words = [np.uint64(x & 0xFFFFFFFF) for x in (labels + (0, 0, 0, 0))[:4]]
    r0, r1, _, _ = philox4x32(*words, k0, k1)
    return int((int(r0) << 32) | int(r1))


@dataclass
class RngStream:
    """A single replica's stream; ``counter`` counts consumed Philox blocks."""

    master_seed: int
    stream_id: int
    counter: int = 0

    def uniforms(self, n: int) -> np.ndarray:
        nb = blocks_for(n)
        u = uniform_blocks(self.master_seed, [self.stream_id], [self.counter], nb)[0]
        self.counter += nb
        return u[:n]

    def gaussian(self, mean: float = 0.0, sd: float = 1.0) -> float:
        if sd < 0:
            raise ValueError("sd must be nonnegative")
        z = float(ndtri(self.uniforms(1)[0]))
        return mean if sd == 0 else mean + sd * z


def rng_draw_gaussian(stream: RngStream, mean: float, sd: float) -> float:
    return stream.gaussian(mean, sd)


def gaussians(seed: int, stream: int, n: int, counter: int = 0) -> np.ndarray:
    """``n`` standard normals from one stream, inverse-CDF transformed."""
    u = uniform_blocks(seed, [stream], [counter], blocks_for(n))[0, :n]
    return ndtri(u)
