"""Shared step sampling: step t of replica r always uses the same Philox
blocks, whichever routine (exit, Lyapunov, coupling, ...) consumes it."""
from __future__ import annotations

import numpy as np

from .linalg import mat_vec
from .models import Model
from .rng import blocks_for, uniform_blocks

MAX_BLOCK_DOUBLES = 4_000_000


def block_len(model: Model, n_active: int, t: int, cap: int | None = None) -> int:
    """Steps to pre-draw at once: grows with t, bounded by memory."""
    per = max(1, n_active) * max(model.n_uniforms, model.dim * (model.dim + 1))
    k = max(1, min(1024, max(8, t // 4), MAX_BLOCK_DOUBLES // per))
    if cap is not None:
        k = max(1, min(k, cap - t))
    return k


def draw_steps(model: Model, seed: int, streams, t0: int, k: int):
    """(A, B) for steps t0 .. t0+k-1 (0-based) of each stream.

    Shapes ``(n, k, d, d)`` and ``(n, k, d)``.
    """
    bps = blocks_for(model.n_uniforms)
    streams = np.asarray(streams, dtype=np.uint64)
    u = uniform_blocks(seed, streams, np.full(streams.shape, t0 * bps, dtype=np.uint64), k * bps)
    u = u.reshape(streams.size, k, 2 * bps)[..., : model.n_uniforms]
    return model.draw(u)


def step(A, B, x):
    return mat_vec(A, x) + B
