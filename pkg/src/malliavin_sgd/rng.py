"""Keyed, counter-based Brownian increments.

Every (root seed, trial, iteration) triple selects a Philox key.  Path ``l``
owns a fixed slice of the Philox counter space, so any block of paths can be
generated on its own and concatenates bit-identically with its neighbours.
Uniforms come from the top 53 bits of each 64-bit word and are mapped to
normals by the inverse normal CDF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import UsageError

NORMAL_METHOD = "philox4x64-inverse-cdf"


@dataclass(frozen=True)
class BatchMeta:
    seed: int
    trial: int
    iteration: int
    M: int
    n: int
    d: int
    dt: float
    path_offset: int = 0
    normal_method: str = NORMAL_METHOD


@dataclass(frozen=True)
class IncrementBatch:
    """Brownian increments laid out ``[path, step, dim]``, each ~ N(0, dt)."""

    data: np.ndarray
    meta: BatchMeta

    @property
    def shape(self):
        return self.data.shape


def philox_key(root_seed: int, trial: int, iteration: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(trial), int(iteration)))
    return ss.generate_state(2, np.uint64)


def _words_per_path(n: int, d: int) -> int:
    # Philox emits 4 words per counter tick; pad each path to a whole tick
    return -(-(n * d) // 4) * 4


def standard_normals(root_seed, trial, iteration, M, n, d, path_offset=0) -> np.ndarray:
    """N(0,1) draws of shape ``(M, n, d)`` for paths ``path_offset .. path_offset+M-1``."""
    wpp = _words_per_path(n, d)
    gen = np.random.Philox(
        key=philox_key(root_seed, trial, iteration),
        counter=[path_offset * (wpp // 4), 0, 0, 0],
    )
    raw = gen.random_raw(M * wpp).reshape(M, wpp)[:, : n * d]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u).reshape(M, n, d)


def sample_increments(
    root_seed: int,
    trial: int,
    iteration: int,
    M: int,
    n: int,
    d: int,
    dt: float,
    path_offset: int = 0,
) -> IncrementBatch:
    if min(M, n, d) < 1:
        raise UsageError(f"increment batch must be non-empty, got M={M}, n={n}, d={d}")
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    if path_offset < 0:
        raise UsageError("path_offset must be non-negative")
    z = standard_normals(root_seed, trial, iteration, M, n, d, path_offset)
    z *= np.sqrt(dt)
    meta = BatchMeta(int(root_seed), int(trial), int(iteration), M, n, d, float(dt), path_offset)
    return IncrementBatch(z, meta)


def iter_blocks(total: int, block: int):
    """Yield ``(offset, size)`` pairs covering ``range(total)``."""
    for start in range(0, total, block):
        yield start, min(block, total - start)
