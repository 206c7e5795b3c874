"""Reproducible Gaussian noise organised in fixed-size path blocks.

Base draw ``p`` lives in block ``p // BLOCK_PATHS``; every block has its own
Philox generator keyed by ``SeedSequence(seed, spawn_key=(block,))``. A
path's noise therefore depends only on (seed, p, n_steps, n_dim), never on
how many paths are requested, how they are chunked, or in which order
blocks are evaluated. Means are accumulated with ``math.fsum`` so the
final statistics are order independent as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BLOCK_PATHS = 1024
_BLOCKS_PER_CHUNK = 16


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    seed: int
    antithetic: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")

    @property
    def n_base(self):
        """Independent base draws (pairs when antithetic)."""
        return self.n_paths // 2 if self.antithetic else self.n_paths


def block_normals(seed, block, n_steps, n_dim):
    """Standard normals of one block, shape ``(n_steps, n_dim, BLOCK_PATHS)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.standard_normal((n_steps, n_dim, BLOCK_PATHS))


def base_normals(seed, start, stop, n_steps, n_dim):
    """Normals for base draws ``start..stop-1``, shape ``(n_steps, n_dim, stop-start)``."""
    b0, b1 = start // BLOCK_PATHS, (stop - 1) // BLOCK_PATHS
    parts = [block_normals(seed, b, n_steps, n_dim) for b in range(b0, b1 + 1)]
    arr = np.concatenate(parts, axis=2) if len(parts) > 1 else parts[0]
    off = start - b0 * BLOCK_PATHS
    return arr[:, :, off:off + (stop - start)]


def chunk_ranges(n_base, order="forward"):
    size = BLOCK_PATHS * _BLOCKS_PER_CHUNK
    ranges = [(s, min(s + size, n_base)) for s in range(0, n_base, size)]
    if order == "reverse":
        ranges.reverse()
    return ranges


def path_normals(cfg, start, stop, n_dim):
    """Normals for paths of base draws ``start..stop-1`` with antithetic mirrors appended.

    Returns ``(n_steps, n_dim, m)`` or ``(n_steps, n_dim, 2m)``; in the latter
    case path ``i + m`` is the mirror of path ``i``.
    """
    xi = base_normals(cfg.seed, start, stop, cfg.n_steps, n_dim)
    if cfg.antithetic:
        return np.concatenate([xi, -xi], axis=2)
    return xi


def pair_average(values, cfg):
    """Collapse per-path values to independent samples."""
    if not cfg.antithetic:
        return values
    m = values.shape[-1] // 2
    return 0.5 * (values[..., :m] + values[..., m:])


def mean_se(samples):
    """Exactly rounded mean and its standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)
