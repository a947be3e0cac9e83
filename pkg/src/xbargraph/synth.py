"""Synthetic edge-list generation for benchmarks and density sweeps."""

import numpy as np

from .graph import EdgeListGraph


def gen_uniform(num_vertices: int, density: float, *,
                weight_range: tuple[int, int] = (1, 1),
                seed: int = 0) -> EdgeListGraph:
    """Uniform random digraph without self loops.

    ``density`` is the fraction of the V*(V-1) possible directed edges;
    the edge count is rounded, so tiny graphs may come out empty.
    """
    if num_vertices < 1:
        raise ValueError("need at least one vertex")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    lo, hi = weight_range
    if not (1 <= lo <= hi <= 0xFFFE):
        raise ValueError("weights must satisfy 1 <= lo <= hi <= 65534")
    v = num_vertices
    target = int(round(density * v * (v - 1)))
    target = min(target, v * (v - 1))
    rng = np.random.default_rng(seed)
    keys = np.empty(0, dtype=np.int64)
    want = target
    while keys.size < target:
        # oversample, reject self loops and duplicates, top up until full
        draw = rng.integers(0, v * v, size=max(4 * want, 64), dtype=np.int64)
        draw = draw[draw // v != draw % v]
        keys = np.unique(np.concatenate([keys, draw]))
        want = target - keys.size
    if keys.size > target:
        keys = rng.choice(keys, size=target, replace=False)
        keys.sort()
    src = (keys // v).astype(np.uint32)
    dst = (keys % v).astype(np.uint32)
    if lo == hi:
        w = np.full(target, lo, dtype=np.float64)
    else:
        w = rng.integers(lo, hi + 1, size=target).astype(np.float64)
    return EdgeListGraph(num_vertices=v, src=src, dst=dst, weight=w)
