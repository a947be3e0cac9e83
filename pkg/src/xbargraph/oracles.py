"""Reference implementations the simulator is verified against.

Everything here is deliberately boring: double-precision power iteration,
queue BFS, binary-heap shortest paths, dense float SpMV.  None of it touches
the crossbar, tiling, or engine code paths.

Integer references mirror the machine's 16-bit ceiling: any distance that
would reach 0xFFFF is reported as 0xFFFF, the unreachable marker.  Edge
weights are at least 1, so every prefix of a representable path is itself
representable and the cap loses nothing else.
"""

import heapq
from collections import deque

import numpy as np

from .fixedpoint import M
from .graph import EdgeListGraph, out_degrees


def exact_pagerank(graph: EdgeListGraph, r: float = 0.85,
                   iterations: int = 20,
                   redistribute_dangling: bool = False) -> np.ndarray:
    """Synchronous power iteration in float64 from the uniform vector.

    Edge weights play no part: every out-edge carries probability
    1/outdegree, so total mass is conserved.
    """
    if not (0.0 < r < 1.0):
        raise ValueError(f"damping must lie in (0, 1), got {r}")
    v = graph.num_vertices
    outdeg = out_degrees(graph)
    p = np.full(v, 1.0 / v)
    contrib_scale = r / outdeg[graph.src]
    dangling = outdeg == 0
    for _ in range(iterations):
        nxt = np.full(v, (1.0 - r) / v)
        if redistribute_dangling:
            nxt += r * p[dangling].sum() / v
        np.add.at(nxt, graph.dst, contrib_scale * p[graph.src])
        p = nxt
    return p


def _adjacency(graph: EdgeListGraph, unit_weights: bool):
    order = np.argsort(graph.src, kind="stable")
    src = graph.src[order]
    dst = graph.dst[order]
    w = np.ones(len(order), dtype=np.int64) if unit_weights \
        else np.round(graph.weight[order]).astype(np.int64)
    ptr = np.zeros(graph.num_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=graph.num_vertices), out=ptr[1:])
    return ptr, dst.astype(np.int64), w


def exact_bfs(graph: EdgeListGraph, source: int) -> np.ndarray:
    """Hop counts from ``source``; M where unreachable."""
    v = graph.num_vertices
    if not (0 <= source < v):
        raise ValueError(f"source vertex {source} outside [0, {v})")
    ptr, dst, _ = _adjacency(graph, unit_weights=True)
    level = np.full(v, M, dtype=np.int64)
    level[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        lu = level[u] + 1
        if lu >= M:
            continue
        for k in range(ptr[u], ptr[u + 1]):
            t = dst[k]
            if level[t] == M:
                level[t] = lu
                q.append(t)
    return level


def exact_sssp(graph: EdgeListGraph, source: int) -> np.ndarray:
    """Shortest path lengths from ``source``; M where unreachable or the
    distance saturates the 16-bit range."""
    v = graph.num_vertices
    if not (0 <= source < v):
        raise ValueError(f"source vertex {source} outside [0, {v})")
    ptr, dst, w = _adjacency(graph, unit_weights=False)
    if w.size and w.min() < 1:
        raise ValueError("sssp requires edge weights >= 1")
    dist = np.full(v, np.iinfo(np.int64).max, dtype=np.int64)
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for k in range(ptr[u], ptr[u + 1]):
            t = dst[k]
            nd = d + w[k]
            if nd < dist[t]:
                dist[t] = nd
                heapq.heappush(heap, (nd, t))
    return np.where(dist >= M, M, dist)


def dense_spmv(graph: EdgeListGraph, x, scale_by_outdegree: bool = True
               ) -> np.ndarray:
    """y[j] = sum over edges (i, j) of x[i] * w / outdeg(i), in float64."""
    v = graph.num_vertices
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (v,):
        raise ValueError(f"input vector must have length {v}")
    w = np.round(np.clip(graph.weight, 0, 0xFFFE))
    if scale_by_outdegree:
        w = w / out_degrees(graph)[graph.src]
    y = np.zeros(v)
    np.add.at(y, graph.dst, w * x[graph.src])
    return y
