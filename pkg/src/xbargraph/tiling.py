"""Tile ordering: padding, global cell ranks, edge sorting, binary format.

The accelerator streams a V x V adjacency grid as nested tiles.  The grid is
split into B x B blocks (the out-of-core load unit), each block into
C x (C*N*G) subgraphs (what one pass over the graph-engine cluster consumes),
and each subgraph into individual cells.  Every traversal level is column
major, so the full traversal visits, in order:

    blocks     B(0,0), B(1,0), ... down the first block column, then B(0,1) ...
    subgraphs  within a block: down a subgraph column, then the next column
    cells      within a subgraph: down a cell column, then the next column

``global_edge_id`` ranks a cell (i, j) in this traversal.  Sorting edges by
that rank is the whole preprocessing step: the engine can then stream tiles
without ever materialising empty ones.

All coordinates are zero based.
"""

import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .graph import EdgeListGraph

MAGIC = b"GRPR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIHHHIQ")
_RECORD_DTYPE = np.dtype([("src", "<u4"), ("dst", "<u4"), ("weight", "<u2")])

#: largest storable edge weight; 0xFFFF is reserved as the no-edge marker.
WEIGHT_MAX = 0xFFFE


class FileFormatError(ValueError):
    """Corrupt or foreign preprocessed-graph file."""


class TileOrderError(ValueError):
    """Edges fed to the tile streamer were not sorted by global rank."""


@dataclass(frozen=True)
class TilingParams:
    """Grid geometry.  c: crossbar dimension, n: crossbars per engine,
    g: engines in the cluster, b: block size, v: padded vertex count."""

    c: int
    n: int
    g: int
    b: int
    v: int

    def __post_init__(self):
        for name in ("c", "n", "g", "b", "v"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.b % self.tile_cols != 0:
            raise ValueError("b must be a multiple of c*n*g")
        if self.v % self.b != 0:
            raise ValueError("v must be a multiple of b")

    @property
    def tile_cols(self) -> int:
        """Destination width of one subgraph: c*n*g."""
        return self.c * self.n * self.g

    @property
    def cells_per_subgraph(self) -> int:
        return self.c * self.tile_cols

    @property
    def sub_rows_per_block(self) -> int:
        return self.b // self.c

    @property
    def sub_cols_per_block(self) -> int:
        return self.b // self.tile_cols

    @property
    def subs_per_block(self) -> int:
        return self.sub_rows_per_block * self.sub_cols_per_block

    @property
    def blocks_per_dim(self) -> int:
        return self.v // self.b

    @property
    def n_tile_rows(self) -> int:
        """Total subgraph row positions across the padded grid."""
        return self.v // self.c

    @property
    def n_chunks(self) -> int:
        """Total destination chunks (subgraph columns) across the grid."""
        return self.v // self.tile_cols

    @property
    def total_subgraphs(self) -> int:
        return self.n_tile_rows * self.n_chunks


def pad_params(num_vertices: int, c: int, n: int, g: int,
               b: int | None = None) -> TilingParams:
    """Round b up to a multiple of c*n*g and v up to a multiple of b.

    ``b=None`` selects a single block covering the padded vertex range.
    """
    if num_vertices <= 0:
        raise ValueError("num_vertices must be positive")
    if min(c, n, g) <= 0:
        raise ValueError("c, n, g must be positive")
    tile_cols = c * n * g
    if b is None:
        b = num_vertices
    if b <= 0:
        raise ValueError("b must be positive")
    b = ((b + tile_cols - 1) // tile_cols) * tile_cols
    v = ((num_vertices + b - 1) // b) * b
    return TilingParams(c=c, n=n, g=g, b=b, v=v)


# ---- Traversal rank math (scalar or numpy array arguments) ---------------

def block_coords(i, j, b: int):
    """Block coordinates (B_i, B_j) holding cell (i, j)."""
    return i // b, j // b


def block_order(b_i, b_j, v: int, b: int):
    """Column-major rank of block (B_i, B_j)."""
    return b_i + (v // b) * b_j


def _order_parts(i, j, p: TilingParams):
    b_i = i // p.b
    b_j = j // p.b
    ip = i - b_i * p.b
    jp = j - b_j * p.b
    s_i = ip // p.c
    s_j = jp // p.tile_cols
    block_rank = b_i + p.blocks_per_dim * b_j
    sub_rank = s_i + s_j * p.sub_rows_per_block + block_rank * p.subs_per_block
    cell_rank = (ip - s_i * p.c) + (jp - s_j * p.tile_cols) * p.c
    return sub_rank, cell_rank


def subgraph_order(i, j, params: TilingParams):
    """Global column-major rank of the subgraph holding cell (i, j)."""
    return _order_parts(i, j, params)[0]


def intra_order(i, j, params: TilingParams):
    """Column-major rank of cell (i, j) inside its subgraph."""
    return _order_parts(i, j, params)[1]


def global_edge_id(i, j, params: TilingParams):
    """Traversal rank of cell (i, j) over the whole padded grid.

    A bijection from [0, v) x [0, v) onto [0, v*v).
    """
    sub_rank, cell_rank = _order_parts(i, j, params)
    return sub_rank * params.cells_per_subgraph + cell_rank


# ---- Preprocessed edge list ----------------------------------------------

@dataclass
class OrderedEdgeList:
    """Edges sorted by global traversal rank, weights quantised to uint16.

    ``num_vertices`` is the unpadded vertex count; ``params.v`` the padded
    one.  ``clamped_weights`` counts weights that exceeded the storable
    maximum and were clipped.
    """

    params: TilingParams
    num_vertices: int
    order_ids: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    clamped_weights: int = 0

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])


def preprocess_edges(graph: EdgeListGraph, params: TilingParams) -> OrderedEdgeList:
    """Quantise weights, rank every edge, and sort by rank.

    Weights are rounded half-to-even to integers and clamped to
    [0, 0xFFFE]; 0xFFFF stays reserved for "no edge".
    """
    if graph.num_vertices > params.v:
        raise ValueError("params do not cover the graph; call pad_params first")
    wq = np.round(graph.weight)
    clamped = int(np.count_nonzero(wq > WEIGHT_MAX))
    wq = np.clip(wq, 0, WEIGHT_MAX).astype(np.uint16)
    ids = global_edge_id(graph.src.astype(np.int64),
                         graph.dst.astype(np.int64), params).astype(np.uint64)
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    if ids.size > 1:
        # graph edges are unique pairs, so ranks must be strictly increasing
        assert np.all(ids[1:] > ids[:-1])
    return OrderedEdgeList(params=params,
                           num_vertices=graph.num_vertices,
                           order_ids=ids,
                           src=graph.src[order].copy(),
                           dst=graph.dst[order].copy(),
                           weight=wq[order],
                           clamped_weights=clamped)


# ---- Dense tile streaming -------------------------------------------------

@dataclass
class SubgraphTile:
    """One dense subgraph: c rows of sources by c*n*g destination columns.

    ``values`` holds the stored edge weights with 0 where no edge exists.
    Only non-empty subgraphs are ever materialised.
    """

    si: int
    block: tuple
    sub: tuple
    src_base: int
    dst_base: int
    values: np.ndarray
    nnz: int


def _decode_subgraph_rank(si, p: TilingParams):
    """Invert the subgraph rank into block and in-block coordinates."""
    block_rank = si // p.subs_per_block
    rem = si % p.subs_per_block
    s_j = rem // p.sub_rows_per_block
    s_i = rem % p.sub_rows_per_block
    b_j = block_rank // p.blocks_per_dim
    b_i = block_rank % p.blocks_per_dim
    return b_i, b_j, s_i, s_j


def tile_stream(ol: OrderedEdgeList) -> Iterator[SubgraphTile]:
    """Yield dense tiles for every non-empty subgraph, ascending rank.

    Raises TileOrderError if the edge list is not rank sorted.
    """
    p = ol.params
    cells = p.cells_per_subgraph
    si_of_edge = ol.order_ids // cells
    if si_of_edge.size > 1 and np.any(np.diff(ol.order_ids.astype(np.int64)) <= 0):
        raise TileOrderError("edge list is not sorted by global rank")
    starts = np.flatnonzero(np.r_[True, si_of_edge[1:] != si_of_edge[:-1]]) \
        if si_of_edge.size else np.empty(0, dtype=np.int64)
    ends = np.r_[starts[1:], si_of_edge.size] if starts.size else starts
    for s, e in zip(starts, ends):
        si = int(si_of_edge[s])
        b_i, b_j, s_i, s_j = _decode_subgraph_rank(si, p)
        src_base = b_i * p.b + s_i * p.c
        dst_base = b_j * p.b + s_j * p.tile_cols
        values = np.zeros((p.c, p.tile_cols), dtype=np.uint16)
        rows = ol.src[s:e].astype(np.int64) - src_base
        cols = ol.dst[s:e].astype(np.int64) - dst_base
        values[rows, cols] = ol.weight[s:e]
        yield SubgraphTile(si=si, block=(int(b_i), int(b_j)),
                           sub=(int(s_i), int(s_j)),
                           src_base=int(src_base), dst_base=int(dst_base),
                           values=values, nnz=int(e - s))


# ---- Binary on-disk format -------------------------------------------------
#
# Little-endian header:
#   magic "GRPR", version u16, num_vertices u32, c u16, n u16, g u16,
#   b u32, num_edges u64
# followed by num_edges records of {src u32, dst u32, weight u16}, sorted by
# global traversal rank.  Ranks are recomputable from the header, so they are
# not stored; the reader recomputes and verifies them.

def write_ordered(ol: OrderedEdgeList, path) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, ol.num_vertices,
                          ol.params.c, ol.params.n, ol.params.g,
                          ol.params.b, ol.num_edges)
    records = np.empty(ol.num_edges, dtype=_RECORD_DTYPE)
    records["src"] = ol.src
    records["dst"] = ol.dst
    records["weight"] = ol.weight
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def read_ordered(path) -> OrderedEdgeList:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FileFormatError("file too short for header")
    magic, version, raw_v, c, n, g, b, num_edges = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"unsupported version {version}")
    body = blob[_HEADER.size:]
    expect = num_edges * _RECORD_DTYPE.itemsize
    if len(body) != expect:
        raise FileFormatError(
            f"expected {expect} record bytes, found {len(body)}")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    params = pad_params(raw_v, c, n, g, b)
    if params.b != b:
        raise FileFormatError("header block size is not self-consistent")
    src = records["src"].astype(np.uint32)
    dst = records["dst"].astype(np.uint32)
    if num_edges and (src.max() >= raw_v or dst.max() >= raw_v):
        raise FileFormatError("edge endpoint outside vertex range")
    ids = global_edge_id(src.astype(np.int64), dst.astype(np.int64),
                         params).astype(np.uint64)
    if ids.size > 1 and not np.all(ids[1:] > ids[:-1]):
        raise FileFormatError("records are not sorted by traversal rank")
    return OrderedEdgeList(params=params, num_vertices=raw_v,
                           order_ids=ids, src=src, dst=dst,
                           weight=records["weight"].astype(np.uint16))
