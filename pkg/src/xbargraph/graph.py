"""Graph data model: edge lists, text parsing, sparse views, vertex state.

The canonical in-memory form is a directed edge list over dense integer
vertex ids.  Duplicate (src, dst) pairs collapse to the last occurrence,
matching "later lines override earlier ones" semantics for hand-edited edge
files.  Self loops are kept.
"""

from dataclasses import dataclass

import numpy as np

from .fixedpoint import FxFormat


class ParseError(ValueError):
    """Malformed edge-list text.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class EdgeListGraph:
    """A directed graph as parallel src/dst/weight arrays.

    Invariants: ids in [0, num_vertices); weights finite and non-negative;
    (src, dst) pairs unique and sorted lexicographically.
    """

    num_vertices: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool = True

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])

    @classmethod
    def from_edges(cls, edges, num_vertices: int | None = None,
                   directed: bool = True) -> "EdgeListGraph":
        """Build from an iterable of (src, dst) or (src, dst, weight).

        Missing weights default to 1.  Duplicates keep the last weight seen.
        """
        src, dst, wgt = [], [], []
        for e in edges:
            if len(e) == 2:
                u, v = e
                w = 1.0
            else:
                u, v, w = e
            src.append(u)
            dst.append(v)
            wgt.append(w)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        wgt = np.asarray(wgt, dtype=np.float64)
        if src.size:
            if src.min() < 0 or dst.min() < 0:
                raise ParseError("vertex ids must be non-negative")
            if not np.all(np.isfinite(wgt)) or wgt.min() < 0:
                raise ParseError("weights must be finite and non-negative")
        implied = int(max(src.max(), dst.max())) + 1 if src.size else 0
        if num_vertices is None:
            num_vertices = implied
        elif num_vertices < implied:
            raise ParseError(
                f"vertex id {implied - 1} outside declared count {num_vertices}")
        src, dst, wgt = _dedup_last(src, dst, wgt)
        return cls(num_vertices=num_vertices,
                   src=src.astype(np.uint32),
                   dst=dst.astype(np.uint32),
                   weight=wgt,
                   directed=directed)


def _dedup_last(src, dst, wgt):
    """Drop duplicate (src, dst) pairs, keeping the last occurrence, and
    return edges sorted by (src, dst)."""
    if src.size == 0:
        return src, dst, wgt
    arrival = np.arange(src.size, dtype=np.int64)
    order = np.lexsort((arrival, dst, src))
    s, d, w = src[order], dst[order], wgt[order]
    # last entry of each equal-(src, dst) run survives
    keep = np.ones(s.size, dtype=bool)
    keep[:-1] = (s[:-1] != s[1:]) | (d[:-1] != d[1:])
    return s[keep], d[keep], w[keep]


def parse_edge_list(source, weighted: bool | None = None) -> EdgeListGraph:
    """Parse edge-list text into a graph.

    ``source`` may be a string, an iterable of lines, or a file-like object.
    Each non-comment line is ``src dst`` or ``src dst weight``; ``#`` starts
    a comment.  ``weighted=True`` requires the weight column, ``False``
    forbids it, ``None`` accepts both.  Unweighted edges get weight 1.
    An input with no edges is an error.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source
    edges = []
    for lineno, rawline in enumerate(lines, start=1):
        text = rawline.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) == 2:
            if weighted is True:
                raise ParseError("expected 'src dst weight'", lineno)
            w = 1.0
        elif len(parts) == 3:
            if weighted is False:
                raise ParseError("expected 'src dst'", lineno)
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(f"bad weight {parts[2]!r}", lineno) from None
            if not np.isfinite(w) or w < 0:
                raise ParseError(f"weight must be finite and non-negative, got {w}", lineno)
        else:
            raise ParseError(f"expected 2 or 3 fields, got {len(parts)}", lineno)
        try:
            u = int(parts[0])
            v = int(parts[1])
        except ValueError:
            raise ParseError(f"bad vertex id in {text!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("vertex ids must be non-negative", lineno)
        edges.append((u, v, w))
    if not edges:
        raise ParseError("no edges in input")
    return EdgeListGraph.from_edges(edges)


def out_degrees(graph: EdgeListGraph, size: int | None = None) -> np.ndarray:
    """Out-degree per vertex as int64; ``size`` pads the array."""
    n = graph.num_vertices if size is None else size
    return np.bincount(graph.src, minlength=n).astype(np.int64)


# ---- Sparse matrix views -------------------------------------------------

_KINDS = ("coo", "csr", "csc")


@dataclass
class SparseRep:
    """One of COO / CSR / CSC over the graph's adjacency (src = row).

    COO keeps ``rows``/``cols``; CSR keeps ``ptr`` (len rows+1) and ``cols``;
    CSC keeps ``ptr`` (len cols+1) and ``rows``.  ``values`` always aligns
    with the populated index arrays.
    """

    kind: str
    shape: tuple
    values: np.ndarray
    ptr: np.ndarray | None = None
    rows: np.ndarray | None = None
    cols: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sparse kind {self.kind!r}")
        nnz = self.values.shape[0]
        if self.kind == "coo":
            assert self.rows is not None and self.cols is not None
        elif self.kind == "csr":
            assert self.ptr is not None and self.cols is not None
            assert self.ptr.shape[0] == self.shape[0] + 1
            assert self.ptr[-1] == nnz
        else:
            assert self.ptr is not None and self.rows is not None
            assert self.ptr.shape[0] == self.shape[1] + 1
            assert self.ptr[-1] == nnz


def convert_representation(graph: EdgeListGraph, kind: str) -> SparseRep:
    """Convert the graph's adjacency into a COO / CSR / CSC view."""
    if kind not in _KINDS:
        raise ValueError(f"unknown sparse kind {kind!r}")
    n = graph.num_vertices
    shape = (n, n)
    if kind == "coo":
        order = np.lexsort((graph.dst, graph.src))
        return SparseRep(kind, shape, graph.weight[order],
                         rows=graph.src[order].astype(np.int64),
                         cols=graph.dst[order].astype(np.int64))
    if kind == "csr":
        order = np.lexsort((graph.dst, graph.src))
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(graph.src, minlength=n), out=ptr[1:])
        return SparseRep(kind, shape, graph.weight[order], ptr=ptr,
                         cols=graph.dst[order].astype(np.int64))
    order = np.lexsort((graph.src, graph.dst))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(graph.dst, minlength=n), out=ptr[1:])
    return SparseRep(kind, shape, graph.weight[order], ptr=ptr,
                     rows=graph.src[order].astype(np.int64))


def sparse_to_edges(rep: SparseRep):
    """Recover (src, dst, weight) arrays from any representation."""
    if rep.kind == "coo":
        return rep.rows.copy(), rep.cols.copy(), rep.values.copy()
    counts = np.diff(rep.ptr)
    major = np.repeat(np.arange(counts.shape[0], dtype=np.int64), counts)
    if rep.kind == "csr":
        return major, rep.cols.copy(), rep.values.copy()
    return rep.rows.copy(), major, rep.values.copy()


# ---- Vertex state --------------------------------------------------------

@dataclass
class VertexStateVector:
    """Per-vertex machine state: 16-bit property, active flag, out-degree.

    Arrays are sized to the padded vertex count; padding vertices carry the
    program's identity value and are never active.
    """

    prop: np.ndarray
    active: np.ndarray
    outdegree: np.ndarray
    fmt: FxFormat = FxFormat.FRAC

    def __post_init__(self):
        assert self.prop.dtype == np.uint16
        assert self.active.dtype == np.bool_
        assert self.prop.shape == self.active.shape == self.outdegree.shape

    def copy_like(self) -> "VertexStateVector":
        return VertexStateVector(self.prop.copy(), self.active.copy(),
                                 self.outdegree, self.fmt)
