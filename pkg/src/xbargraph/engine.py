"""Streaming-apply scheduler: drives ordered tiles through the crossbar model.

An iteration walks destination columns; within a column it walks tiles top to
bottom (ascending source range), reduces each tile into the RegO accumulator
on the fly, and writes the destination chunk exactly once at column end.
Columns own disjoint destination ranges, so any round-robin split of columns
over workers is race free and bit-identical to the single worker run.  A
row-major walk would also work but needs a full destination pass in flight;
this engine implements only the column-major order.

Empty subgraphs never reach a crossbar.  Skipping them cannot change results
(a zero tile adds nothing, an all-M tile relaxes nothing), so the engine
always skips; the events such tiles would have generated are tracked in a
side counter group and charged by the cost model only when empty-tile
skipping is configured off.

Two execution paths produce bit-identical states and counters: a reference
path that programs GECluster objects tile by tile (slow, supports per-row
tracing), and flat array kernels (numba or vectorised numpy).
"""

from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from . import kernels
from .crossbar import GECluster, N_SLICES
from .fixedpoint import Q16_ONE, RAW_MAX, FxFormat
from .graph import VertexStateVector
from .tiling import (OrderedEdgeList, SubgraphTile, TileOrderError,
                     TilingParams, _decode_subgraph_rank)

#: convergence threshold for fractional programs: 7 raw ulps
DEFAULT_EPSILON = 7 / Q16_ONE


class SaluMode(Enum):
    """Reduction performed by the sALU behind the crossbar outputs."""

    ADD = "add"
    MIN = "min"


_SALU_BY_PROGRAM = {
    "pagerank": SaluMode.ADD,
    "spmv": SaluMode.ADD,
    "bfs": SaluMode.MIN,
    "sssp": SaluMode.MIN,
}


def configure_salu(program) -> SaluMode:
    """Reduction mode for a program name (or anything with a ``name``)."""
    name = getattr(program, "name", program)
    try:
        return _SALU_BY_PROGRAM[name]
    except KeyError:
        raise ValueError(f"unknown program {name!r}") from None


@dataclass
class EmptyStreamCounters:
    """Events that skipped empty subgraphs would have generated.

    Computed in closed form every iteration regardless of the skip setting;
    the cost model adds them in only when skipping is configured off.
    """

    tiles: int = 0
    ge_cycles: int = 0
    cell_writes: int = 0
    cell_reads: int = 0
    adc_conversions: int = 0
    regi_loads: int = 0
    rego_reads: int = 0
    rego_writes: int = 0
    dst_writes: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RunCounters:
    """Monotone event counters accumulated over a whole run."""

    iterations: int = 0
    tiles_processed: int = 0
    tiles_skipped_empty: int = 0
    tiles_skipped_inactive: int = 0
    ge_cycles: int = 0
    cell_writes: int = 0
    cell_reads: int = 0
    adc_conversions: int = 0
    regi_loads: int = 0
    rego_reads: int = 0
    rego_writes: int = 0
    dst_writes: int = 0
    encode_clamps: int = 0
    empty_stream: EmptyStreamCounters = field(default_factory=EmptyStreamCounters)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.as_dict() if f.name == "empty_stream" else v
        return out


@dataclass
class RegFile:
    """Per-engine registers: RegI holds the source chunk (or distances),
    RegO accumulates one destination chunk."""

    regi: np.ndarray
    rego: np.ndarray
    reads: int = 0
    writes: int = 0

    @classmethod
    def for_params(cls, p: TilingParams) -> "RegFile":
        return cls(regi=np.zeros(p.c, dtype=np.int64),
                   rego=np.zeros(p.tile_cols, dtype=np.int64))

    def load_regi(self, values) -> None:
        self.regi[:] = values
        self.writes += self.regi.size


@dataclass
class IterationState:
    """Double-buffered vertex state.  ``src`` is read-only within an
    iteration; at the end the buffers swap roles."""

    src: VertexStateVector
    dst: VertexStateVector
    iteration: int
    counters: RunCounters


@dataclass
class TileSchedule:
    """Non-empty tiles grouped by destination column.

    Tiles of column ``c`` occupy positions ``chunk_ptr[c]:chunk_ptr[c+1]``
    of the per-tile arrays, ascending source range within the column.
    Edge arrays stay in global traversal-rank order; tile t covers edges
    ``t_start[t]:t_end[t]``.
    """

    params: TilingParams
    n_tiles: int
    chunk_ptr: np.ndarray
    t_start: np.ndarray
    t_end: np.ndarray
    t_row_base: np.ndarray
    t_rowpos: np.ndarray
    t_chunk: np.ndarray
    t_si: np.ndarray
    nonempty_per_rowpos: np.ndarray
    nonempty_chunks: int
    e_src: np.ndarray
    e_dst: np.ndarray
    e_dst_local: np.ndarray


def build_schedule(ol: OrderedEdgeList) -> TileSchedule:
    p = ol.params
    ids = ol.order_ids.astype(np.int64)
    if ids.size > 1 and np.any(ids[1:] <= ids[:-1]):
        raise TileOrderError("edge list is not sorted by global rank")
    si_edge = ids // p.cells_per_subgraph
    if si_edge.size:
        starts = np.flatnonzero(np.r_[True, si_edge[1:] != si_edge[:-1]])
        ends = np.r_[starts[1:], si_edge.size]
    else:
        starts = ends = np.empty(0, dtype=np.int64)
    si_t = si_edge[starts] if starts.size else np.empty(0, dtype=np.int64)
    block_rank = si_t // p.subs_per_block
    rem = si_t % p.subs_per_block
    s_j = rem // p.sub_rows_per_block
    s_i = rem % p.sub_rows_per_block
    b_j = block_rank // p.blocks_per_dim
    b_i = block_rank % p.blocks_per_dim
    src_base = b_i * p.b + s_i * p.c
    dst_base = b_j * p.b + s_j * p.tile_cols
    rowpos = src_base // p.c
    chunk = dst_base // p.tile_cols
    # group by destination column, ascending traversal rank inside a column
    # (which is ascending source range, since the column pins b_j and s_j)
    order = np.lexsort((si_t, chunk))
    chunk_sorted = chunk[order]
    chunk_ptr = np.searchsorted(chunk_sorted, np.arange(p.n_chunks + 1))
    return TileSchedule(
        params=p,
        n_tiles=int(si_t.size),
        chunk_ptr=chunk_ptr.astype(np.int64),
        t_start=starts[order].astype(np.int64),
        t_end=ends[order].astype(np.int64),
        t_row_base=src_base[order].astype(np.int64),
        t_rowpos=rowpos[order].astype(np.int64),
        t_chunk=chunk_sorted.astype(np.int64),
        t_si=si_t[order].astype(np.int64),
        nonempty_per_rowpos=np.bincount(rowpos, minlength=p.n_tile_rows
                                        ).astype(np.int64),
        nonempty_chunks=int(np.count_nonzero(np.diff(chunk_ptr))),
        e_src=ol.src.astype(np.int64),
        e_dst=ol.dst.astype(np.int64),
        e_dst_local=(ol.dst.astype(np.int64) % p.tile_cols),
    )


@dataclass
class PreparedProgram:
    """Everything an iteration needs: the schedule, per-edge programmed cell
    values (scaled fractions for MAC, integer weights for add mode), the
    per-destination constant applied at column finalization, and tags."""

    name: str
    mode: str                      # "mac" | "add"
    salu: SaluMode
    fmt: FxFormat
    schedule: TileSchedule
    e_val: np.ndarray              # int64, aligned with schedule edge arrays
    const_raw: int
    needs_active: bool
    raw_num_vertices: int
    algo_config: dict = field(default_factory=dict)
    outdegree: np.ndarray | None = None   # padded length, unweighted counts
    encode_clamps: int = 0         # cell values clipped while preparing
    adc: object = None             # optional AdcModel, reference path only


# ---- shared event accounting ------------------------------------------------

def _cells_per_program(p: TilingParams) -> int:
    return N_SLICES * (p.c + 1) * p.c * p.n * p.g


def _account_mac_tiles(c: RunCounters, p: TilingParams, n_tiles: int) -> None:
    cpp = _cells_per_program(p)
    c.cell_writes += n_tiles * cpp
    c.regi_loads += n_tiles * p.c
    c.ge_cycles += n_tiles
    c.cell_reads += n_tiles * cpp
    c.adc_conversions += n_tiles * N_SLICES * p.tile_cols
    c.rego_reads += n_tiles * p.tile_cols
    c.rego_writes += n_tiles * p.tile_cols


def _account_add_tiles(c: RunCounters, p: TilingParams,
                       n_tiles: int, n_slots: int) -> None:
    c.cell_writes += n_tiles * _cells_per_program(p)
    c.regi_loads += n_tiles * p.c
    c.ge_cycles += n_slots
    # each active-row cycle drives the selected row plus the bias row
    c.cell_reads += n_slots * N_SLICES * 2 * p.tile_cols
    c.adc_conversions += n_slots * N_SLICES * p.tile_cols
    c.rego_reads += n_slots * p.tile_cols
    c.rego_writes += n_slots * p.tile_cols


def _account_finalized_chunks(c: RunCounters, p: TilingParams,
                              n_chunks: int) -> None:
    c.rego_reads += n_chunks * p.tile_cols
    c.dst_writes += n_chunks * p.tile_cols


def _account_empty_stream(es: EmptyStreamCounters, p: TilingParams,
                          mode: str, sched: TileSchedule,
                          act_per_stripe: np.ndarray | None) -> None:
    cpp = _cells_per_program(p)
    if mode == "mac":
        n_empty = p.total_subgraphs - sched.n_tiles
        es.tiles += n_empty
        es.ge_cycles += n_empty
        es.cell_writes += n_empty * cpp
        es.cell_reads += n_empty * cpp
        es.adc_conversions += n_empty * N_SLICES * p.tile_cols
        es.regi_loads += n_empty * p.c
        es.rego_reads += n_empty * p.tile_cols
        es.rego_writes += n_empty * p.tile_cols
        # wholly empty columns would still be finalized each iteration
        n_empty_chunks = p.n_chunks - sched.nonempty_chunks
        es.rego_reads += n_empty_chunks * p.tile_cols
        es.dst_writes += n_empty_chunks * p.tile_cols
        return
    # add mode: a streamed empty tile is still gated by the active list, so
    # only stripes with active sources would program and cycle it
    empty_per_stripe = p.n_chunks - sched.nonempty_per_rowpos
    a = act_per_stripe
    streamed = int(np.sum((a > 0) * empty_per_stripe))
    cycles = int(np.sum(a * empty_per_stripe))
    es.tiles += streamed
    es.ge_cycles += cycles
    es.cell_writes += streamed * cpp
    es.regi_loads += streamed * p.c
    es.cell_reads += cycles * N_SLICES * 2 * p.tile_cols
    es.adc_conversions += cycles * N_SLICES * p.tile_cols
    es.rego_reads += cycles * p.tile_cols
    es.rego_writes += cycles * p.tile_cols
    # all-M rows update nothing, so no extra destination writes


# ---- reference path ---------------------------------------------------------

def _materialize_tile(prog: PreparedProgram, t: int) -> SubgraphTile:
    sched = prog.schedule
    p = sched.params
    s, e = int(sched.t_start[t]), int(sched.t_end[t])
    src_base = int(sched.t_row_base[t])
    dst_base = int(sched.t_chunk[t]) * p.tile_cols
    values = np.zeros((p.c, p.tile_cols), dtype=np.uint16)
    values[sched.e_src[s:e] - src_base, sched.e_dst_local[s:e]] = \
        prog.e_val[s:e].astype(np.uint16)
    si = int(sched.t_si[t])
    b_i, b_j, s_i, s_j = _decode_subgraph_rank(si, p)
    return SubgraphTile(si=si, block=(int(b_i), int(b_j)),
                        sub=(int(s_i), int(s_j)), src_base=src_base,
                        dst_base=dst_base, values=values, nnz=e - s)


def process_subgraph(ge: GECluster, tile: SubgraphTile, mode: SaluMode,
                     regs: RegFile, active_rows=None, row_trace=None) -> None:
    """Program one tile and reduce it into RegO.

    MAC: RegO += crossbar outputs (saturating).  MIN: for each active source
    row, RegO = min(RegO, row weights + source distance); ``row_trace``
    collects an RegO snapshot after every row step.
    """
    p = ge.params
    if tile.values.shape != (p.c, p.tile_cols):
        raise ValueError("tile does not match engine geometry")
    ge.program(tile.values, coords=(tile.block, tile.sub))
    if mode is SaluMode.ADD:
        out = ge.mvm_mac(regs.regi)
        np.minimum(regs.rego + out.astype(np.int64), RAW_MAX, out=regs.rego)
        regs.reads += regs.rego.size
        regs.writes += regs.rego.size
        return
    for r in range(p.c):
        if not active_rows[r]:
            continue
        out = ge.row_add(r, int(regs.regi[r]))
        np.minimum(regs.rego, out.astype(np.int64), out=regs.rego)
        regs.reads += regs.rego.size
        regs.writes += regs.rego.size
        if row_trace is not None:
            row_trace.append((tile.si, r, regs.rego.copy()))


def streaming_apply_column(state: IterationState, tiles, prog: PreparedProgram,
                           ge: GECluster, regs: RegFile, const_raw: int,
                           row_trace=None):
    """Reduce one destination column and write its chunk once.

    Returns (tiles_processed, inactive_tiles, row_slots, wrote_chunk).
    """
    if not tiles:
        return 0, 0, 0, False
    p = prog.schedule.params
    dst_base = tiles[0].dst_base
    last_src = -1
    for t in tiles:
        if t.dst_base != dst_base:
            raise TileOrderError("column tiles target different chunks")
        if t.src_base <= last_src:
            raise TileOrderError("column tiles not in ascending source order")
        last_src = t.src_base
    lo, hi = dst_base, dst_base + p.tile_cols
    if prog.mode == "mac":
        regs.rego[:] = 0
        for t in tiles:
            regs.load_regi(state.src.prop[t.src_base:t.src_base + p.c])
            process_subgraph(ge, t, SaluMode.ADD, regs)
        state.dst.prop[lo:hi] = np.minimum(regs.rego + const_raw, RAW_MAX
                                           ).astype(np.uint16)
        return len(tiles), 0, 0, True
    init = state.dst.prop[lo:hi].astype(np.int64)
    regs.rego[:] = init
    n_proc = inactive = slots = 0
    for t in tiles:
        act = state.src.active[t.src_base:t.src_base + p.c]
        a = int(np.count_nonzero(act))
        if a == 0:
            inactive += 1
            continue
        regs.load_regi(state.src.prop[t.src_base:t.src_base + p.c])
        process_subgraph(ge, t, SaluMode.MIN, regs, active_rows=act,
                         row_trace=row_trace)
        n_proc += 1
        slots += a
    if n_proc:
        state.dst.prop[lo:hi] = regs.rego.astype(np.uint16)
    return n_proc, inactive, slots, n_proc > 0


def _run_reference(state, prog, const_raw, workers, row_trace):
    sched = prog.schedule
    p = sched.params
    ge = GECluster(p, "mac" if prog.mode == "mac" else "add", adc=prog.adc)
    regs = RegFile.for_params(p)
    tiles_total = inact_total = slots_total = chunks_written = 0
    for w in range(workers):
        for chunk in range(w, p.n_chunks, workers):
            lo, hi = int(sched.chunk_ptr[chunk]), int(sched.chunk_ptr[chunk + 1])
            if lo == hi:
                continue
            tiles = [_materialize_tile(prog, t) for t in range(lo, hi)]
            n_proc, inact, slots, wrote = streaming_apply_column(
                state, tiles, prog, ge, regs, const_raw, row_trace=row_trace)
            tiles_total += n_proc
            inact_total += inact
            slots_total += slots
            chunks_written += int(wrote)
    return tiles_total, inact_total, slots_total, chunks_written


# ---- kernel path ------------------------------------------------------------

@contextmanager
def _forced_backend(name):
    if name in ("numba", "numpy"):
        prev = kernels.backend_setting()
        kernels.set_backend(name)
        try:
            yield
        finally:
            kernels.set_backend(prev)
    else:
        yield


def _run_kernels(state, prog, const_raw, workers):
    sched = prog.schedule
    p = sched.params
    if prog.mode == "mac":
        x = state.src.prop.astype(np.int64)
        dst64 = np.full(p.v, const_raw, dtype=np.int64)
        tiles_total = chunks_written = 0
        for w in range(workers):
            cids = np.arange(w, p.n_chunks, workers, dtype=np.int64)
            t, cw = kernels.mac_pass(cids, sched.chunk_ptr, sched.t_start,
                                     sched.t_end, sched.e_src,
                                     sched.e_dst_local, prog.e_val, x, dst64,
                                     const_raw, p.tile_cols)
            tiles_total += int(t)
            chunks_written += int(cw)
        state.dst.prop[:] = dst64.astype(np.uint16)
        return tiles_total, 0, 0, chunks_written
    prop64 = state.src.prop.astype(np.int64)
    act8 = state.src.active.astype(np.uint8)
    dst64 = prop64.copy()
    tiles_total = inact_total = slots_total = 0
    for w in range(workers):
        cids = np.arange(w, p.n_chunks, workers, dtype=np.int64)
        t, ina, sl = kernels.relax_pass(cids, sched.chunk_ptr, sched.t_start,
                                        sched.t_end, sched.t_row_base, p.c,
                                        sched.e_src, sched.e_dst, prog.e_val,
                                        prop64, act8, dst64)
        tiles_total += int(t)
        inact_total += int(ina)
        slots_total += int(sl)
    state.dst.prop[:] = dst64.astype(np.uint16)
    act_per_stripe = act8.reshape(-1, p.c).sum(axis=1, dtype=np.int64)
    live = act_per_stripe[sched.t_rowpos] > 0
    chunks_written = int(np.unique(sched.t_chunk[live]).size)
    return tiles_total, inact_total, slots_total, chunks_written


# ---- iteration driver -------------------------------------------------------

def run_iteration(state: IterationState, prog: PreparedProgram, *,
                  workers: int = 1, backend: str = "auto",
                  const_raw: int | None = None,
                  row_trace=None) -> IterationState:
    """Run one full pass over all subgraph columns and swap the buffers.

    ``backend``: "auto" (kernel path, numba when available), "numba",
    "numpy", or "reference" (GECluster object path; required for
    ``row_trace``).  All backends and any ``workers`` count produce
    bit-identical states and counters.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if backend not in ("auto", "numba", "numpy", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    if row_trace is not None and backend != "reference":
        raise ValueError("row tracing requires the reference backend")
    sched = prog.schedule
    p = sched.params
    c = state.counters
    const = prog.const_raw if const_raw is None else const_raw

    # destination buffer baseline: fractional programs get the constant term
    # (empty columns are never written and must still end up holding it),
    # integer programs start from a copy of the source properties
    if prog.mode == "mac":
        state.dst.prop[:] = np.uint16(const)
        state.dst.active[:] = False
        act_per_stripe = None
    else:
        state.dst.prop[:] = state.src.prop
        state.dst.active[:] = False
        act_per_stripe = state.src.active.reshape(-1, p.c).sum(
            axis=1, dtype=np.int64)

    if backend == "reference":
        tiles, inact, slots, chunks = _run_reference(
            state, prog, const, workers, row_trace)
    else:
        with _forced_backend(backend):
            tiles, inact, slots, chunks = _run_kernels(
                state, prog, const, workers)

    if prog.mode == "add":
        # a vertex whose property improved becomes active for the next pass
        np.less(state.dst.prop, state.src.prop, out=state.dst.active)

    if prog.mode == "mac":
        _account_mac_tiles(c, p, tiles)
    else:
        _account_add_tiles(c, p, tiles, slots)
    _account_finalized_chunks(c, p, chunks)
    c.tiles_processed += tiles
    c.tiles_skipped_inactive += inact
    c.tiles_skipped_empty += p.total_subgraphs - sched.n_tiles
    _account_empty_stream(c.empty_stream, p, prog.mode, sched, act_per_stripe)
    c.iterations += 1

    return IterationState(src=state.dst, dst=state.src,
                          iteration=state.iteration + 1, counters=c)


def check_convergence(state: IterationState, prog: PreparedProgram,
                      epsilon: float = DEFAULT_EPSILON) -> bool:
    """After a swap: fractional programs converge when every unpadded vertex
    moved by less than ``epsilon``; integer programs when no vertex is
    active."""
    raw_v = prog.raw_num_vertices
    if prog.needs_active:
        return not bool(state.src.active[:raw_v].any())
    eps_raw = int(round(epsilon * Q16_ONE))
    new = state.src.prop[:raw_v].astype(np.int64)
    old = state.dst.prop[:raw_v].astype(np.int64)
    delta = int(np.abs(new - old).max(initial=0))
    return delta < eps_raw
