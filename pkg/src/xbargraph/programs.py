"""Vertex programs and end-to-end run drivers.

Each program is a row of a small table: how an edge is turned into a
candidate value (multiply by a pre-scaled fractional weight, or add an
integer weight), how candidates are reduced (saturating sum, or min), and
which number format the vertex property uses.  The pairing is fixed:
multiply/sum programs run on fractions, add/min programs on integers with an
active-vertex frontier.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .engine import (DEFAULT_EPSILON, IterationState, PreparedProgram,
                     RunCounters, build_schedule, check_convergence,
                     configure_salu, run_iteration)
from .fixedpoint import M, Q16_ONE, RAW_MAX, FxFormat, encode_frac_clamped
from .graph import VertexStateVector
from .tiling import OrderedEdgeList, pad_params, preprocess_edges


@dataclass(frozen=True)
class VertexProgram:
    """Static definition of one program's edge/reduce/init rules."""

    name: str
    process_edge: str          # "multiply" | "add"
    reduce: str                # "sum" | "min"
    fmt: FxFormat
    needs_active: bool
    has_constant: bool

    def __post_init__(self):
        if self.process_edge == "multiply":
            ok = self.reduce == "sum" and self.fmt is FxFormat.FRAC
        elif self.process_edge == "add":
            ok = self.reduce == "min" and self.fmt is FxFormat.INT
        else:
            ok = False
        if not ok:
            raise ValueError(
                "multiply pairs with sum on fractions, add with min on "
                f"integers; got {self}")


PROGRAMS = {
    "pagerank": VertexProgram("pagerank", "multiply", "sum",
                              FxFormat.FRAC, False, True),
    "spmv": VertexProgram("spmv", "multiply", "sum",
                          FxFormat.FRAC, False, False),
    "bfs": VertexProgram("bfs", "add", "min", FxFormat.INT, True, False),
    "sssp": VertexProgram("sssp", "add", "min", FxFormat.INT, True, False),
}


def _ordered_from(source, c, n, g, b) -> OrderedEdgeList:
    if isinstance(source, OrderedEdgeList):
        return source
    params = pad_params(source.num_vertices, c, n, g, b)
    return preprocess_edges(source, params)


def prepare_program(name: str, ordered: OrderedEdgeList, *, r: float = 0.85,
                    source: int = 0, scale_by_outdegree: bool = True,
                    redistribute_dangling: bool = False) -> PreparedProgram:
    """Build the per-edge programmed values and schedule for one program."""
    if name not in PROGRAMS:
        raise ValueError(f"unknown program {name!r}")
    defn = PROGRAMS[name]
    sched = build_schedule(ordered)
    p = sched.params
    raw_v = ordered.num_vertices
    outdeg = np.bincount(sched.e_src, minlength=p.v).astype(np.int64)
    clamps = 0
    const_raw = 0
    algo_config: dict = {}

    if name == "pagerank":
        if not (0.0 < r < 1.0):
            raise ValueError(f"damping must lie in (0, 1), got {r}")
        # classic formulation: edge weights are ignored, each out-edge of u
        # carries probability 1/outdeg(u)
        scaled = np.full(ordered.num_edges, r) / outdeg[sched.e_src]
        cells, clamps = encode_frac_clamped(scaled)
        e_val = cells.astype(np.int64)
        const_raw = min(int(np.round((1.0 - r) * Q16_ONE / raw_v)), RAW_MAX)
        algo_config = {"r": r, "redistribute_dangling": bool(redistribute_dangling)}
    elif name == "spmv":
        w = ordered.weight.astype(np.float64)
        scaled = w / outdeg[sched.e_src] if scale_by_outdegree else w
        cells, clamps = encode_frac_clamped(scaled)
        e_val = cells.astype(np.int64)
        algo_config = {"scale_by_outdegree": bool(scale_by_outdegree)}
    else:
        if not (0 <= source < raw_v):
            raise ValueError(f"source vertex {source} outside [0, {raw_v})")
        if name == "sssp":
            if ordered.num_edges and int(ordered.weight.min()) < 1:
                raise ValueError(
                    "sssp requires edge weights in [1, 65534]; a zero weight "
                    "would collide with the no-edge cell value")
            e_val = ordered.weight.astype(np.int64)
        else:
            e_val = np.ones(ordered.num_edges, dtype=np.int64)
        algo_config = {"source": int(source)}

    return PreparedProgram(name=name, mode="mac" if defn.reduce == "sum"
                           else "add", salu=configure_salu(name),
                           fmt=defn.fmt, schedule=sched, e_val=e_val,
                           const_raw=const_raw,
                           needs_active=defn.needs_active,
                           raw_num_vertices=raw_v, algo_config=algo_config,
                           outdegree=outdeg, encode_clamps=clamps)


def make_initial_state(prog: PreparedProgram, x=None) -> IterationState:
    """Program-specific starting state on the padded vertex range."""
    p = prog.schedule.params
    raw_v = prog.raw_num_vertices
    prop = np.zeros(p.v, dtype=np.uint16)
    active = np.zeros(p.v, dtype=bool)
    clamps = prog.encode_clamps
    if prog.name == "pagerank":
        if x is not None:
            raise ValueError("pagerank defines its own starting vector")
        prop[:raw_v] = min(int(np.round(Q16_ONE / raw_v)), RAW_MAX)
    elif prog.name == "spmv":
        if x is None:
            x = np.full(raw_v, 1.0 / raw_v)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (raw_v,):
            raise ValueError(f"input vector must have length {raw_v}")
        raw, xc = encode_frac_clamped(x)
        prop[:raw_v] = raw
        clamps += xc
    else:
        prop[:] = M
        src = prog.algo_config["source"]
        prop[src] = 0
        active[src] = True
    state_src = VertexStateVector(prop, active, prog.outdegree, prog.fmt)
    state_dst = VertexStateVector(np.zeros(p.v, dtype=np.uint16),
                                  np.zeros(p.v, dtype=bool),
                                  prog.outdegree, prog.fmt)
    return IterationState(src=state_src, dst=state_dst, iteration=0,
                          counters=RunCounters(encode_clamps=clamps))


@dataclass
class RunResult:
    """Final state of a run plus provenance for reports."""

    program: str
    prepared: PreparedProgram
    final: IterationState
    iterations: int
    converged: bool
    run_config: dict
    iter_log: list

    @property
    def counters(self) -> RunCounters:
        return self.final.counters

    @property
    def raw_values(self) -> np.ndarray:
        return self.final.src.prop[:self.prepared.raw_num_vertices].copy()

    def values(self) -> np.ndarray:
        raw = self.raw_values
        if self.prepared.fmt is FxFormat.FRAC:
            return raw.astype(np.float64) / Q16_ONE
        return raw.astype(np.int64)

    def state_hash(self) -> str:
        le = self.raw_values.astype("<u2")
        return hashlib.sha256(le.tobytes()).hexdigest()

    def result_hash(self) -> str:
        """Digest of everything that defines the semantic outcome.

        Worker count and the skip setting are excluded on purpose: they can
        never change the result, and the hash asserts exactly that.
        """
        p = self.prepared.schedule.params
        basis = {
            "program": self.program,
            "tiling": {"c": p.c, "n": p.n, "g": p.g, "b": p.b, "v": p.v,
                       "raw_v": self.prepared.raw_num_vertices},
            "config": self.prepared.algo_config,
            "run": self.run_config,
            "iterations": self.iterations,
            "state_hash": self.state_hash(),
        }
        blob = json.dumps(basis, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def run_program(prog: PreparedProgram, *, epsilon=DEFAULT_EPSILON,
                max_iter: int = 100, workers: int = 1,
                backend: str = "auto", x=None, row_trace=None) -> RunResult:
    """Iterate until convergence or ``max_iter``.

    ``epsilon=None`` disables the convergence check (fixed pass count).
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    state = make_initial_state(prog, x=x)
    raw_v = prog.raw_num_vertices
    redistribute = bool(prog.algo_config.get("redistribute_dangling"))
    dangling = np.flatnonzero(prog.outdegree[:raw_v] == 0) \
        if redistribute else None
    log = []
    converged = False
    for _ in range(max_iter):
        const = None
        if redistribute:
            # leak the dangling mass back uniformly this iteration
            r = prog.algo_config["r"]
            mass = int(state.src.prop[dangling].astype(np.int64).sum())
            const = min(int(np.round(((1.0 - r) * Q16_ONE + r * mass)
                                     / raw_v)), RAW_MAX)
        tiles0 = state.counters.tiles_processed
        cycles0 = state.counters.ge_cycles
        state = run_iteration(state, prog, workers=workers, backend=backend,
                              const_raw=const, row_trace=row_trace)
        if prog.needs_active:
            metric = int(np.count_nonzero(state.src.active[:raw_v]))
        else:
            new = state.src.prop[:raw_v].astype(np.int64)
            old = state.dst.prop[:raw_v].astype(np.int64)
            metric = int(np.abs(new - old).max(initial=0))
        log.append({"iteration": state.iteration,
                    "tiles": state.counters.tiles_processed - tiles0,
                    "cycles": state.counters.ge_cycles - cycles0,
                    "metric": metric})
        if epsilon is None:
            continue
        if check_convergence(state, prog, epsilon):
            converged = True
            break
    return RunResult(program=prog.name, prepared=prog, final=state,
                     iterations=state.iteration, converged=converged,
                     run_config={"epsilon": epsilon, "max_iter": max_iter},
                     iter_log=log)


# ---- one-call drivers -------------------------------------------------------

def run_pagerank(graph, r: float = 0.85, epsilon=DEFAULT_EPSILON,
                 max_iter: int = 100, *, c: int = 8, n: int = 32,
                 g: int = 64, b: int | None = None, workers: int = 1,
                 backend: str = "auto",
                 redistribute_dangling: bool = False) -> RunResult:
    ordered = _ordered_from(graph, c, n, g, b)
    prog = prepare_program("pagerank", ordered, r=r,
                           redistribute_dangling=redistribute_dangling)
    return run_program(prog, epsilon=epsilon, max_iter=max_iter,
                       workers=workers, backend=backend)


def run_spmv(graph, x=None, iterations: int = 1, *,
             scale_by_outdegree: bool = True, c: int = 8, n: int = 32,
             g: int = 64, b: int | None = None, workers: int = 1,
             backend: str = "auto") -> RunResult:
    ordered = _ordered_from(graph, c, n, g, b)
    prog = prepare_program("spmv", ordered,
                           scale_by_outdegree=scale_by_outdegree)
    return run_program(prog, epsilon=None, max_iter=iterations,
                       workers=workers, backend=backend, x=x)


def run_bfs(graph, source: int, *, c: int = 8, n: int = 32, g: int = 64,
            b: int | None = None, max_iter: int | None = None,
            workers: int = 1, backend: str = "auto") -> RunResult:
    ordered = _ordered_from(graph, c, n, g, b)
    prog = prepare_program("bfs", ordered, source=source)
    limit = max_iter if max_iter is not None else ordered.num_vertices + 1
    return run_program(prog, max_iter=limit, workers=workers, backend=backend)


def run_sssp(graph, source: int, *, c: int = 8, n: int = 32, g: int = 64,
             b: int | None = None, max_iter: int | None = None,
             workers: int = 1, backend: str = "auto") -> RunResult:
    ordered = _ordered_from(graph, c, n, g, b)
    prog = prepare_program("sssp", ordered, source=source)
    limit = max_iter if max_iter is not None else ordered.num_vertices + 1
    return run_program(prog, max_iter=limit, workers=workers, backend=backend)
