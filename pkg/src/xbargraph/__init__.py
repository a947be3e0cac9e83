"""Functional and cost simulator for a ReRAM-crossbar graph accelerator.

Graphs are streamed as tile-ordered edge lists through a bit-exact model of
16-bit fixed-point crossbar arithmetic (MAC for rank-style programs, row
select add for traversals), with event counters feeding a latency and energy
model.  See the README for the command line interface.
"""

from .costmodel import (CostParams, CostReport, ge_cycle_budget,
                        load_cost_params, tally_costs)
from .engine import (DEFAULT_EPSILON, EmptyStreamCounters, IterationState,
                     PreparedProgram, RegFile, RunCounters, SaluMode,
                     TileSchedule, build_schedule, check_convergence,
                     configure_salu, process_subgraph, run_iteration,
                     streaming_apply_column)
from .fixedpoint import (M, Q16_ONE, RAW_MAX, Fx16, FxFormat, FxRangeError,
                         decode_frac, encode_frac, encode_int, sat_add_raw)
from .graph import (EdgeListGraph, ParseError, SparseRep, VertexStateVector,
                    convert_representation, out_degrees, parse_edge_list,
                    sparse_to_edges)
from .oracles import dense_spmv, exact_bfs, exact_pagerank, exact_sssp
from .programs import (PROGRAMS, RunResult, VertexProgram, make_initial_state,
                       prepare_program, run_bfs, run_pagerank, run_program,
                       run_spmv, run_sssp)
from .synth import gen_uniform
from .tiling import (FileFormatError, OrderedEdgeList, SubgraphTile,
                     TileOrderError, TilingParams, WEIGHT_MAX, global_edge_id,
                     pad_params, preprocess_edges, read_ordered, tile_stream,
                     write_ordered)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
