"""Command line front end.

Subcommands: ``preprocess`` (edge list text to the binary tile-ordered
format), ``run`` (simulate one program and write a JSON report), ``verify``
(run, then compare against an exact software result), ``report`` (collect
run reports into a CSV), ``gen`` (synthetic edge lists).

Exit codes: 0 success, 1 verification failure, 2 bad usage or bad input,
3 internal fault.  ``GRAPHR_LOG`` sets the logging level (DEBUG, INFO, ...).
Reports are deterministic: same inputs, byte-identical outputs.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import costmodel, oracles, synth
from .engine import DEFAULT_EPSILON
from .fixedpoint import FxFormat
from .graph import EdgeListGraph, ParseError, parse_edge_list
from .programs import prepare_program, run_program
from .tiling import (MAGIC, FileFormatError, TileOrderError, OrderedEdgeList,
                     pad_params, preprocess_edges, read_ordered, write_ordered)

log = logging.getLogger("xbargraph")

#: reports embed the full per-vertex result only up to this many vertices
VALUES_INLINE_LIMIT = 4096

_DEFAULT_TOL = {"pagerank": 1e-3, "spmv": 2.0 ** -12, "bfs": 0.0, "sssp": 0.0}
_GEOMETRY_DEFAULTS = {"c": 8, "n": 32, "g": 64, "b": None}


# ---- helpers ----------------------------------------------------------------

def _setup_logging() -> None:
    name = os.environ.get("GRAPHR_LOG", "").strip().upper()
    level = getattr(logging, name, None) if name else None
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", force=True)


def _jsonable(obj):
    """Recursively strip numpy types so json.dump output is deterministic."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _is_binary_input(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC


def _load_ordered(args) -> tuple:
    """Load -i as either a preprocessed binary or an edge-list text file.

    Returns (ordered, clamped_weights).  Explicit geometry flags must agree
    with a binary input's stored header; text inputs are preprocessed on the
    fly with the flag values (or the defaults).
    """
    if _is_binary_input(args.input):
        ordered = read_ordered(args.input)
        p = ordered.params
        stored = {"c": p.c, "n": p.n, "g": p.g, "b": p.b}
        for key, have in stored.items():
            asked = getattr(args, key)
            if asked is not None and asked != have:
                raise ValueError(
                    f"--{key.upper()}={asked} conflicts with {key}={have} "
                    f"stored in {args.input}")
        log.info("loaded %s: %d vertices, %d edges", args.input,
                 ordered.num_vertices, ordered.num_edges)
        return ordered, ordered.clamped_weights
    with open(args.input) as fh:
        graph = parse_edge_list(fh)
    geom = {k: getattr(args, k) if getattr(args, k) is not None else d
            for k, d in _GEOMETRY_DEFAULTS.items()}
    params = pad_params(graph.num_vertices, geom["c"], geom["n"], geom["g"],
                        geom["b"])
    ordered = preprocess_edges(graph, params)
    log.info("preprocessed %s: %d vertices (%d padded), %d edges",
             args.input, graph.num_vertices, params.v, ordered.num_edges)
    return ordered, ordered.clamped_weights


def _graph_from_ordered(ol: OrderedEdgeList) -> EdgeListGraph:
    """Recover the stored (already weight-quantised) graph for the oracles."""
    order = np.lexsort((ol.dst, ol.src))
    return EdgeListGraph(num_vertices=ol.num_vertices,
                         src=ol.src[order].astype(np.uint32),
                         dst=ol.dst[order].astype(np.uint32),
                         weight=ol.weight[order].astype(np.float64))


def _load_x(args, raw_v: int):
    if getattr(args, "x", None) is None:
        return None
    x = np.loadtxt(args.x, dtype=np.float64, ndmin=1)
    if x.shape != (raw_v,):
        raise ValueError(f"input vector {args.x} has length {x.shape[0]}, "
                         f"graph has {raw_v} vertices")
    return x


def _density(num_edges: int, raw_v: int) -> float:
    pairs = raw_v * (raw_v - 1)
    return num_edges / pairs if pairs else 0.0


def _execute(args):
    """Shared run/verify pipeline: load, prepare, simulate."""
    ordered, clamped = _load_ordered(args)
    raw_v = ordered.num_vertices
    program = args.program
    prog = prepare_program(
        program, ordered, r=args.r, source=args.src,
        scale_by_outdegree=args.scale_by_outdegree,
        redistribute_dangling=args.redistribute_dangling)
    if args.inject_weight_error:
        if prog.e_val.size == 0:
            raise ValueError("cannot inject a weight error into an empty graph")
        old = int(prog.e_val[0])
        prog.e_val[0] = min(max(2 * old, old + 1), 0xFFFE)
        log.info("injected weight error: cell 0 changed %d -> %d",
                 old, int(prog.e_val[0]))

    if args.eps == "default":
        epsilon = None if program == "spmv" else DEFAULT_EPSILON
    elif args.eps.lower() in ("none", "off"):
        epsilon = None
    else:
        epsilon = float(args.eps)
    if args.max_iter is not None:
        max_iter = args.max_iter
    elif program == "spmv":
        max_iter = 1
    elif program == "pagerank":
        max_iter = 100
    else:
        max_iter = raw_v + 1

    x = _load_x(args, raw_v)
    result = run_program(prog, epsilon=epsilon, max_iter=max_iter,
                         workers=args.workers, backend=args.backend, x=x)
    log.info("%s finished: %d iterations, converged=%s", program,
             result.iterations, result.converged)
    return ordered, clamped, prog, result, x


def _build_report(args, ordered, clamped, prog, result):
    p = prog.schedule.params
    sched = prog.schedule
    raw_v = prog.raw_num_vertices
    params = costmodel.load_cost_params(args.cost) if args.cost \
        else costmodel.CostParams()
    cost = costmodel.tally_costs(result.counters, p, params,
                                 skip_empty=args.skip_empty)
    cells = p.cells_per_subgraph
    results = {"format": prog.fmt.name.lower(),
               "state_hash": result.state_hash()}
    if raw_v <= VALUES_INLINE_LIMIT:
        vals = result.values()
        results["values"] = vals.tolist()
    report = {
        "format_version": 1,
        "config": {
            "program": result.program,
            "c": p.c, "n": p.n, "g": p.g, "b": p.b,
            "num_vertices": raw_v, "padded_vertices": p.v,
            "workers": args.workers, "backend": args.backend,
            "skip_empty": args.skip_empty,
            "epsilon": result.run_config["epsilon"],
            "max_iter": result.run_config["max_iter"],
            "algorithm": prog.algo_config,
            "cost_params": params.as_dict(),
        },
        "preprocess": {
            "num_edges": ordered.num_edges,
            "clamped_weights": clamped,
            "density": _density(ordered.num_edges, raw_v),
        },
        "iterations": result.iterations,
        "converged": result.converged,
        "counters": result.counters.as_dict(),
        "cost": cost.as_dict(),
        "schedule": {
            "subgraphs_total": p.total_subgraphs,
            "subgraphs_nonempty": sched.n_tiles,
            "nonempty_fraction": sched.n_tiles / p.total_subgraphs,
            "cell_utilization": (ordered.num_edges / (sched.n_tiles * cells)
                                 if sched.n_tiles else 0.0),
            "chunks": p.n_chunks,
            "chunks_nonempty": sched.nonempty_chunks,
        },
        "results": results,
        "result_hash": result.result_hash(),
        "iteration_log": result.iter_log,
    }
    return report


def _write_trace(path, result) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "tiles", "cycles", "metric"])
        for row in result.iter_log:
            w.writerow([row["iteration"], row["tiles"], row["cycles"],
                        row["metric"]])


# ---- subcommands -------------------------------------------------------------

def _cmd_preprocess(args) -> int:
    with open(args.input) as fh:
        graph = parse_edge_list(fh)
    params = pad_params(graph.num_vertices, args.c, args.n, args.g, args.b)
    ordered = preprocess_edges(graph, params)
    write_ordered(ordered, args.output)
    print(f"wrote {args.output}: {ordered.num_vertices} vertices "
          f"({params.v} padded), {ordered.num_edges} edges, "
          f"b={params.b}, {ordered.clamped_weights} weights clamped")
    return 0


def _cmd_run(args) -> int:
    ordered, clamped, prog, result, _ = _execute(args)
    report = _build_report(args, ordered, clamped, prog, result)
    _write_json(args.output, report)
    if args.trace:
        _write_trace(args.trace, result)
    cost = report["cost"]
    print(f"{result.program}: {result.iterations} iterations, "
          f"converged={result.converged}, "
          f"time={cost['time_seconds']:.6e}s, "
          f"energy={cost['energy_joules']:.6e}J -> {args.output}")
    return 0


def _oracle_values(program, graph, result, args, x):
    if program == "pagerank":
        return oracles.exact_pagerank(graph, r=args.r,
                                      iterations=result.iterations,
                                      redistribute_dangling=
                                      args.redistribute_dangling)
    if program == "spmv":
        y = x if x is not None else np.full(graph.num_vertices,
                                            1.0 / graph.num_vertices)
        for _ in range(result.iterations):
            y = oracles.dense_spmv(graph, y,
                                   scale_by_outdegree=args.scale_by_outdegree)
        return y
    if program == "bfs":
        return oracles.exact_bfs(graph, args.src)
    return oracles.exact_sssp(graph, args.src)


def _cmd_verify(args) -> int:
    ordered, clamped, prog, result, x = _execute(args)
    graph = _graph_from_ordered(ordered)
    expect = _oracle_values(args.program, graph, result, args, x)
    got = result.values()
    if prog.fmt is FxFormat.FRAC:
        diff = np.abs(got - expect)
    else:
        diff = np.abs(got.astype(np.int64) - expect.astype(np.int64))
    max_err = float(diff.max(initial=0.0))
    mismatches = int(np.count_nonzero(diff > 0))
    tol = args.tol if args.tol is not None else _DEFAULT_TOL[args.program]
    passed = max_err <= tol
    report = _build_report(args, ordered, clamped, prog, result)
    report["verify"] = {"tolerance": tol, "max_abs_error": max_err,
                        "mismatches": mismatches, "passed": passed}
    _write_json(args.output, report)
    if args.trace:
        _write_trace(args.trace, result)
    if prog.encode_clamps:
        print(f"note: {prog.encode_clamps} matrix entries exceeded the "
              "representable cell range and were clamped", file=sys.stderr)
    status = "PASS" if passed else "FAIL"
    print(f"verify {args.program}: max_abs_error={max_err:.6e} "
          f"tol={tol:.6e} mismatches={mismatches} -> {status}")
    return 0 if passed else 1


_CSV_COLUMNS = [
    "program", "vertices", "edges", "density", "c", "n", "g", "b",
    "iterations", "converged", "subgraphs_nonempty", "nonempty_fraction",
    "cell_utilization", "tiles_processed", "tiles_skipped_empty",
    "ge_cycles", "time_seconds", "energy_joules", "time_per_edge",
    "energy_per_edge", "result_hash",
]


def _csv_row(path, report) -> dict:
    try:
        cfg = report["config"]
        pre = report["preprocess"]
        cnt = report["counters"]
        cost = report["cost"]
        sched = report["schedule"]
        edges = pre["num_edges"]
        row = {
            "program": cfg["program"],
            "vertices": cfg["num_vertices"],
            "edges": edges,
            "density": pre["density"],
            "c": cfg["c"], "n": cfg["n"], "g": cfg["g"], "b": cfg["b"],
            "iterations": report["iterations"],
            "converged": report["converged"],
            "subgraphs_nonempty": sched["subgraphs_nonempty"],
            "nonempty_fraction": sched["nonempty_fraction"],
            "cell_utilization": sched["cell_utilization"],
            "tiles_processed": cnt["tiles_processed"],
            "tiles_skipped_empty": cnt["tiles_skipped_empty"],
            "ge_cycles": cnt["ge_cycles"],
            "time_seconds": cost["time_seconds"],
            "energy_joules": cost["energy_joules"],
            "time_per_edge": cost["time_seconds"] / edges if edges else "",
            "energy_per_edge": cost["energy_joules"] / edges if edges else "",
            "result_hash": report["result_hash"],
        }
    except (KeyError, TypeError) as e:
        raise ValueError(f"{path} is not a run report ({e})") from None
    return row


def _cmd_report(args) -> int:
    rows = []
    for path in args.input:
        with open(path) as fh:
            rows.append(_csv_row(path, json.load(fh)))
    rows.sort(key=lambda r: (r["density"], r["program"], r["vertices"]))
    with open(args.output, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.output}: {len(rows)} rows")
    return 0


def _cmd_gen(args) -> int:
    graph = synth.gen_uniform(args.vertices, args.density,
                              weight_range=(args.wmin, args.wmax),
                              seed=args.seed)
    table = np.column_stack([graph.src.astype(np.int64),
                             graph.dst.astype(np.int64),
                             graph.weight.astype(np.int64)])
    header = (f"uniform random graph: V={args.vertices} "
              f"density={args.density} seed={args.seed} "
              f"weights=[{args.wmin},{args.wmax}]")
    np.savetxt(args.output, table, fmt="%d", header=header)
    print(f"wrote {args.output}: {graph.num_vertices} vertices, "
          f"{graph.num_edges} edges")
    return 0


# ---- parser -------------------------------------------------------------------

def _add_geometry(sp, with_defaults: bool) -> None:
    d = _GEOMETRY_DEFAULTS if with_defaults else {}
    sp.add_argument("--C", dest="c", type=int, default=d.get("c"),
                    help="crossbar dimension (default 8)")
    sp.add_argument("--N", dest="n", type=int, default=d.get("n"),
                    help="crossbars per engine (default 32)")
    sp.add_argument("--G", dest="g", type=int, default=d.get("g"),
                    help="engines per cluster (default 64)")
    sp.add_argument("--B", dest="b", type=int, default=None,
                    help="block size (default: one block covering the graph)")


def _add_run_options(sp) -> None:
    sp.add_argument("-p", "--program", required=True,
                    choices=("pagerank", "spmv", "bfs", "sssp"))
    sp.add_argument("-i", "--input", required=True,
                    help="preprocessed binary or edge-list text")
    sp.add_argument("-o", "--output", required=True, help="JSON report path")
    sp.add_argument("--r", type=float, default=0.85,
                    help="damping factor (pagerank)")
    sp.add_argument("--eps", default="default",
                    help="convergence threshold; 'none' disables the check")
    sp.add_argument("--max-iter", type=int, default=None)
    sp.add_argument("--src", type=int, default=0,
                    help="source vertex (bfs, sssp)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--skip-empty", action=argparse.BooleanOptionalAction,
                    default=True,
                    help="charge (or not) the cost of skipped empty subgraphs")
    sp.add_argument("--cost", default=None,
                    help="key=value file overriding cost constants")
    sp.add_argument("--backend", default="auto",
                    choices=("auto", "numba", "numpy", "reference"))
    sp.add_argument("--x", default=None,
                    help="input vector file, one value per line (spmv)")
    sp.add_argument("--scale-by-outdegree",
                    action=argparse.BooleanOptionalAction, default=True,
                    help="divide spmv matrix entries by source out-degree")
    sp.add_argument("--redistribute-dangling", action="store_true",
                    help="feed dangling pagerank mass back uniformly")
    sp.add_argument("--trace", default=None,
                    help="also write a per-iteration CSV trace")
    sp.add_argument("--inject-weight-error", action="store_true",
                    help=argparse.SUPPRESS)
    _add_geometry(sp, with_defaults=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xbargraph",
        description="Crossbar graph-accelerator simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("preprocess",
                        help="sort an edge list into the binary tile order")
    sp.add_argument("-i", "--input", required=True)
    sp.add_argument("-o", "--output", required=True)
    _add_geometry(sp, with_defaults=True)
    sp.set_defaults(func=_cmd_preprocess)

    sp = sub.add_parser("run", help="simulate one program")
    _add_run_options(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("verify",
                        help="run, then compare against the exact result")
    _add_run_options(sp)
    sp.add_argument("--tol", type=float, default=None,
                    help="max absolute error (default depends on program)")
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("report", help="collect run reports into a CSV")
    sp.add_argument("-i", "--input", nargs="*", default=[],
                    help="JSON reports from 'run' or 'verify'")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=_cmd_report)

    sp = sub.add_parser("gen", help="generate a uniform random edge list")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--V", dest="vertices", type=int, required=True)
    sp.add_argument("--density", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--wmin", type=int, default=1)
    sp.add_argument("--wmax", type=int, default=1)
    sp.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except (ParseError, FileFormatError, TileOrderError, ValueError,
            OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:                      # pragma: no cover - fault path
        log.debug("internal error", exc_info=True)
        print(f"internal error: {e!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
