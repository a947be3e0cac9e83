"""Compare the compiled and pure-numpy kernel paths on a synthetic graph.

Usage: python benchmarks/bench_kernels.py [--vertices N] [--density D]

Both paths must produce bit-identical results; the script asserts that
before printing timings, so it doubles as a quick consistency check.
"""

import argparse
import time

from xbargraph import gen_uniform, run_pagerank, run_sssp
from xbargraph.kernels import have_numba, warm_up


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vertices", type=int, default=2000)
    ap.add_argument("--density", type=float, default=0.01)
    ap.add_argument("--iters", type=int, default=10)
    args = ap.parse_args()

    graph = gen_uniform(args.vertices, args.density,
                        weight_range=(1, 100), seed=7)
    print(f"graph: {graph.num_vertices} vertices, {graph.num_edges} edges")
    geom = dict(c=8, n=4, g=4, b=None)

    backends = ["numpy"] + (["numba"] if have_numba() else [])
    if have_numba():
        warm_up()   # pay the compilation cost outside the timed region

    results = {}
    for backend in backends:
        pr, t_pr = _time(lambda: run_pagerank(
            graph, epsilon=0.0, max_iter=args.iters, backend=backend, **geom))
        ss, t_ss = _time(lambda: run_sssp(graph, 0, backend=backend, **geom))
        results[backend] = (pr.state_hash(), ss.state_hash(), t_pr, t_ss)
        print(f"{backend:>6}: pagerank {t_pr * 1e3:8.1f} ms   "
              f"sssp {t_ss * 1e3:8.1f} ms")

    hashes = {(v[0], v[1]) for v in results.values()}
    assert len(hashes) == 1, f"backends disagree: {results}"
    print("state hashes identical across backends")
    if len(results) == 2:
        _, _, np_pr, np_ss = results["numpy"]
        _, _, nb_pr, nb_ss = results["numba"]
        print(f"speedup: pagerank x{np_pr / nb_pr:.1f}, "
              f"sssp x{np_ss / nb_ss:.1f}")


if __name__ == "__main__":
    main()
