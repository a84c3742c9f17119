"""Benchmark: compiled vs pure-Python shortest-path enumeration kernel.

Builds one seeded random graph, runs the same query batch through both
kernels, checks they agree, and prints per-kernel timings.

    python benchmarks/bench_paths.py [--nodes 3000] [--edges 12000] [--queries 300]
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

import numpy as np

from kgcot.kg import _bfs_py

try:
    from kgcot.kg import _bfs

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def build_adjacency(n_nodes: int, n_edges: int, seed: int):
    rng = random.Random(seed)
    neighbor_sets = [set() for _ in range(n_nodes)]
    for _ in range(n_edges):
        u, v = rng.randrange(n_nodes), rng.randrange(n_nodes)
        if u == v:
            continue
        neighbor_sets[u].add(v)
        neighbor_sets[v].add(u)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    for i, s in enumerate(neighbor_sets):
        indptr[i + 1] = indptr[i] + len(s)
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for i, s in enumerate(neighbor_sets):
        indices[indptr[i] : indptr[i + 1]] = sorted(s)
    return indptr, indices


def run_batch(kernel, indptr, indices, queries, max_hops, max_paths):
    started = time.perf_counter()
    results = [
        kernel.collect_shortest_paths(
            indptr, indices, indptr, indices, len(indptr) - 1, src, dst, max_hops, max_paths
        )
        for src, dst in queries
    ]
    return time.perf_counter() - started, results


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=3000)
    parser.add_argument("--edges", type=int, default=12000)
    parser.add_argument("--queries", type=int, default=300)
    parser.add_argument("--max-hops", type=int, default=5)
    parser.add_argument("--max-paths", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    indptr, indices = build_adjacency(args.nodes, args.edges, args.seed)
    rng = random.Random(args.seed + 1)
    queries = [
        tuple(rng.sample(range(args.nodes), 2)) for _ in range(args.queries)
    ]
    print(
        f"graph: {args.nodes} nodes, {int(indptr[-1]) // 2} undirected edges; "
        f"{args.queries} queries, max_hops={args.max_hops}, max_paths={args.max_paths}"
    )

    py_times = []
    for _ in range(args.repeats):
        elapsed, py_results = run_batch(
            _bfs_py, indptr, indices, queries, args.max_hops, args.max_paths
        )
        py_times.append(elapsed)
    total_paths = sum(len(r) for r in py_results)
    print(f"python kernel: {statistics.median(py_times):.3f}s (median of {args.repeats}), "
          f"{total_paths} paths found")

    if not HAVE_COMPILED:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return

    cy_times = []
    for _ in range(args.repeats):
        elapsed, cy_results = run_batch(
            _bfs, indptr, indices, queries, args.max_hops, args.max_paths
        )
        cy_times.append(elapsed)
    mismatches = sum(
        1
        for a, b in zip(py_results, cy_results)
        if [[int(x) for x in p] for p in b] != a
    )
    print(f"cython kernel: {statistics.median(cy_times):.3f}s (median of {args.repeats})")
    print(f"agreement: {args.queries - mismatches}/{args.queries} queries identical")
    print(f"speedup: {statistics.median(py_times) / statistics.median(cy_times):.1f}x")


if __name__ == "__main__":
    main()
