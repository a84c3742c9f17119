"""Hop-bounded all-shortest-paths over a KnowledgeGraph.

Uses the compiled kernel when the extension built, otherwise the pure-Python
twin. Both enumerate identical sequences in identical order.
"""

from __future__ import annotations

from kgcot.errors import InputError
from kgcot.kg.graph import KnowledgeGraph, ReasoningPath

try:
    from kgcot.kg import _bfs as _kernel

    KERNEL_BACKEND = "cython"
except ImportError:  # extension not built; fall back
    from kgcot.kg import _bfs_py as _kernel

    KERNEL_BACKEND = "python"


def all_shortest_paths(
    g: KnowledgeGraph,
    src: str,
    dst: str,
    max_hops: int,
    max_paths: int = 64,
    directed: bool = False,
) -> list[ReasoningPath]:
    """All distinct minimum-length src->dst node sequences within max_hops.

    Results are ordered lexicographically by node id and truncated to
    max_paths. By default every edge is walkable in both directions, with the
    orientation recorded per hop; directed=True restricts to edge direction.
    Returns [] when no path of length <= max_hops exists.
    """
    for nid in (src, dst):
        if not g.has_node(nid):
            raise InputError(f"unknown node {nid!r}")
    if src == dst:
        raise InputError("src = dst carries no path evidence; query rejected")
    if max_hops < 1:
        raise InputError("max_hops must be >= 1")
    if max_paths < 1:
        raise InputError("max_paths must be >= 1")

    indptr_f, indices_f = g.adjacency(directed)
    indptr_r, indices_r = g.adjacency(directed, reverse=True)
    rank_paths = _kernel.collect_shortest_paths(
        indptr_f,
        indices_f,
        indptr_r,
        indices_r,
        g.num_nodes,
        g.node_rank(src),
        g.node_rank(dst),
        max_hops,
        max_paths,
    )

    results = []
    for ranks in rank_paths:
        nodes = tuple(g.node_ids[int(r)] for r in ranks)
        steps = tuple(
            g.hop_step(u, v, directed) for u, v in zip(nodes, nodes[1:])
        )
        results.append(ReasoningPath(nodes=nodes, steps=steps))
    return results
