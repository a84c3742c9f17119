"""Shared test helpers: tiny graph builders and the simple-path oracle."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from kgcot.kg.graph import KgEdge, KgNode, KnowledgeGraph

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def graph_from_edges(edge_pairs, extra_nodes=(), node_types=None):
    """Build a graph from (src, dst) or (src, dst, relation) tuples."""
    node_types = node_types or {}
    edges = []
    node_ids = set(extra_nodes)
    for spec in edge_pairs:
        src, dst = spec[0], spec[1]
        relation = spec[2] if len(spec) > 2 else "related_to"
        node_ids.update((src, dst))
        edges.append(KgEdge(src=src, dst=dst, relation=relation))
    nodes = [
        KgNode(node_id=nid, node_type=node_types.get(nid, "concept"), node_name=nid)
        for nid in sorted(node_ids)
    ]
    return KnowledgeGraph(nodes, edges)


def brute_force_shortest(g: KnowledgeGraph, src: str, dst: str, max_hops: int, directed=False):
    """Exhaustive simple-path enumeration filtered to minimum length.

    Independent of the BFS kernel: walks raw edge lists recursively.
    """
    neighbors: dict[str, set[str]] = {nid: set() for nid in g.nodes}
    for e in g.edges:
        neighbors[e.src].add(e.dst)
        if not directed:
            neighbors[e.dst].add(e.src)

    found: list[tuple[str, ...]] = []

    def walk(node, path):
        if len(path) - 1 > max_hops:
            return
        if node == dst:
            found.append(tuple(path))
            return
        for nxt in neighbors[node]:
            if nxt not in path:
                walk(nxt, path + [nxt])

    walk(src, [src])
    if not found:
        return []
    best = min(len(p) for p in found)
    return sorted(p for p in found if len(p) == best)


def random_multigraph(rng: random.Random, max_nodes=12, max_edges=30):
    """Seeded random directed multigraph with occasional parallel relations."""
    n = rng.randint(2, max_nodes)
    ids = [f"n{i:02d}" for i in range(n)]
    m = rng.randint(1, max_edges)
    edges = []
    for _ in range(m):
        src, dst = rng.choice(ids), rng.choice(ids)
        if src == dst:
            continue
        relation = rng.choice(["r1", "r2", "r3"])
        edges.append((src, dst, relation))
    return graph_from_edges(edges, extra_nodes=ids)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
