"""Knowledge-graph store: typed multigraph, loader, and path search."""

from kgcot.kg.graph import (
    KgEdge,
    KgNode,
    KnowledgeGraph,
    PathStep,
    ReasoningPath,
    load_graph,
    normalize_name,
    subgraph_for,
)
from kgcot.kg.paths import KERNEL_BACKEND, all_shortest_paths

__all__ = [
    "KgNode",
    "KgEdge",
    "KnowledgeGraph",
    "PathStep",
    "ReasoningPath",
    "load_graph",
    "normalize_name",
    "subgraph_for",
    "all_shortest_paths",
    "KERNEL_BACKEND",
]
