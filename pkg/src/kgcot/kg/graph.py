"""Typed directed multigraph over TSV node/edge tables.

A loaded KnowledgeGraph is immutable: build it once, query it from any number
of threads. Parallel edges (same src/dst, distinct relation) are preserved.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from kgcot.errors import GraphLoadError, InputError

logger = logging.getLogger(__name__)

NODE_COLUMNS = ("node_id", "node_type", "node_name", "source")
EDGE_COLUMNS = ("src_id", "dst_id", "relation", "display_relation")

_WHITESPACE = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Casefold, trim, and collapse internal whitespace.

    Punctuation is kept: it distinguishes real biomedical labels.
    """
    return _WHITESPACE.sub(" ", name.strip()).casefold()


@dataclass(frozen=True)
class KgNode:
    node_id: str
    node_type: str
    node_name: str
    source: str = ""


@dataclass(frozen=True)
class KgEdge:
    src: str
    dst: str
    relation: str
    display_relation: str = ""


@dataclass(frozen=True)
class PathStep:
    """One hop of a reasoning path.

    `relation` is the lexicographically smallest relation on the hop;
    `relations` keeps the full folded list of parallel relations.
    """

    relation: str
    orientation: str  # "forward" (with edge direction) or "reverse" (against)
    relations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.orientation not in ("forward", "reverse"):
            raise ValueError(f"bad orientation {self.orientation!r}")


@dataclass(frozen=True)
class ReasoningPath:
    """A minimum-length node chain with per-hop relation labels."""

    nodes: tuple[str, ...]
    steps: tuple[PathStep, ...] = ()

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if self.steps and len(self.steps) != len(self.nodes) - 1:
            raise ValueError("steps must cover every hop")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path repeats a node")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "steps": [
                {"relation": s.relation, "orientation": s.orientation}
                for s in self.steps
            ],
        }


class KnowledgeGraph:
    """Indexed heterogeneous directed multigraph.

    Invariants maintained on construction: every edge endpoint exists,
    out/in indices are exactly consistent with the edge list, and the
    name index covers every node.
    """

    def __init__(self, nodes: Iterable[KgNode], edges: Iterable[KgEdge]) -> None:
        self.nodes: dict[str, KgNode] = {}
        for node in nodes:
            if node.node_id in self.nodes:
                raise GraphLoadError(f"duplicate node_id {node.node_id!r}")
            if not node.node_name:
                raise GraphLoadError(f"node {node.node_id!r} has empty node_name")
            self.nodes[node.node_id] = node

        self.edges: tuple[KgEdge, ...] = tuple(edges)
        self.out_index: dict[str, list[KgEdge]] = {nid: [] for nid in self.nodes}
        self.in_index: dict[str, list[KgEdge]] = {nid: [] for nid in self.nodes}
        for edge in self.edges:
            if edge.src not in self.nodes:
                raise GraphLoadError(f"edge references unknown node {edge.src!r}")
            if edge.dst not in self.nodes:
                raise GraphLoadError(f"edge references unknown node {edge.dst!r}")
            self.out_index[edge.src].append(edge)
            self.in_index[edge.dst].append(edge)

        self.name_index: dict[str, list[str]] = {}
        for nid, node in self.nodes.items():
            self.name_index.setdefault(normalize_name(node.node_name), []).append(nid)
        for ids in self.name_index.values():
            ids.sort()

        # node ids in ascending string order; integer rank order therefore
        # equals lexicographic node-id order, which the path kernel relies on
        self.node_ids: tuple[str, ...] = tuple(sorted(self.nodes))
        self._rank = {nid: i for i, nid in enumerate(self.node_ids)}
        self._csr_cache: dict[tuple[bool, bool], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_node(self, node_id: str) -> bool:
        return node_id in self.nodes

    def node(self, node_id: str) -> KgNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise InputError(f"unknown node {node_id!r}") from None

    def node_rank(self, node_id: str) -> int:
        return self._rank[node_id]

    def edges_between(self, src: str, dst: str) -> list[KgEdge]:
        """Directed parallel edges src -> dst."""
        return [e for e in self.out_index.get(src, ()) if e.dst == dst]

    def nodes_by_type(self, node_type: str) -> list[KgNode]:
        return [n for n in self.nodes.values() if n.node_type == node_type]

    def adjacency(self, directed: bool, reverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """CSR neighbor structure over integer node ranks.

        Undirected mode merges out- and in-neighbors (the walkable skeleton),
        so `reverse` is a no-op there. Neighbor lists are deduplicated and
        sorted ascending.
        """
        if not directed:
            reverse = False
        cached = self._csr_cache.get((directed, reverse))
        if cached is not None:
            return cached
        neighbor_sets: list[set[int]] = [set() for _ in self.node_ids]
        for edge in self.edges:
            u, v = self._rank[edge.src], self._rank[edge.dst]
            if reverse:
                u, v = v, u
            neighbor_sets[u].add(v)
            if not directed:
                neighbor_sets[v].add(u)
        indptr = np.zeros(len(self.node_ids) + 1, dtype=np.int64)
        for i, s in enumerate(neighbor_sets):
            indptr[i + 1] = indptr[i] + len(s)
        indices = np.empty(int(indptr[-1]), dtype=np.int64)
        for i, s in enumerate(neighbor_sets):
            indices[indptr[i] : indptr[i + 1]] = sorted(s)
        self._csr_cache[(directed, reverse)] = (indptr, indices)
        return indptr, indices

    def hop_step(self, u: str, v: str, directed: bool = False) -> PathStep:
        """Fold the parallel edges of hop u -> v into one labeled step.

        Forward edges win when both directions exist, so rendered prompts
        state the curated direction whenever one is recorded.
        """
        forward = sorted({e.relation for e in self.edges_between(u, v)})
        if forward:
            return PathStep(forward[0], "forward", tuple(forward))
        if not directed:
            reverse = sorted({e.relation for e in self.edges_between(v, u)})
            if reverse:
                return PathStep(reverse[0], "reverse", tuple(reverse))
        raise InputError(f"no edge connects {u!r} and {v!r}")


def _read_table(
    path: Path,
    canonical: Sequence[str],
    column_map: Mapping[str, str] | None,
) -> list[tuple[int, list[str]]]:
    """Yield (line_number, canonical-order fields) rows from a TSV table."""
    if not path.exists():
        raise GraphLoadError(f"missing file: {path}")
    rename = dict(column_map or {})
    wanted = [rename.get(c, c) for c in canonical]
    rows: list[tuple[int, list[str]]] = []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        positions = []
        for col in wanted:
            if col not in header:
                raise GraphLoadError(f"{path}: missing column {col!r} in header")
            positions.append(header.index(col))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < len(header):
                raise GraphLoadError(f"{path}:{lineno}: expected {len(header)} columns")
            rows.append((lineno, [fields[p] for p in positions]))
    return rows


def load_graph(
    node_table: str | Path,
    edge_table: str | Path,
    column_map: Mapping[str, str] | None = None,
) -> KnowledgeGraph:
    """Load and index a graph from TSV node/edge tables.

    Duplicate (src, dst, relation) edge rows are deduplicated (first wins).
    Edge rows referencing unknown nodes fail the load, with offending row
    numbers listed.
    """
    node_table, edge_table = Path(node_table), Path(edge_table)
    nodes = [
        KgNode(node_id=f[0], node_type=f[1], node_name=f[2], source=f[3])
        for _, f in _read_table(node_table, NODE_COLUMNS, column_map)
    ]
    known = {n.node_id for n in nodes}
    if len(known) != len(nodes):
        seen: set[str] = set()
        for n in nodes:
            if n.node_id in seen:
                raise GraphLoadError(f"{node_table}: duplicate node_id {n.node_id!r}")
            seen.add(n.node_id)

    edges: list[KgEdge] = []
    seen_edges: set[tuple[str, str, str]] = set()
    bad_rows: list[str] = []
    duplicates = 0
    for lineno, f in _read_table(edge_table, EDGE_COLUMNS, column_map):
        src, dst, relation, display = f
        missing = [x for x in (src, dst) if x not in known]
        if missing:
            bad_rows.append(f"row {lineno}: unknown node(s) {', '.join(missing)}")
            continue
        key = (src, dst, relation)
        if key in seen_edges:
            duplicates += 1
            continue
        seen_edges.add(key)
        edges.append(KgEdge(src=src, dst=dst, relation=relation, display_relation=display))
    if bad_rows:
        raise GraphLoadError(
            f"{edge_table}: edges reference unknown nodes ({'; '.join(bad_rows)})"
        )

    graph = KnowledgeGraph(nodes, edges)
    logger.info(
        "loaded graph: %d nodes, %d edges (%d duplicate edge rows dropped)",
        graph.num_nodes,
        graph.num_edges,
        duplicates,
    )
    return graph


def subgraph_for(g: KnowledgeGraph, paths: Sequence[ReasoningPath]) -> KnowledgeGraph:
    """Union of path nodes and traversed edges, reindexed as a graph."""
    node_ids: set[str] = set()
    edge_keys: set[tuple[str, str, str]] = set()
    for path in paths:
        for nid in path.nodes:
            if not g.has_node(nid):
                raise InputError(f"path references node {nid!r} absent from graph")
            node_ids.add(nid)
        steps = path.steps or tuple(
            g.hop_step(u, v) for u, v in zip(path.nodes, path.nodes[1:])
        )
        for (u, v), step in zip(zip(path.nodes, path.nodes[1:]), steps):
            a, b = (u, v) if step.orientation == "forward" else (v, u)
            for rel in step.relations or (step.relation,):
                edge_keys.add((a, b, rel))
    nodes = [g.nodes[nid] for nid in sorted(node_ids)]
    edges = [e for e in g.edges if (e.src, e.dst, e.relation) in edge_keys]
    return KnowledgeGraph(nodes, edges)
