"""Per-disease KG evidence: LLM-selected relevance sets and pruned paths.

Both LLM stages are guarded against hallucination: relevance replies are
filtered to real feature nodes, and path pruning works over candidate
indices so a paraphrased reply can never smuggle in an invented chain.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from kgcot.align import NodeEmbeddingIndex
from kgcot.errors import EvidenceError, ProviderError
from kgcot.gateway import ChatRequest, Gateway
from kgcot.kg.graph import KnowledgeGraph, ReasoningPath
from kgcot.kg.paths import all_shortest_paths
from kgcot.prompts import PromptTemplate, load_template, render

logger = logging.getLogger(__name__)

RELEVANCE_SIZE_DEFAULT = 8
PATH_COUNT_DEFAULT = 5
HOP_BOUND_DEFAULT = 5
PATHS_PER_PAIR_DEFAULT = 64

_JSON_ARRAY = re.compile(r"\[.*?\]", re.DOTALL)


@dataclass
class RelevanceSet:
    disease_node: str
    members: list[str]  # mapped feature nodes, reply order, disease excluded

    def __post_init__(self) -> None:
        if self.disease_node in self.members:
            raise EvidenceError("relevance members must not include the disease node")
        if len(set(self.members)) != len(self.members):
            raise EvidenceError("duplicate relevance members")


@dataclass
class DiseaseEvidence:
    disease_id: str
    disease_node: str
    relevance: RelevanceSet
    paths: list[ReasoningPath]
    flags: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def validate(self, max_hops: int) -> None:
        members = set(self.relevance.members)
        for path in self.paths:
            if path.nodes[0] not in members:
                raise EvidenceError(
                    f"{self.disease_id}: path starts at {path.nodes[0]!r}, "
                    "not a relevance member"
                )
            if path.nodes[-1] != self.disease_node:
                raise EvidenceError(
                    f"{self.disease_id}: path ends at {path.nodes[-1]!r}, "
                    "not the disease node"
                )
            if path.length > max_hops:
                raise EvidenceError(f"{self.disease_id}: path exceeds hop bound")

    def to_dict(self) -> dict:
        return {
            "disease_id": self.disease_id,
            "disease_node": self.disease_node,
            "relevance": list(self.relevance.members),
            "paths": [p.to_dict() for p in self.paths],
            "flags": self.flags,
            "provenance": self.provenance,
        }


def render_path(path: ReasoningPath, kg: KnowledgeGraph) -> str:
    """Arrow-chain rendering with per-hop direction, e.g.
    "fever —[associated_with]→ pneumonia" (reverse hops point back)."""
    parts = [kg.node(path.nodes[0]).node_name]
    for step, node_id in zip(path.steps, path.nodes[1:]):
        name = kg.node(node_id).node_name
        if step.orientation == "forward":
            parts.append(f" —[{step.relation}]→ {name}")
        else:
            parts.append(f" ←[{step.relation}]— {name}")
    return "".join(parts)


def _parse_json_array(text: str) -> list | None:
    match = _JSON_ARRAY.search(text)
    if not match:
        return None
    try:
        value = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    return value if isinstance(value, list) else None


def select_relevant_nodes(
    disease_node: str,
    feature_nodes: Sequence[str],
    kg: KnowledgeGraph,
    gateway: Gateway,
    k_node: int = RELEVANCE_SIZE_DEFAULT,
    template: PromptTemplate | None = None,
    prefilter: int | None = None,
) -> tuple[RelevanceSet, list[str]]:
    """Ask the provider for the k_node features most predictive of the disease.

    Reply names outside the feature pool (or naming the disease itself) are
    dropped with a flag. An optional embedding prefilter caps how many
    feature nodes enter the prompt for very large vocabularies.
    """
    pool = sorted(set(feature_nodes) - {disease_node})
    if not pool:
        raise EvidenceError(f"no feature nodes available for {disease_node!r}")
    flags: list[str] = []
    if prefilter is not None and len(pool) > prefilter:
        index = NodeEmbeddingIndex(kg, gateway, node_ids=pool)
        ranked = index.rank(kg.node(disease_node).node_name)
        pool = sorted(nid for nid, _ in ranked[:prefilter])
        flags.append(f"prefilter kept top {prefilter} of {len(feature_nodes)} features")

    template = template or load_template("node_select")
    feature_lines = "\n".join(
        f"{nid}: {kg.node(nid).node_name} ({kg.node(nid).node_type})" for nid in pool
    )
    prompt = render(
        template,
        {
            "disease_name": kg.node(disease_node).node_name,
            "disease_node": disease_node,
            "feature_nodes": feature_lines,
            "k_node": str(k_node),
        },
    )
    reply = gateway.chat(
        ChatRequest(messages=(("user", prompt),), temperature=0.0, tag="node_select")
    )
    raw = _parse_json_array(reply.text)
    if raw is None:
        raise EvidenceError(
            f"relevance reply for {disease_node!r} is not a JSON array: {reply.text[:80]!r}"
        )
    members: list[str] = []
    pool_set = set(pool)
    for item in raw:
        name = str(item)
        if name == disease_node:
            flags.append(f"reply listed the disease node {name!r}; dropped")
            continue
        if name not in pool_set:
            flags.append(f"reply listed unknown feature {name!r}; dropped")
            continue
        if name not in members:
            members.append(name)
    members = members[:k_node]
    if not members:
        raise EvidenceError(f"no valid relevance members for {disease_node!r}")
    return RelevanceSet(disease_node=disease_node, members=members), flags


def extract_candidate_paths(
    relevance: RelevanceSet,
    kg: KnowledgeGraph,
    max_hops: int = HOP_BOUND_DEFAULT,
    max_paths_per_pair: int = PATHS_PER_PAIR_DEFAULT,
    directed: bool = False,
) -> tuple[list[ReasoningPath], list[str]]:
    """All hop-bounded shortest paths member -> disease, pooled per disease."""
    paths: list[ReasoningPath] = []
    flags: list[str] = []
    for member in relevance.members:
        member_paths = all_shortest_paths(
            kg,
            member,
            relevance.disease_node,
            max_hops=max_hops,
            max_paths=max_paths_per_pair,
            directed=directed,
        )
        if not member_paths:
            flags.append(f"no path within {max_hops} hops from {member!r}")
        paths.extend(member_paths)
    return paths, flags


def _shortest_first(paths: Sequence[ReasoningPath]) -> list[ReasoningPath]:
    return sorted(paths, key=lambda p: (p.length, p.nodes))


def prune_paths(
    candidates: Sequence[ReasoningPath],
    disease_node: str,
    kg: KnowledgeGraph,
    gateway: Gateway,
    k_path: int = PATH_COUNT_DEFAULT,
    template: PromptTemplate | None = None,
) -> tuple[list[ReasoningPath], list[str]]:
    """Keep at most k_path candidates chosen by index; fall back to the
    shortest candidates when the reply is unusable or the provider fails."""
    if not candidates:
        return [], []
    ordered = _shortest_first(candidates)
    template = template or load_template("path_select")
    candidate_lines = "\n".join(
        f"{i}. {render_path(path, kg)}" for i, path in enumerate(ordered)
    )
    prompt = render(
        template,
        {
            "disease_name": kg.node(disease_node).node_name,
            "candidates": candidate_lines,
            "k_path": str(k_path),
        },
    )
    flags: list[str] = []
    reply_indices: list[int] | None = None
    try:
        reply = gateway.chat(
            ChatRequest(messages=(("user", prompt),), temperature=0.0, tag="path_select")
        )
        raw = _parse_json_array(reply.text)
        if raw is not None:
            reply_indices = []
            for item in raw:
                try:
                    index = int(item)
                except (TypeError, ValueError):
                    flags.append(f"non-integer path index {item!r}; dropped")
                    continue
                if not 0 <= index < len(ordered):
                    flags.append(f"out-of-range path index {index}; dropped")
                    continue
                if index not in reply_indices:
                    reply_indices.append(index)
        else:
            flags.append(f"unparseable path-selection reply: {reply.text[:80]!r}")
    except ProviderError as err:
        flags.append(f"provider failure during path selection: {err}")

    if reply_indices:
        chosen = [ordered[i] for i in reply_indices[:k_path]]
    else:
        chosen = ordered[:k_path]
        flags.append("fallback: kept shortest candidates")
    return chosen, flags


def build_evidence(
    disease_id: str,
    disease_node: str,
    feature_nodes: Sequence[str],
    kg: KnowledgeGraph,
    gateway: Gateway,
    k_node: int = RELEVANCE_SIZE_DEFAULT,
    k_path: int = PATH_COUNT_DEFAULT,
    max_hops: int = HOP_BOUND_DEFAULT,
    max_paths_per_pair: int = PATHS_PER_PAIR_DEFAULT,
    directed: bool = False,
    prefilter: int | None = None,
    templates: dict[str, PromptTemplate] | None = None,
) -> DiseaseEvidence:
    """Relevance selection, path extraction, and pruning for one disease.

    A disease whose relevance members are all disconnected still yields
    evidence (empty paths, flagged) so downstream stages can degrade
    gracefully instead of stalling the pipeline.
    """
    templates = templates or {}
    relevance, flags = select_relevant_nodes(
        disease_node,
        feature_nodes,
        kg,
        gateway,
        k_node=k_node,
        template=templates.get("node_select"),
        prefilter=prefilter,
    )
    candidates, extract_flags = extract_candidate_paths(
        relevance, kg, max_hops=max_hops, max_paths_per_pair=max_paths_per_pair, directed=directed
    )
    flags.extend(extract_flags)
    if candidates:
        paths, prune_flags = prune_paths(
            candidates,
            disease_node,
            kg,
            gateway,
            k_path=k_path,
            template=templates.get("path_select"),
        )
        flags.extend(prune_flags)
    else:
        paths = []
        flags.append("no candidate paths within hop bound")
    used = {
        name: (templates.get(name) or load_template(name)).version
        for name in ("node_select", "path_select")
    }
    evidence = DiseaseEvidence(
        disease_id=disease_id,
        disease_node=disease_node,
        relevance=relevance,
        paths=paths,
        flags=flags,
        provenance={
            "provider": gateway.provider.provider_id,
            "templates": used,
            "k_node": k_node,
            "k_path": k_path,
            "max_hops": max_hops,
        },
    )
    evidence.validate(max_hops)
    return evidence


def write_evidence(evidence: DiseaseEvidence, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(evidence.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_evidence(path: str | Path) -> DiseaseEvidence:
    from kgcot.kg.graph import PathStep

    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    paths = []
    for p in obj["paths"]:
        nodes = tuple(p["nodes"])
        steps = tuple(
            PathStep(relation=s["relation"], orientation=s["orientation"])
            for s in p["steps"]
        )
        paths.append(ReasoningPath(nodes=nodes, steps=steps))
    return DiseaseEvidence(
        disease_id=obj["disease_id"],
        disease_node=obj["disease_node"],
        relevance=RelevanceSet(obj["disease_node"], list(obj["relevance"])),
        paths=paths,
        flags=list(obj.get("flags", [])),
        provenance=dict(obj.get("provenance", {})),
    )
