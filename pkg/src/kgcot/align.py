"""Three-stage vocabulary-to-KG alignment: exact, similarity, LLM validation.

Stage 1 matches normalized labels and short-circuits the later stages.
Stage 2 takes the top cosine candidate when it strictly exceeds the
threshold. Stage 3 asks the chat provider to confirm, revise (only to a
node inside the candidate set), or reject each provisional mapping.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from kgcot.cohort import load_vocab
from kgcot.errors import AlignmentError, ProviderError
from kgcot.gateway import ChatRequest, Gateway, map_ordered
from kgcot.kg.graph import KnowledgeGraph, normalize_name
from kgcot.prompts import PromptTemplate, load_template, render

logger = logging.getLogger(__name__)

SIMILARITY_THRESHOLD_DEFAULT = 0.85
CANDIDATE_COUNT_DEFAULT = 20

STAGES = ("exact", "similarity", "llm_validated", "llm_revised", "rejected")

_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


@dataclass(frozen=True)
class ConceptEntry:
    code: str
    description: str

    def __post_init__(self) -> None:
        if not self.description:
            raise AlignmentError(f"entry {self.code!r} has empty description")


@dataclass
class CandidateSet:
    entry: ConceptEntry
    candidates: list[tuple[str, float]]  # (node_id, cosine), non-increasing

    def node_ids(self) -> set[str]:
        return {nid for nid, _ in self.candidates}

    def score_of(self, node_id: str) -> float | None:
        for nid, score in self.candidates:
            if nid == node_id:
                return score
        return None


@dataclass
class MappingRecord:
    code: str
    node_id: str | None
    stage: str
    score: float
    note: str = ""
    candidate_set: CandidateSet | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise AlignmentError(f"bad stage {self.stage!r}")
        if (self.node_id is None) != (self.stage == "rejected"):
            raise AlignmentError(
                f"{self.code}: node_id must be null exactly when stage is rejected"
            )
        if self.stage == "exact" and self.score != 1.0:
            raise AlignmentError(f"{self.code}: exact mapping must score 1.0")

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "node_id": self.node_id,
            "stage": self.stage,
            "score": round(self.score, 6),
            "note": self.note,
        }


class NodeEmbeddingIndex:
    """Cosine ranking over the embedded names of a fixed node pool."""

    def __init__(self, kg: KnowledgeGraph, gateway: Gateway, node_ids: Sequence[str] | None = None):
        pool = sorted(node_ids) if node_ids is not None else list(kg.node_ids)
        texts = [normalize_name(kg.node(nid).node_name) for nid in pool]
        vectors = np.asarray(gateway.embed(texts), dtype=float)
        norms = np.linalg.norm(vectors, axis=1)
        usable = norms > 0.0
        for nid, ok in zip(pool, usable):
            if not ok:
                logger.warning("node %s has a zero-norm embedding; skipped", nid)
        self.node_ids = [nid for nid, ok in zip(pool, usable) if ok]
        self._unit = vectors[usable] / norms[usable, None]
        self._gateway = gateway

    def rank(self, text: str) -> list[tuple[str, float]]:
        """All pool nodes by cosine to text, ties broken by node_id."""
        (vector,) = self._gateway.embed([normalize_name(text)])
        v = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise AlignmentError(f"zero-norm embedding for {text!r}")
        scores = self._unit @ (v / norm)
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], self.node_ids[i]))
        return [(self.node_ids[i], float(scores[i])) for i in order]


def retrieve_candidates(
    entry: ConceptEntry,
    index: NodeEmbeddingIndex,
    c: int = CANDIDATE_COUNT_DEFAULT,
) -> CandidateSet:
    ranked = index.rank(entry.description)
    return CandidateSet(entry=entry, candidates=ranked[:c])


def stage1_exact(entry: ConceptEntry, kg: KnowledgeGraph, node_pool: set[str] | None = None) -> MappingRecord | None:
    """Exact label match under name normalization; lowest node_id on clashes."""
    matches = kg.name_index.get(normalize_name(entry.description), [])
    if node_pool is not None:
        matches = [nid for nid in matches if nid in node_pool]
    if not matches:
        return None
    note = ""
    if len(matches) > 1:
        note = f"label shared by {len(matches)} nodes; lowest node_id chosen"
        logger.warning("%s: %s", entry.code, note)
    return MappingRecord(
        code=entry.code, node_id=matches[0], stage="exact", score=1.0, note=note
    )


def stage2_similarity(
    entry: ConceptEntry,
    candidates: CandidateSet,
    tau: float = SIMILARITY_THRESHOLD_DEFAULT,
) -> MappingRecord | None:
    """Top candidate when its cosine strictly exceeds tau."""
    if not candidates.candidates:
        return None
    node_id, score = candidates.candidates[0]
    if score > tau:
        return MappingRecord(
            code=entry.code,
            node_id=node_id,
            stage="similarity",
            score=score,
            candidate_set=candidates,
        )
    return None


def _parse_validation_reply(text: str) -> dict | None:
    match = _JSON_OBJECT.search(text)
    if not match:
        return None
    try:
        obj = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or obj.get("verdict") not in ("confirm", "revise", "reject"):
        return None
    return obj


def stage3_validate(
    provisional: Sequence[MappingRecord],
    gateway: Gateway,
    kg: KnowledgeGraph,
    template: PromptTemplate | None = None,
    max_in_flight: int = 4,
) -> list[MappingRecord]:
    """Confirm, revise, or reject provisional similarity mappings.

    A revision naming a node outside the record's candidate set is treated as
    a rejection (anti-hallucination guard), as is an unparseable reply or a
    provider failure.
    """
    template = template or load_template("entity_select")

    def validate(record: MappingRecord) -> MappingRecord:
        if record.candidate_set is None or record.node_id is None:
            raise AlignmentError(f"{record.code}: provisional record lacks candidates")
        entry = record.candidate_set.entry
        node = kg.node(record.node_id)
        candidate_lines = "\n".join(
            f"{nid}: {kg.node(nid).node_name} (type: {kg.node(nid).node_type}, "
            f"similarity: {score:.4f})"
            for nid, score in record.candidate_set.candidates
        )
        prompt = render(
            template,
            {
                "code": entry.code,
                "description": entry.description,
                "node_id": node.node_id,
                "node_name": node.node_name,
                "node_type": node.node_type,
                "candidates": candidate_lines,
            },
        )
        try:
            reply = gateway.chat(
                ChatRequest(messages=(("user", prompt),), temperature=0.0, tag="entity_select")
            )
        except ProviderError as err:
            return MappingRecord(
                record.code, None, "rejected", 0.0,
                note=f"provider failure: {err}", candidate_set=record.candidate_set,
            )
        verdict = _parse_validation_reply(reply.text)
        if verdict is None:
            return MappingRecord(
                record.code, None, "rejected", 0.0,
                note="unparseable validation reply", candidate_set=record.candidate_set,
            )
        if verdict["verdict"] == "confirm":
            return MappingRecord(
                record.code, record.node_id, "llm_validated", record.score,
                note=record.note, candidate_set=record.candidate_set,
            )
        if verdict["verdict"] == "revise":
            revised = verdict.get("node_id")
            score = record.candidate_set.score_of(revised) if revised else None
            if score is None:
                return MappingRecord(
                    record.code, None, "rejected", 0.0,
                    note="out-of-candidate revision", candidate_set=record.candidate_set,
                )
            return MappingRecord(
                record.code, revised, "llm_revised", score,
                note=f"revised from {record.node_id}", candidate_set=record.candidate_set,
            )
        return MappingRecord(
            record.code, None, "rejected", 0.0,
            note=f"rejected by validator: {verdict.get('reason', '')}",
            candidate_set=record.candidate_set,
        )

    return map_ordered(validate, provisional, max_workers=max_in_flight)


@dataclass
class AlignmentResult:
    records: list[MappingRecord]
    summary: dict
    disease_nodes: dict[str, MappingRecord]

    def feature_node_ids(self) -> list[str]:
        """Distinct mapped feature nodes, in first-mapped vocabulary order."""
        seen: list[str] = []
        for record in self.records:
            if record.node_id and record.node_id not in seen:
                seen.append(record.node_id)
        return seen

    def code_to_node(self) -> dict[str, str]:
        return {r.code: r.node_id for r in self.records if r.node_id}


def _align_entry(
    entry: ConceptEntry,
    kg: KnowledgeGraph,
    index: NodeEmbeddingIndex,
    tau: float,
    c: int,
    node_pool: set[str] | None = None,
) -> MappingRecord:
    """Stages 1 and 2 for one entry; unresolved entries come back rejected."""
    exact = stage1_exact(entry, kg, node_pool)
    if exact is not None:
        return exact
    candidates = retrieve_candidates(entry, index, c)
    provisional = stage2_similarity(entry, candidates, tau)
    if provisional is not None:
        return provisional
    top = candidates.candidates[0][1] if candidates.candidates else float("nan")
    return MappingRecord(
        entry.code, None, "rejected", 0.0,
        note=f"no provisional mapping (top similarity {top:.4f} <= {tau})",
        candidate_set=candidates,
    )


def run_alignment(
    vocab: Sequence[ConceptEntry],
    kg: KnowledgeGraph,
    gateway: Gateway,
    targets: Sequence[tuple[str, str]] = (),
    tau: float = SIMILARITY_THRESHOLD_DEFAULT,
    c: int = CANDIDATE_COUNT_DEFAULT,
    validate: bool = True,
    template: PromptTemplate | None = None,
    max_in_flight: int = 4,
) -> AlignmentResult:
    """Align every vocabulary entry and resolve the disease targets.

    targets are (disease_id, description) pairs resolved against
    disease-typed nodes only; an unresolvable target is a hard error because
    evidence mining needs a disease anchor node.
    """
    index = NodeEmbeddingIndex(kg, gateway)
    records = [_align_entry(entry, kg, index, tau, c) for entry in vocab]

    if validate:
        provisional_positions = [
            i for i, r in enumerate(records) if r.stage == "similarity"
        ]
        validated = stage3_validate(
            [records[i] for i in provisional_positions],
            gateway,
            kg,
            template=template,
            max_in_flight=max_in_flight,
        )
        for position, record in zip(provisional_positions, validated):
            records[position] = record

    disease_nodes: dict[str, MappingRecord] = {}
    if targets:
        disease_pool = {n.node_id for n in kg.nodes_by_type("disease")}
        if not disease_pool:
            raise AlignmentError("graph contains no disease-typed nodes")
        disease_index = NodeEmbeddingIndex(kg, gateway, node_ids=sorted(disease_pool))
        for disease_id, description in targets:
            entry = ConceptEntry(code=disease_id, description=description)
            record = _align_entry(entry, kg, index=disease_index, tau=tau, c=c, node_pool=disease_pool)
            if validate and record.stage == "similarity":
                (record,) = stage3_validate(
                    [record], gateway, kg, template=template, max_in_flight=1
                )
            if record.node_id is None:
                raise AlignmentError(
                    f"disease target {disease_id!r} unresolvable: {record.note}"
                )
            disease_nodes[disease_id] = record

    stage_counts = {stage: 0 for stage in STAGES}
    for record in records:
        stage_counts[record.stage] += 1
    summary = {
        "total": len(records),
        "stages": stage_counts,
        "disease_targets": {d: r.node_id for d, r in disease_nodes.items()},
    }
    return AlignmentResult(records=records, summary=summary, disease_nodes=disease_nodes)


def load_vocab_entries(path: str | Path) -> list[ConceptEntry]:
    return [ConceptEntry(code=c, description=d) for c, d in load_vocab(path)]


def write_mapping(records: Sequence[MappingRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def load_mapping(path: str | Path) -> list[MappingRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(
                MappingRecord(
                    code=obj["code"],
                    node_id=obj["node_id"],
                    stage=obj["stage"],
                    score=float(obj["score"]),
                    note=obj.get("note", ""),
                )
            )
    return records
