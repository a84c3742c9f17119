"""KG-anchored trace generation, conclusion parsing, label-consistency filter.

Generation prompts carry the ground-truth outcome so the provider can write
a consistent trace; the emitted corpus strips that line from the user
message (a tuned model must predict the label, not copy it) while the
assistant message keeps the full trace ending in its conclusion.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from kgcot.cohort import IndexCase
from kgcot.errors import EvidenceError, ProviderError
from kgcot.evidence import DiseaseEvidence, render_path
from kgcot.gateway import ChatRequest, Gateway, map_ordered
from kgcot.kg.graph import KnowledgeGraph
from kgcot.metrics import PredictionRecord, derive_probability
from kgcot.prompts import PromptTemplate, load_template, render

logger = logging.getLogger(__name__)

LABEL_MARKER = "Ground-truth next-visit outcome:"
PROMPT_CHAR_BUDGET_DEFAULT = 6000
GENERATION_TEMPERATURE_DEFAULT = 0.7

_CONCLUSION_LINE = re.compile(r"^\s*conclusion\s*:\s*(yes|no)\s*[.!?]*\s*$", re.IGNORECASE)
_YES_NO_TOKEN = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


@dataclass
class CotContext:
    case_id: str
    disease_id: str
    disease_name: str
    codes_present: list[str]  # descriptions, relevance-mapped codes first
    relevance_present: list[str]  # node names expressed at the index visit
    relevance_absent: list[str]
    paths_rendered: list[str]
    ground_truth: int


@dataclass
class CotTrace:
    text: str
    conclusion: str  # "yes" | "no" | "unparseable"


@dataclass
class CorpusSample:
    sample_id: str
    case_id: str
    disease_id: str
    messages: list[dict]  # system / user / assistant
    label: int
    conclusion: str
    kept: bool

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "case_id": self.case_id,
            "disease_id": self.disease_id,
            "messages": self.messages,
            "label": self.label,
            "conclusion": self.conclusion,
        }


def partition_relevance(
    case: IndexCase,
    evidence: DiseaseEvidence,
    code_to_node: Mapping[str, str],
) -> tuple[list[str], list[str]]:
    """Split relevance members into expressed / not expressed at the visit."""
    case_nodes = {code_to_node[c] for c in case.codes_t if c in code_to_node}
    present = [m for m in evidence.relevance.members if m in case_nodes]
    absent = [m for m in evidence.relevance.members if m not in case_nodes]
    return present, absent


def build_context(
    case: IndexCase,
    evidence: DiseaseEvidence,
    kg: KnowledgeGraph,
    code_to_node: Mapping[str, str],
    descriptions: Mapping[str, str],
) -> CotContext:
    present, absent = partition_relevance(case, evidence, code_to_node)
    member_set = set(evidence.relevance.members)
    mapped = [c for c in case.codes_t if code_to_node.get(c) in member_set]
    unmapped = [c for c in case.codes_t if c not in mapped]
    ordered_codes = mapped + unmapped
    return CotContext(
        case_id=case.case_id,
        disease_id=evidence.disease_id,
        disease_name=kg.node(evidence.disease_node).node_name,
        codes_present=[descriptions.get(c, c) for c in ordered_codes],
        relevance_present=[kg.node(n).node_name for n in present],
        relevance_absent=[kg.node(n).node_name for n in absent],
        paths_rendered=[render_path(p, kg) for p in evidence.paths],
        ground_truth=case.labels[evidence.disease_id],
    )


def _bullets(items: Sequence[str], empty: str) -> str:
    return "\n".join(f"- {item}" for item in items) if items else empty


def render_prompt(
    ctx: CotContext,
    include_label: bool,
    template: PromptTemplate | None = None,
    system_template: PromptTemplate | None = None,
    char_budget: int = PROMPT_CHAR_BUDGET_DEFAULT,
    include_absent: bool = True,
) -> tuple[tuple[str, str], ...]:
    """(system, user) messages for one (case, disease) unit.

    include_label=True embeds the ground truth for generation; False renders
    the label-free variant emitted into the corpus. Oversized contexts drop
    trailing diagnosis descriptions (relevance-mapped ones survive first);
    reasoning chains are never truncated.
    """
    template = template or load_template("cot_generate")
    system_template = system_template or load_template("cot_system")
    label_block = (
        f"\n{LABEL_MARKER} {'Yes' if ctx.ground_truth else 'No'}\n" if include_label else "\n"
    )

    codes = list(ctx.codes_present)
    omitted = 0
    while True:
        code_lines = _bullets(codes, "- (no diagnoses recorded)")
        if omitted:
            code_lines += f"\n- ... ({omitted} further diagnoses omitted)"
        user = render(
            template,
            {
                "case_id": ctx.case_id,
                "disease_name": ctx.disease_name,
                "codes_present": code_lines,
                "relevance_present": _bullets(ctx.relevance_present, "- (none)"),
                "relevance_absent": _bullets(ctx.relevance_absent, "- (none)")
                if include_absent
                else "- (not provided)",
                "paths": _bullets(ctx.paths_rendered, "- (no reasoning chains available)"),
                "label_block": label_block,
            },
        )
        if len(user) <= char_budget or len(codes) <= len(ctx.relevance_present):
            break
        codes.pop()
        omitted += 1
    return (("system", render(system_template, {})), ("user", user))


def parse_conclusion(text: str) -> str:
    """Anchored `Conclusion: Yes|No` on the final non-empty line, with a
    last-token fallback over the trailing 200 characters."""
    lines = [line for line in text.strip().splitlines() if line.strip()]
    if lines:
        match = _CONCLUSION_LINE.match(lines[-1])
        if match:
            return match.group(1).lower()
    tokens = _YES_NO_TOKEN.findall(text[-200:])
    if tokens:
        return tokens[-1].lower()
    return "unparseable"


@dataclass
class GenerationResult:
    samples: list[CorpusSample]
    predictions: list[PredictionRecord]
    report: dict


def generate_and_filter(
    cases: Sequence[IndexCase],
    disease_ids: Sequence[str],
    evidence_by_disease: Mapping[str, DiseaseEvidence],
    kg: KnowledgeGraph,
    code_to_node: Mapping[str, str],
    descriptions: Mapping[str, str],
    gateway: Gateway,
    temperature: float = GENERATION_TEMPERATURE_DEFAULT,
    char_budget: int = PROMPT_CHAR_BUDGET_DEFAULT,
    include_absent: bool = True,
    fail_fast: bool = False,
    templates: dict[str, PromptTemplate] | None = None,
) -> GenerationResult:
    """Generate one trace per (case, disease), keep label-consistent ones.

    Output order is (case_id, disease_id) regardless of completion order.
    Provider failures mark the unit failed and the run continues unless
    fail_fast is set.
    """
    for disease_id in disease_ids:
        if disease_id not in evidence_by_disease:
            raise EvidenceError(f"no evidence for target disease {disease_id!r}")
    templates = templates or {}
    gen_template = templates.get("cot_generate")
    sys_template = templates.get("cot_system")

    units = sorted(
        ((case, d) for case in cases for d in sorted(disease_ids)),
        key=lambda u: (u[0].case_id, u[1]),
    )

    def run_unit(unit: tuple[IndexCase, str]):
        case, disease_id = unit
        ctx = build_context(
            case, evidence_by_disease[disease_id], kg, code_to_node, descriptions
        )
        gen_messages = render_prompt(
            ctx, include_label=True, template=gen_template, system_template=sys_template,
            char_budget=char_budget, include_absent=include_absent,
        )
        try:
            reply = gateway.chat(
                ChatRequest(messages=gen_messages, temperature=temperature, tag="cot_generate")
            )
        except ProviderError as err:
            if fail_fast:
                raise
            return case, disease_id, ctx, None, str(err)
        return case, disease_id, ctx, reply, None

    outcomes = map_ordered(run_unit, units, max_workers=gateway.max_in_flight)

    samples: list[CorpusSample] = []
    predictions: list[PredictionRecord] = []
    counts = {"generated": 0, "kept": 0, "dropped_mismatch": 0, "dropped_unparseable": 0, "failed": 0}
    per_disease: dict[str, dict] = {
        d: dict.fromkeys(counts, 0) for d in sorted(disease_ids)
    }
    failed_units: list[dict] = []

    for case, disease_id, ctx, reply, error in outcomes:
        counts["generated"] += 1
        per_disease[disease_id]["generated"] += 1
        if reply is None:
            counts["failed"] += 1
            per_disease[disease_id]["failed"] += 1
            failed_units.append(
                {"case_id": case.case_id, "disease_id": disease_id, "error": error}
            )
            continue
        trace = CotTrace(text=reply.text, conclusion=parse_conclusion(reply.text))
        label = ctx.ground_truth
        if trace.conclusion == "unparseable":
            kept = False
            counts["dropped_unparseable"] += 1
            per_disease[disease_id]["dropped_unparseable"] += 1
        elif (trace.conclusion == "yes") == bool(label):
            kept = True
            counts["kept"] += 1
            per_disease[disease_id]["kept"] += 1
        else:
            kept = False
            counts["dropped_mismatch"] += 1
            per_disease[disease_id]["dropped_mismatch"] += 1

        corpus_messages = render_prompt(
            ctx, include_label=False, template=gen_template, system_template=sys_template,
            char_budget=char_budget, include_absent=include_absent,
        )
        samples.append(
            CorpusSample(
                sample_id=f"{case.case_id}:{disease_id}",
                case_id=case.case_id,
                disease_id=disease_id,
                messages=[
                    {"role": "system", "content": corpus_messages[0][1]},
                    {"role": "user", "content": corpus_messages[1][1]},
                    {"role": "assistant", "content": trace.text},
                ],
                label=label,
                conclusion=trace.conclusion,
                kept=kept,
            )
        )
        probability, method = derive_probability(trace.conclusion, reply.token_scores)
        predictions.append(
            PredictionRecord(
                case_id=case.case_id,
                disease_id=disease_id,
                probability=probability,
                verdict=trace.conclusion if trace.conclusion in ("yes", "no") else None,
                trace=trace.text,
            )
        )

    report = {
        "counts": counts,
        "per_disease": per_disease,
        "failed_units": failed_units,
    }
    return GenerationResult(samples=samples, predictions=predictions, report=report)


def write_corpus(samples: Sequence[CorpusSample], path: str | Path) -> None:
    """Emit kept samples only, in (case_id, disease_id) order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample in samples:
            if sample.kept:
                fh.write(json.dumps(sample.to_dict(), sort_keys=True) + "\n")


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "case_id": record.case_id,
                        "disease_id": record.disease_id,
                        "probability": record.probability,
                        "verdict": record.verdict,
                        "trace": record.trace,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
