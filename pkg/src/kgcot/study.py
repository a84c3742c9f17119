"""Blinded pairwise preference study: build, record, score.

Each comparison shows two anonymized sides; which system landed on side A is
a per-comparison seeded coin flip kept server-side only. The preference log
is append-only jsonl; resubmissions win logically (latest record per
comparison/annotator/dimension) while the log keeps full history.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from kgcot.errors import InputError
from kgcot.metrics import PredictionRecord

DIMENSIONS = ("clarity_coherence", "coverage_relevance", "correctness_soundness")
SIDES = ("A", "B")


@dataclass
class ComparisonCase:
    comparison_id: str
    input_summary: str
    ground_truth: int
    side_a: dict  # {"prediction": "yes"|"no", "trace": str}
    side_b: dict
    hidden_assignment: str  # system name shown as side A; never sent to clients

    def client_payload(self) -> dict:
        """Everything an annotator may see; assignment stays server-side."""
        return {
            "comparison_id": self.comparison_id,
            "input_summary": self.input_summary,
            "ground_truth": self.ground_truth,
            "side_a": self.side_a,
            "side_b": self.side_b,
        }


@dataclass
class PreferenceRecord:
    comparison_id: str
    annotator_id: str
    dimension: str
    choice: str  # "A" | "B" | "tie" (ties only when enabled)
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "comparison_id": self.comparison_id,
            "annotator_id": self.annotator_id,
            "dimension": self.dimension,
            "choice": self.choice,
            "timestamp": self.timestamp,
        }


def _verdict_of(record: PredictionRecord) -> str:
    if record.verdict is not None:
        return record.verdict
    return "yes" if record.probability >= 0.5 else "no"


def build_study(
    system1_records: Sequence[PredictionRecord],
    system2_records: Sequence[PredictionRecord],
    labels: Mapping[tuple[str, str], int],
    seed: int,
    names: tuple[str, str] = ("system_1", "system_2"),
    summaries: Mapping[tuple[str, str], str] | None = None,
    sample_size: int | None = None,
    ties_enabled: bool = False,
) -> dict:
    """Pair both systems' outputs per (case, disease) unit with seeded blinding.

    Both prediction files must cover the identical unit ids. Returns the
    study bundle (dict) that StudyStore loads; it contains the unblinded
    assignments, so treat the persisted file as sensitive.
    """
    if names[0] == names[1]:
        raise InputError("the two systems need distinct names")
    by_unit_1 = {(r.case_id, r.disease_id): r for r in system1_records}
    by_unit_2 = {(r.case_id, r.disease_id): r for r in system2_records}
    if set(by_unit_1) != set(by_unit_2):
        only_1 = sorted(set(by_unit_1) - set(by_unit_2))
        only_2 = sorted(set(by_unit_2) - set(by_unit_1))
        raise InputError(
            f"unit id mismatch between system outputs "
            f"(only in first: {only_1[:3]}, only in second: {only_2[:3]})"
        )

    units = sorted(by_unit_1)
    rng = random.Random(seed)
    if sample_size is not None and sample_size < len(units):
        units = sorted(rng.sample(units, sample_size))

    comparisons = []
    for case_id, disease_id in units:
        key = (case_id, disease_id)
        if key not in labels:
            raise InputError(f"missing ground-truth label for unit {key}")
        first_is_a = rng.random() < 0.5
        rec_a, rec_b = (by_unit_1[key], by_unit_2[key]) if first_is_a else (by_unit_2[key], by_unit_1[key])
        summary = (
            summaries.get(key) if summaries else None
        ) or f"Case {case_id}, target disease {disease_id}."
        comparisons.append(
            ComparisonCase(
                comparison_id=f"{case_id}:{disease_id}",
                input_summary=summary,
                ground_truth=int(labels[key]),
                side_a={"prediction": _verdict_of(rec_a), "trace": rec_a.trace or ""},
                side_b={"prediction": _verdict_of(rec_b), "trace": rec_b.trace or ""},
                hidden_assignment=names[0] if first_is_a else names[1],
            )
        )
    return {
        "seed": seed,
        "names": list(names),
        "ties_enabled": ties_enabled,
        "comparisons": [
            {**c.client_payload(), "hidden_assignment": c.hidden_assignment}
            for c in comparisons
        ],
    }


class StudyStore:
    """In-memory study state backed by an append-only preference log."""

    def __init__(self, bundle: dict, log_path: str | Path):
        self.names: tuple[str, str] = tuple(bundle["names"])  # type: ignore[assignment]
        self.ties_enabled: bool = bool(bundle.get("ties_enabled", False))
        self.comparisons: dict[str, ComparisonCase] = {}
        for raw in bundle["comparisons"]:
            case = ComparisonCase(
                comparison_id=raw["comparison_id"],
                input_summary=raw["input_summary"],
                ground_truth=int(raw["ground_truth"]),
                side_a=dict(raw["side_a"]),
                side_b=dict(raw["side_b"]),
                hidden_assignment=raw["hidden_assignment"],
            )
            if case.hidden_assignment not in self.names:
                raise InputError(
                    f"{case.comparison_id}: assignment {case.hidden_assignment!r} "
                    "names an unknown system"
                )
            self.comparisons[case.comparison_id] = case
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self._latest: dict[tuple[str, str, str], PreferenceRecord] = {}
        self._history: list[PreferenceRecord] = []
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._ingest(PreferenceRecord(**json.loads(line)))

    @classmethod
    def from_file(cls, study_path: str | Path, log_path: str | Path) -> "StudyStore":
        bundle = json.loads(Path(study_path).read_text(encoding="utf-8"))
        return cls(bundle, log_path)

    def _ingest(self, record: PreferenceRecord) -> None:
        self._history.append(record)
        self._latest[(record.comparison_id, record.annotator_id, record.dimension)] = record

    def allowed_choices(self) -> tuple[str, ...]:
        return SIDES + ("tie",) if self.ties_enabled else SIDES

    def next_case(self, annotator_id: str) -> dict:
        """Lowest-id comparison this annotator has not fully judged."""
        total = len(self.comparisons)
        completed = 0
        pending = None
        for comparison_id in sorted(self.comparisons):
            done = all(
                (comparison_id, annotator_id, dim) in self._latest for dim in DIMENSIONS
            )
            if done:
                completed += 1
            elif pending is None:
                pending = comparison_id
        progress = {"completed": completed, "total": total}
        if pending is None:
            return {"done": True, "progress": progress}
        payload = self.comparisons[pending].client_payload()
        payload["progress"] = progress
        payload["dimensions"] = list(DIMENSIONS)
        payload["ties_enabled"] = self.ties_enabled
        return payload

    def record_preference(
        self, comparison_id: str, annotator_id: str, dimension: str, choice: str
    ) -> dict:
        if comparison_id not in self.comparisons:
            raise InputError(f"unknown comparison {comparison_id!r}")
        if dimension not in DIMENSIONS:
            raise InputError(f"unknown dimension {dimension!r}")
        if choice not in self.allowed_choices():
            raise InputError(f"invalid choice {choice!r}")
        if not annotator_id:
            raise InputError("annotator_id required")
        record = PreferenceRecord(
            comparison_id=comparison_id,
            annotator_id=annotator_id,
            dimension=dimension,
            choice=choice,
            timestamp=time.time(),
        )
        with self._lock:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                fh.flush()
            self._ingest(record)
        return {"status": "recorded"}

    def _winner(self, record: PreferenceRecord) -> str | None:
        """De-anonymize a choice to the underlying system name."""
        if record.choice == "tie":
            return None
        assignment = self.comparisons[record.comparison_id].hidden_assignment
        other = self.names[1] if assignment == self.names[0] else self.names[0]
        return assignment if record.choice == "A" else other

    def report(self) -> dict:
        """Win counts and preference rates per dimension, pooled and
        per-annotator, computed from the latest record per slot."""
        def empty_bucket() -> dict:
            return {self.names[0]: 0, self.names[1]: 0, "ties": 0, "annotated": 0}

        pooled = {dim: empty_bucket() for dim in DIMENSIONS}
        per_annotator: dict[str, dict] = {}
        for record in self._latest.values():
            buckets = [pooled[record.dimension]]
            annotator = per_annotator.setdefault(
                record.annotator_id, {dim: empty_bucket() for dim in DIMENSIONS}
            )
            buckets.append(annotator[record.dimension])
            winner = self._winner(record)
            for bucket in buckets:
                bucket["annotated"] += 1
                if winner is None:
                    bucket["ties"] += 1
                else:
                    bucket[winner] += 1

        def rates(bucket: dict) -> dict:
            judged = bucket["annotated"] - bucket["ties"]
            out = {}
            for name in self.names:
                if judged == 0:
                    out[name] = {"wins": bucket[name], "rate_pct": None}
                else:
                    out[name] = {
                        "wins": bucket[name],
                        "rate_pct": round(100.0 * bucket[name] / judged, 2),
                    }
            out["annotated"] = bucket["annotated"]
            out["ties"] = bucket["ties"]
            out["undefined"] = judged == 0
            return out

        return {
            "systems": list(self.names),
            "dimensions": {dim: rates(pooled[dim]) for dim in DIMENSIONS},
            "per_annotator": {
                annotator: {dim: rates(buckets[dim]) for dim in DIMENSIONS}
                for annotator, buckets in sorted(per_annotator.items())
            },
            "total_comparisons": len(self.comparisons),
            "total_preferences": len(self._history),
        }

    def export_lines(self) -> Iterable[str]:
        for record in self._history:
            yield json.dumps(record.to_dict(), sort_keys=True)


def write_study(bundle: dict, path: str | Path) -> None:
    # contains unblinded assignments; keep it out of client-served directories
    Path(path).write_text(json.dumps(bundle, indent=2, sort_keys=True) + "\n", encoding="utf-8")
