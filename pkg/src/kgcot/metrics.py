"""Discrimination metrics for prediction files.

AUROC uses the probability-of-concordance definition (ties get half credit);
AUPR is the average-precision step sum over descending unique thresholds.
Single-class diseases yield undefined values, which are excluded from macro
means and flagged rather than imputed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from kgcot.errors import InputError

METRIC_NAMES = ("accuracy", "auroc", "aupr", "f1")


@dataclass
class PredictionRecord:
    case_id: str
    disease_id: str
    probability: float
    verdict: str | None = None  # "yes" | "no"; derived from threshold when absent
    trace: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise InputError(
                f"probability {self.probability} outside [0, 1] "
                f"({self.case_id}/{self.disease_id})"
            )
        if self.verdict is not None and self.verdict not in ("yes", "no"):
            raise InputError(f"bad verdict {self.verdict!r}")


@dataclass
class MetricReport:
    per_disease: dict[str, dict]
    macro: dict
    threshold: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_disease": self.per_disease,
            "macro": self.macro,
            "threshold": self.threshold,
            "flags": self.flags,
        }


def _as_arrays(scores: Sequence[float], labels: Sequence[int]):
    if len(scores) != len(labels):
        raise InputError(f"length mismatch: {len(scores)} scores vs {len(labels)} labels")
    return np.asarray(scores, dtype=float), np.asarray(labels, dtype=int)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float | None:
    """Probability that a random positive outscores a random negative.

    Computed via tie-averaged ranks, which equals the pairwise concordance
    count with half credit for ties. Undefined (None) for single-class input.
    """
    s, y = _as_arrays(scores, labels)
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        return None
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=float)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def aupr(scores: Sequence[float], labels: Sequence[int]) -> float | None:
    """Average precision: sum of (R_k - R_{k-1}) * Prec_k over descending
    unique score thresholds. Undefined (None) when there are no positives."""
    s, y = _as_arrays(scores, labels)
    pos = int(y.sum())
    if pos == 0:
        return None
    order = np.argsort(-s, kind="stable")
    s_desc, y_desc = s[order], y[order]
    area = 0.0
    prev_recall = 0.0
    tp = 0
    k = 0
    n = len(s_desc)
    while k < n:
        j = k
        while j + 1 < n and s_desc[j + 1] == s_desc[k]:
            j += 1
        tp += int(y_desc[k : j + 1].sum())
        k = j + 1
        precision = tp / k
        recall = tp / pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def _f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def classify_and_score(
    records: Iterable[PredictionRecord],
    labels: Mapping[tuple[str, str], int],
    threshold: float = 0.5,
) -> MetricReport:
    """Score predictions per disease and macro-aggregate.

    Decisions come from the record's explicit verdict when present, else from
    probability >= threshold. Every record needs a label; duplicate
    (case, disease) records are rejected.
    """
    by_disease: dict[str, list[tuple[float, int, int]]] = {}
    seen: set[tuple[str, str]] = set()
    for rec in records:
        key = (rec.case_id, rec.disease_id)
        if key in seen:
            raise InputError(f"duplicate prediction for {key}")
        seen.add(key)
        if key not in labels:
            raise InputError(f"missing label for {key}")
        if rec.verdict is not None:
            decision = 1 if rec.verdict == "yes" else 0
        else:
            decision = 1 if rec.probability >= threshold else 0
        by_disease.setdefault(rec.disease_id, []).append(
            (rec.probability, int(labels[key]), decision)
        )
    if not by_disease:
        raise InputError("no prediction records")

    per_disease: dict[str, dict] = {}
    flags: list[str] = []
    for disease_id in sorted(by_disease):
        rows = by_disease[disease_id]
        probs = [r[0] for r in rows]
        truth = [r[1] for r in rows]
        decisions = [r[2] for r in rows]
        tp = sum(1 for d, t in zip(decisions, truth) if d == 1 and t == 1)
        fp = sum(1 for d, t in zip(decisions, truth) if d == 1 and t == 0)
        fn = sum(1 for d, t in zip(decisions, truth) if d == 0 and t == 1)
        correct = sum(1 for d, t in zip(decisions, truth) if d == t)
        entry = {
            "accuracy": correct / len(rows),
            "auroc": auroc(probs, truth),
            "aupr": aupr(probs, truth),
            "f1": _f1(tp, fp, fn),
            "support_pos": sum(truth),
            "support_neg": len(truth) - sum(truth),
        }
        for metric in ("auroc", "aupr"):
            if entry[metric] is None:
                flags.append(f"{disease_id}: {metric} undefined (single-class labels)")
        per_disease[disease_id] = entry

    macro: dict[str, float | None] = {}
    for metric in METRIC_NAMES:
        defined = [e[metric] for e in per_disease.values() if e[metric] is not None]
        macro[metric] = sum(defined) / len(defined) if defined else None
        if not defined:
            flags.append(f"macro {metric} undefined (no disease defines it)")
    return MetricReport(per_disease=per_disease, macro=macro, threshold=threshold, flags=flags)


def derive_probability(
    conclusion: str,
    token_scores: Sequence[tuple[str, float]] | None = None,
) -> tuple[float, str]:
    """Turn a parsed conclusion into a probability.

    When per-token logprobs expose both yes and no alternatives, use their
    softmax; otherwise fall back to 1.0 / 0.0 / 0.5 for yes / no /
    unparseable. Returns (probability, method).
    """
    if token_scores:
        lp = {}
        for token, logprob in token_scores:
            lp[token.strip().lower()] = logprob
        if "yes" in lp and "no" in lp:
            w_yes = math.exp(lp["yes"]) if lp["yes"] != -math.inf else 0.0
            w_no = math.exp(lp["no"]) if lp["no"] != -math.inf else 0.0
            if w_yes + w_no > 0:
                return w_yes / (w_yes + w_no), "token_logprobs"
    if conclusion == "yes":
        return 1.0, "verdict"
    if conclusion == "no":
        return 0.0, "verdict"
    return 0.5, "unparseable_default"


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    PredictionRecord(
                        case_id=obj["case_id"],
                        disease_id=obj["disease_id"],
                        probability=float(obj["probability"]),
                        verdict=obj.get("verdict"),
                        trace=obj.get("trace"),
                    )
                )
            except (KeyError, ValueError, TypeError) as err:
                raise InputError(f"{path}:{lineno}: bad prediction record: {err}") from err
    return records


def write_metrics(report: MetricReport, json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with Path(csv_path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["disease_id", *METRIC_NAMES, "support_pos", "support_neg"])
        for disease_id, entry in report.per_disease.items():
            writer.writerow(
                [disease_id]
                + [_fmt(entry[m]) for m in METRIC_NAMES]
                + [entry["support_pos"], entry["support_neg"]]
            )
        writer.writerow(["macro", *(_fmt(report.macro[m]) for m in METRIC_NAMES), "", ""])


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"
