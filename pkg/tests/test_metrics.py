"""Metric implementations against brute-force oracles."""

import math
import random

import pytest

from kgcot.errors import InputError
from kgcot.metrics import (
    MetricReport,
    PredictionRecord,
    aupr,
    auroc,
    classify_and_score,
    derive_probability,
)


def oracle_auroc(scores, labels):
    """Pairwise concordance count, half credit for ties."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def oracle_aupr(scores, labels):
    """Recount precision/recall from scratch at each unique threshold."""
    pos = sum(labels)
    if pos == 0:
        return None
    area = 0.0
    prev_recall = 0.0
    for threshold in sorted(set(scores), reverse=True):
        predicted = [s >= threshold for s in scores]
        tp = sum(1 for p, y in zip(predicted, labels) if p and y == 1)
        k = sum(predicted)
        precision = tp / k
        recall = tp / pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def random_instance(rng, n_max=50):
    n = rng.randint(2, n_max)
    # coarse grid forces ties
    scores = [rng.choice([i / 10 for i in range(11)]) for _ in range(n)]
    labels = [rng.randint(0, 1) for _ in range(n)]
    return scores, labels


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0

    def test_spot_value_three_quarters(self):
        assert abs(auroc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) - 0.75) <= 1e-9

    def test_single_class_undefined(self):
        assert auroc([0.9, 0.8], [1, 1]) is None
        assert auroc([0.9, 0.8], [0, 0]) is None

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            auroc([0.5], [1, 0])

    def test_matches_oracle_with_ties(self):
        rng = random.Random(42)
        for _ in range(100):
            scores, labels = random_instance(rng)
            expected = oracle_auroc(scores, labels)
            got = auroc(scores, labels)
            if expected is None:
                assert got is None
            else:
                assert abs(got - expected) <= 1e-9

    def test_invariant_under_monotone_transforms(self):
        rng = random.Random(7)
        for _ in range(50):
            scores, labels = random_instance(rng)
            base = auroc(scores, labels)
            if base is None:
                continue
            cubed = auroc([s**3 for s in scores], labels)
            affine = auroc([2 * s + 1 for s in scores], labels)
            assert abs(cubed - base) <= 1e-9
            assert abs(affine - base) <= 1e-9


class TestAupr:
    def test_single_positive_ranked_first(self):
        assert aupr([0.9, 0.1], [1, 0]) == 1.0

    def test_spot_value_hand_stepped(self):
        assert abs(aupr([0.9, 0.8, 0.7], [0, 1, 1]) - 0.58333) <= 1e-5

    def test_no_positives_undefined(self):
        assert aupr([0.9, 0.1], [0, 0]) is None

    def test_matches_oracle(self):
        rng = random.Random(13)
        for _ in range(100):
            scores, labels = random_instance(rng)
            expected = oracle_aupr(scores, labels)
            got = aupr(scores, labels)
            if expected is None:
                assert got is None
            else:
                assert abs(got - expected) <= 1e-9


class TestClassifyAndScore:
    def test_two_record_perfect(self):
        records = [
            PredictionRecord("c1", "d1", 0.6),
            PredictionRecord("c2", "d1", 0.4),
        ]
        labels = {("c1", "d1"): 1, ("c2", "d1"): 0}
        report = classify_and_score(records, labels)
        assert report.per_disease["d1"]["accuracy"] == 1.0
        assert report.per_disease["d1"]["f1"] == 1.0

    def test_boundary_probability_counts_positive(self):
        records = [PredictionRecord("c1", "d1", 0.5), PredictionRecord("c2", "d1", 0.1)]
        labels = {("c1", "d1"): 1, ("c2", "d1"): 0}
        report = classify_and_score(records, labels)
        assert report.per_disease["d1"]["accuracy"] == 1.0

    def test_verdict_overrides_threshold(self):
        records = [
            PredictionRecord("c1", "d1", 0.9, verdict="no"),
            PredictionRecord("c2", "d1", 0.2, verdict="no"),
        ]
        labels = {("c1", "d1"): 0, ("c2", "d1"): 0}
        report = classify_and_score(records, labels)
        assert report.per_disease["d1"]["accuracy"] == 1.0

    def test_macro_is_hand_mean_over_three_diseases(self):
        records, labels = [], {}
        rng = random.Random(3)
        for d in ("d1", "d2", "d3"):
            for i in range(8):
                case = f"c{i}"
                records.append(PredictionRecord(case, d, rng.random()))
                labels[(case, d)] = rng.randint(0, 1)
        report = classify_and_score(records, labels)
        for metric in ("accuracy", "auroc", "aupr", "f1"):
            values = [report.per_disease[d][metric] for d in ("d1", "d2", "d3")]
            defined = [v for v in values if v is not None]
            assert abs(report.macro[metric] - sum(defined) / len(defined)) <= 1e-12

    def test_single_class_disease_flagged_and_excluded(self):
        records = [
            PredictionRecord("c1", "d1", 0.9),
            PredictionRecord("c2", "d1", 0.2),
            PredictionRecord("c1", "d2", 0.9),
        ]
        labels = {("c1", "d1"): 1, ("c2", "d1"): 0, ("c1", "d2"): 1}
        report = classify_and_score(records, labels)
        assert report.per_disease["d2"]["auroc"] is None
        assert any("d2" in f for f in report.flags)
        assert report.macro["auroc"] == report.per_disease["d1"]["auroc"]

    def test_duplicate_rejected(self):
        records = [PredictionRecord("c1", "d1", 0.9), PredictionRecord("c1", "d1", 0.8)]
        with pytest.raises(InputError):
            classify_and_score(records, {("c1", "d1"): 1})

    def test_missing_label_rejected(self):
        with pytest.raises(InputError):
            classify_and_score([PredictionRecord("c1", "d1", 0.9)], {})

    def test_permutation_invariance(self):
        rng = random.Random(5)
        records, labels = [], {}
        for d in ("d1", "d2"):
            for i in range(10):
                records.append(PredictionRecord(f"c{i}", d, rng.choice([0.2, 0.5, 0.8])))
                labels[(f"c{i}", d)] = rng.randint(0, 1)
        forward = classify_and_score(records, labels)
        shuffled = records[:]
        rng.shuffle(shuffled)
        backward = classify_and_score(shuffled, labels)
        assert forward.to_dict() == backward.to_dict()

    def test_ranges(self):
        rng = random.Random(9)
        records, labels = [], {}
        for i in range(30):
            records.append(PredictionRecord(f"c{i}", "d1", rng.random()))
            labels[(f"c{i}", "d1")] = rng.randint(0, 1)
        report = classify_and_score(records, labels)
        for metric in ("accuracy", "auroc", "aupr", "f1"):
            value = report.per_disease["d1"][metric]
            assert value is None or 0.0 <= value <= 1.0


class TestDeriveProbability:
    def test_equal_logprobs_give_half(self):
        p, method = derive_probability("yes", [("Yes", -1.0), ("No", -1.0)])
        assert p == 0.5
        assert method == "token_logprobs"

    def test_verdict_only_yes(self):
        assert derive_probability("yes") == (1.0, "verdict")
        assert derive_probability("no") == (0.0, "verdict")

    def test_limit_case(self):
        p, _ = derive_probability("yes", [("yes", 0.0), ("no", -math.inf)])
        assert p == 1.0

    def test_unparseable_default(self):
        assert derive_probability("unparseable") == (0.5, "unparseable_default")
