"""Cohort loading, pair construction, vectorization, and splits."""

import json
import random
from collections import Counter

import pytest

from kgcot.cohort import (
    IndexCase,
    Visit,
    build_pairs,
    load_cohort,
    make_splits,
    splits_to_json,
    vectorize,
)
from kgcot.errors import CohortError


def write_cohort(tmp_path, patients):
    path = tmp_path / "cohort.jsonl"
    with path.open("w") as fh:
        for p in patients:
            fh.write(json.dumps(p) + "\n")
    return path


def visit(pid, seq, codes):
    return Visit(patient_id=pid, seq=seq, codes=frozenset(codes))


class TestLoadCohort:
    def test_two_visits_ordered(self, tmp_path):
        path = write_cohort(
            tmp_path,
            [{"patient_id": "P1", "visits": [{"seq": 1, "codes": ["b"]}, {"seq": 0, "codes": ["a"]}]}],
        )
        visits = load_cohort(path)
        assert [v.seq for v in visits] == [0, 1]

    def test_duplicate_seq_names_patient_and_line(self, tmp_path):
        path = write_cohort(
            tmp_path,
            [{"patient_id": "P1", "visits": [{"seq": 0, "codes": ["a"]}, {"seq": 0, "codes": ["b"]}]}],
        )
        with pytest.raises(CohortError) as err:
            load_cohort(path)
        assert "P1" in str(err.value) and ":1" in str(err.value)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "cohort.jsonl"
        path.write_text('{"patient_id": "P1", "visits": []}\nnot json\n')
        with pytest.raises(CohortError) as err:
            load_cohort(path)
        assert ":2" in str(err.value)

    def test_fixture_visit_count_matches_manifest(self, fixtures_dir):
        manifest = json.loads((fixtures_dir / "manifest.json").read_text())
        visits = load_cohort(fixtures_dir / "cohort.jsonl")
        # independent oracle: sum visit list lengths straight off the file
        raw_total = 0
        with (fixtures_dir / "cohort.jsonl").open() as fh:
            for line in fh:
                if line.strip():
                    raw_total += len(json.loads(line)["visits"])
        assert len(visits) == raw_total == manifest["cohort"]["visits"]
        patients = {v.patient_id for v in visits}
        assert len(patients) == manifest["cohort"]["patients"]


class TestBuildPairs:
    LABEL_MAP = {"486": "pneumonia", "401.9": "hypertension"}
    TARGETS = ["pneumonia", "hypertension"]

    def test_single_visit_contributes_nothing(self):
        cases = build_pairs([visit("P1", 0, {"486"})], self.LABEL_MAP, self.TARGETS)
        assert cases == []

    def test_three_visits_give_two_cases(self):
        visits = [visit("P1", i, {"486"}) for i in range(3)]
        cases = build_pairs(visits, self.LABEL_MAP, self.TARGETS)
        assert [c.index_seq for c in cases] == [0, 1]

    def test_next_visit_code_sets_label(self):
        visits = [visit("P1", 0, {"999"}), visit("P1", 1, {"486", "777"})]
        (case,) = build_pairs(visits, self.LABEL_MAP, self.TARGETS)
        assert case.labels == {"pneumonia": 1, "hypertension": 0}

    def test_empty_targets_rejected(self):
        with pytest.raises(CohortError):
            build_pairs([visit("P1", 0, {"486"})], self.LABEL_MAP, [])

    def test_pair_count_identity(self):
        rng = random.Random(17)
        visits = []
        expected = 0
        for p in range(40):
            n = rng.randint(1, 5)
            expected += max(0, n - 1)
            for s in range(n):
                visits.append(visit(f"P{p:02d}", s, {"486"}))
        cases = build_pairs(visits, self.LABEL_MAP, self.TARGETS)
        assert len(cases) == expected


class TestVectorize:
    VOCAB = ["c0", "c1", "c2"]

    def case(self, codes):
        return IndexCase("x", "P", 0, tuple(sorted(codes)), {"d": 0})

    def test_single_known_code(self):
        fv = vectorize(self.case({"c0"}), self.VOCAB)
        assert fv.on_bits == (0,) and fv.dims == 3

    def test_empty_codes_zero_vector(self):
        fv = vectorize(self.case(set()), self.VOCAB)
        assert fv.on_bits == ()

    def test_unknown_codes_dropped_and_tallied(self):
        tally = Counter()
        fv = vectorize(self.case({"c0", "c1", "c2", "zz", "c0x"}), self.VOCAB, tally)
        assert fv.on_bits == (0, 1, 2)
        assert tally["unknown_codes"] == 2

    def test_round_trip(self):
        codes = {"c2", "c0"}
        fv = vectorize(self.case(codes), self.VOCAB)
        reconstructed = {self.VOCAB[i] for i in fv.on_bits}
        assert reconstructed == codes


def synthetic_cases(n):
    return [IndexCase(f"case{i:05d}", f"P{i:05d}", 0, ("c0",), {"d": 0}) for i in range(n)]


class TestMakeSplits:
    def test_large_cohort_floor_and_nesting(self):
        cases = synthetic_cases(12_353)
        splits = make_splits(cases, seed=7, test_frac=0.10, train_sizes=[400, 1000])
        assert len(splits["train_1000"].test_ids) == 1_235
        assert set(splits["train_400"].train_ids) < set(splits["train_1000"].train_ids)

    def test_disjointness_and_sizes(self):
        cases = synthetic_cases(2000)
        splits = make_splits(cases, seed=3, train_sizes=[100, 400])
        s = splits["train_400"]
        assert len(s.test_ids) == 200
        assert len(s.train_ids) == 400
        assert not set(s.test_ids) & set(s.train_ids)
        assert not set(s.test_ids) & set(s.dev_ids)
        assert not set(s.train_ids) & set(s.dev_ids)
        assert len(s.dev_ids) == 2000 - 200 - 400

    def test_insufficient_cases(self):
        with pytest.raises(CohortError):
            make_splits(synthetic_cases(100), seed=1, train_sizes=[400])

    def test_seed_determinism(self):
        cases = synthetic_cases(500)
        a = make_splits(cases, seed=11, train_sizes=[50])
        b = make_splits(cases, seed=11, train_sizes=[50])
        assert splits_to_json(a, 11) == splits_to_json(b, 11)

    def test_different_seed_differs(self):
        cases = synthetic_cases(500)
        a = make_splits(cases, seed=11, train_sizes=[50])
        b = make_splits(cases, seed=12, train_sizes=[50])
        assert splits_to_json(a, 11) != splits_to_json(b, 12)
