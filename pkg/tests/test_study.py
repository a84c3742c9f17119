"""Study construction, preference accounting, blinding, and the HTTP API."""

import json
import random

import pytest
from fastapi.testclient import TestClient

from kgcot.errors import InputError
from kgcot.metrics import PredictionRecord
from kgcot.server import create_app
from kgcot.study import DIMENSIONS, StudyStore, build_study, write_study

NAMES = ("kg_guided", "plain_baseline")


def prediction_pair(n=6):
    system1, system2, labels = [], [], {}
    for i in range(n):
        case_id, disease_id = f"P{i:02d}#0", "pneumonia"
        system1.append(
            PredictionRecord(case_id, disease_id, 1.0, verdict="yes", trace=f"guided trace {i}")
        )
        system2.append(
            PredictionRecord(case_id, disease_id, 0.0, verdict="no", trace=f"plain trace {i}")
        )
        labels[(case_id, disease_id)] = i % 2
    return system1, system2, labels


def make_store(tmp_path, n=6, seed=7, ties=False):
    system1, system2, labels = prediction_pair(n)
    bundle = build_study(system1, system2, labels, seed=seed, names=NAMES, ties_enabled=ties)
    return StudyStore(bundle, tmp_path / "preferences.jsonl")


class TestBuildStudy:
    def test_unit_count_preserved(self, tmp_path):
        store = make_store(tmp_path, n=115)
        assert len(store.comparisons) == 115

    def test_id_mismatch_rejected(self):
        system1, system2, labels = prediction_pair(4)
        with pytest.raises(InputError):
            build_study(system1, system2[:-1], labels, seed=1, names=NAMES)

    def test_same_seed_identical_assignments(self):
        system1, system2, labels = prediction_pair(30)
        a = build_study(system1, system2, labels, seed=5, names=NAMES)
        b = build_study(system1, system2, labels, seed=5, names=NAMES)
        assert a == b

    def test_seeded_coin_flip_is_roughly_balanced(self):
        system1, system2, labels = prediction_pair(1000)
        bundle = build_study(system1, system2, labels, seed=11, names=NAMES)
        as_a = sum(
            1 for c in bundle["comparisons"] if c["hidden_assignment"] == NAMES[0]
        )
        assert 450 <= as_a <= 550

    def test_assignment_controls_side_content(self):
        system1, system2, labels = prediction_pair(50)
        bundle = build_study(system1, system2, labels, seed=3, names=NAMES)
        for c in bundle["comparisons"]:
            if c["hidden_assignment"] == NAMES[0]:
                assert "guided" in c["side_a"]["trace"]
            else:
                assert "plain" in c["side_a"]["trace"]


class TestPreferences:
    def test_record_and_ack(self, tmp_path):
        store = make_store(tmp_path)
        first = sorted(store.comparisons)[0]
        ack = store.record_preference(first, "ann1", "clarity_coherence", "A")
        assert ack == {"status": "recorded"}
        assert store.log_path.read_text().count("\n") == 1

    def test_closed_dimension_set(self, tmp_path):
        store = make_store(tmp_path)
        first = sorted(store.comparisons)[0]
        with pytest.raises(InputError):
            store.record_preference(first, "ann1", "speed", "A")

    def test_tie_rejected_unless_enabled(self, tmp_path):
        store = make_store(tmp_path)
        first = sorted(store.comparisons)[0]
        with pytest.raises(InputError):
            store.record_preference(first, "ann1", "clarity_coherence", "tie")

    def test_ties_counted_but_excluded_from_rates(self, tmp_path):
        store = make_store(tmp_path, ties=True)
        ordered = sorted(store.comparisons)
        store.record_preference(ordered[0], "ann1", "clarity_coherence", "tie")
        assignment = store.comparisons[ordered[1]].hidden_assignment
        system1_side = "A" if assignment == NAMES[0] else "B"
        store.record_preference(ordered[1], "ann1", "clarity_coherence", system1_side)
        bucket = store.report()["dimensions"]["clarity_coherence"]
        assert bucket["ties"] == 1
        assert bucket["annotated"] == 2
        assert bucket[NAMES[0]]["rate_pct"] == 100.0

    def test_resubmission_last_write_wins_log_keeps_history(self, tmp_path):
        store = make_store(tmp_path)
        first = sorted(store.comparisons)[0]
        store.record_preference(first, "ann1", "clarity_coherence", "A")
        store.record_preference(first, "ann1", "clarity_coherence", "B")
        assert len(list(store.export_lines())) == 2
        report = store.report()
        bucket = report["dimensions"]["clarity_coherence"]
        assert bucket["annotated"] == 1

    def test_unknown_comparison(self, tmp_path):
        store = make_store(tmp_path)
        with pytest.raises(InputError):
            store.record_preference("nope", "ann1", "clarity_coherence", "A")


class TestNextCase:
    def test_fresh_study_serves_lowest_id(self, tmp_path):
        store = make_store(tmp_path)
        payload = store.next_case("ann1")
        assert payload["comparison_id"] == sorted(store.comparisons)[0]

    def test_advances_after_all_dimensions(self, tmp_path):
        store = make_store(tmp_path)
        first = sorted(store.comparisons)[0]
        for dim in DIMENSIONS:
            store.record_preference(first, "ann1", dim, "A")
        assert store.next_case("ann1")["comparison_id"] == sorted(store.comparisons)[1]
        # a different annotator still starts at the beginning
        assert store.next_case("ann2")["comparison_id"] == first

    def test_done_marker(self, tmp_path):
        store = make_store(tmp_path, n=2)
        for comparison_id in sorted(store.comparisons):
            for dim in DIMENSIONS:
                store.record_preference(comparison_id, "ann1", dim, "B")
        payload = store.next_case("ann1")
        assert payload["done"] is True
        assert payload["progress"] == {"completed": 2, "total": 2}

    def test_payload_carries_no_assignment(self, tmp_path):
        store = make_store(tmp_path)
        blob = json.dumps(store.next_case("ann1"))
        assert "hidden_assignment" not in blob
        for name in NAMES:
            assert name not in blob


class TestReport:
    def scripted_store(self, tmp_path, wins_for_system1, total=115):
        """Force system1 to win `wins_for_system1` of `total` on every dimension."""
        store = make_store(tmp_path, n=total, seed=13)
        ordered = sorted(store.comparisons)
        for i, comparison_id in enumerate(ordered):
            assignment = store.comparisons[comparison_id].hidden_assignment
            system1_side = "A" if assignment == NAMES[0] else "B"
            other = "B" if system1_side == "A" else "A"
            choice = system1_side if i < wins_for_system1 else other
            for dim in DIMENSIONS:
                store.record_preference(comparison_id, "ann1", dim, choice)
        return store

    @pytest.mark.parametrize(
        "wins,expected_pct", [(111, 96.52), (109, 94.78), (113, 98.26)]
    )
    def test_rates_at_115_cases(self, tmp_path, wins, expected_pct):
        store = self.scripted_store(tmp_path, wins)
        report = store.report()
        for dim in DIMENSIONS:
            bucket = report["dimensions"][dim]
            assert bucket[NAMES[0]]["wins"] == wins
            assert bucket[NAMES[0]]["rate_pct"] == expected_pct
            assert bucket[NAMES[0]]["wins"] + bucket[NAMES[1]]["wins"] == bucket["annotated"]

    def test_empty_study_flagged_undefined(self, tmp_path):
        store = make_store(tmp_path)
        report = store.report()
        for dim in DIMENSIONS:
            assert report["dimensions"][dim]["undefined"] is True
            assert report["dimensions"][dim][NAMES[0]]["rate_pct"] is None

    def test_log_replay_reconstructs_report(self, tmp_path):
        store = self.scripted_store(tmp_path, 100)
        system1, system2, labels = prediction_pair(115)
        bundle = build_study(system1, system2, labels, seed=13, names=NAMES)
        replayed = StudyStore(bundle, store.log_path)
        assert replayed.report() == store.report()


def scripted_session(client, annotator, count=3):
    """Annotate `count` comparisons over HTTP; returns every response body."""
    bodies = []
    for _ in range(count):
        response = client.get(f"/api/study/next?annotator={annotator}")
        bodies.append(response.text)
        payload = response.json()
        if payload.get("done"):
            break
        for dim, choice in zip(DIMENSIONS, ("A", "B", "A")):
            ack = client.post(
                "/api/study/preference",
                json={
                    "comparison_id": payload["comparison_id"],
                    "annotator_id": annotator,
                    "dimension": dim,
                    "choice": choice,
                },
            )
            assert ack.status_code == 200
            bodies.append(ack.text)
    bodies.append(client.get(f"/api/study/export").text)
    bodies.append(client.get("/api/health").text)
    return bodies


class TestHttpApi:
    def client(self, tmp_path, **kwargs):
        return TestClient(create_app(make_store(tmp_path, **kwargs)))

    def test_health(self, tmp_path):
        assert self.client(tmp_path).get("/api/health").json() == {"status": "ok"}

    def test_round_trip_and_export(self, tmp_path):
        client = self.client(tmp_path)
        scripted_session(client, "ann1", count=2)
        lines = [l for l in client.get("/api/study/export").text.splitlines() if l]
        assert len(lines) == 6  # 2 comparisons x 3 dimensions
        parsed = [json.loads(l) for l in lines]
        assert {p["dimension"] for p in parsed} == set(DIMENSIONS)

    def test_invalid_dimension_400(self, tmp_path):
        client = self.client(tmp_path)
        payload = client.get("/api/study/next?annotator=a").json()
        response = client.post(
            "/api/study/preference",
            json={
                "comparison_id": payload["comparison_id"],
                "annotator_id": "a",
                "dimension": "speed",
                "choice": "A",
            },
        )
        assert response.status_code == 400

    def test_unknown_comparison_404(self, tmp_path):
        response = self.client(tmp_path).post(
            "/api/study/preference",
            json={
                "comparison_id": "missing",
                "annotator_id": "a",
                "dimension": "clarity_coherence",
                "choice": "A",
            },
        )
        assert response.status_code == 404

    def test_annotator_endpoints_never_leak_identities(self, tmp_path):
        client = self.client(tmp_path)
        bodies = scripted_session(client, "ann1", count=3)
        forbidden = [*NAMES, "hidden_assignment", "assignment"]
        for body in bodies:
            for token in forbidden:
                assert token not in body

    def test_report_de_anonymizes(self, tmp_path):
        client = self.client(tmp_path)
        scripted_session(client, "ann1", count=2)
        report = client.get("/api/study/report").json()
        assert set(report["systems"]) == set(NAMES)

    def test_study_file_roundtrip(self, tmp_path):
        system1, system2, labels = prediction_pair(4)
        bundle = build_study(system1, system2, labels, seed=2, names=NAMES)
        path = tmp_path / "study.json"
        write_study(bundle, path)
        store = StudyStore.from_file(path, tmp_path / "log.jsonl")
        assert len(store.comparisons) == 4

    def test_static_ui_hosting(self, tmp_path):
        ui_dir = tmp_path / "ui"
        ui_dir.mkdir()
        (ui_dir / "index.html").write_text("<html><body>review shell</body></html>")
        client = TestClient(create_app(make_store(tmp_path), ui_dir=ui_dir))
        home = client.get("/")
        assert home.status_code == 200
        assert "review shell" in home.text
        # API routes still win over the static mount
        assert client.get("/api/health").json() == {"status": "ok"}
