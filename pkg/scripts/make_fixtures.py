"""Regenerates the bundled synthetic fixtures under fixtures/.

Deterministic: same seeds -> byte-identical fixture files. The script also
re-runs the alignment and generation stages against the freshly written
fixtures and asserts the scripted scenario behaves as designed (stage
counts, candidate pool sizes, label coverage) before anything is kept.
"""

from __future__ import annotations

import json
import random
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

NODES = [
    # node_id, node_type, node_name
    ("dz_pneumonia", "disease", "pneumonia"),
    ("dz_hypertension", "disease", "essential hypertension"),
    ("dz_copd", "disease", "chronic obstructive pulmonary disease"),
    ("dz_ckd", "disease", "chronic kidney disease"),
    ("dz_diabetes", "disease", "diabetes mellitus"),
    ("dz_cad", "disease", "coronary atherosclerosis"),
    ("ph_fever", "phenotype", "fever"),
    ("ph_cough", "phenotype", "cough"),
    ("ph_dyspnea", "phenotype", "dyspnea"),
    ("ph_chest_pain", "phenotype", "chest pain"),
    ("ph_edema", "phenotype", "edema"),
    ("ph_fatigue", "phenotype", "fatigue"),
    ("ph_headache", "phenotype", "headache"),
    ("ph_proteinuria", "phenotype", "proteinuria"),
    ("ph_wheezing", "phenotype", "wheezing"),
    ("ph_obesity", "phenotype", "obesity"),
    ("ph_tachycardia", "phenotype", "tachycardia"),
    ("ph_confusion", "phenotype", "confusion"),
    ("ph_hyperglycemia", "phenotype", "hyperglycemia"),
    ("ph_night_blindness", "phenotype", "night blindness"),  # kept isolated
    ("ph_immunodef", "phenotype", "immunodeficiency"),
    ("gn_ace", "gene", "ACE"),
    ("gn_il6", "gene", "IL6"),
    ("gn_tnf", "gene", "TNF"),
    ("gn_nos3", "gene", "NOS3"),
    ("gn_apoe", "gene", "APOE"),
    ("gn_tlr4", "gene", "TLR4"),
    ("dr_amoxicillin", "drug", "amoxicillin"),
    ("dr_lisinopril", "drug", "lisinopril"),
    ("dr_metformin", "drug", "metformin"),
    ("dr_albuterol", "drug", "albuterol"),
    ("dr_furosemide", "drug", "furosemide"),
    ("dr_insulin", "drug", "insulin"),
    ("dr_atorvastatin", "drug", "atorvastatin"),
    ("pw_inflammation", "pathway", "inflammation"),
    ("pw_raas", "pathway", "renin-angiotensin system"),
    ("pw_immune", "pathway", "innate immune response"),
    ("ex_smoking", "exposure", "tobacco smoking"),
    ("ex_alcohol", "exposure", "alcohol use"),
    ("ex_air_pollution", "exposure", "air pollution"),
]

HAND_EDGES = [
    # pneumonia neighborhood
    ("ph_fever", "dz_pneumonia", "phenotype_of"),
    ("ph_fever", "dz_pneumonia", "associated_with"),  # parallel relation
    ("ph_cough", "dz_pneumonia", "phenotype_of"),
    ("ph_dyspnea", "dz_pneumonia", "phenotype_of"),
    ("ph_confusion", "dz_pneumonia", "associated_with"),
    ("dz_copd", "dz_pneumonia", "predisposes"),
    ("ph_immunodef", "dz_pneumonia", "risk_factor"),
    ("dr_amoxicillin", "dz_pneumonia", "indicated_for"),
    ("gn_il6", "pw_inflammation", "participates_in"),
    ("gn_tnf", "pw_inflammation", "participates_in"),
    ("pw_inflammation", "dz_pneumonia", "involved_in"),
    ("gn_tlr4", "pw_immune", "participates_in"),
    ("pw_immune", "dz_pneumonia", "involved_in"),
    ("ph_tachycardia", "ph_fever", "co_occurs_with"),
    ("ph_tachycardia", "pw_inflammation", "associated_with"),
    # copd neighborhood
    ("ex_smoking", "dz_copd", "risk_factor"),
    ("ex_air_pollution", "dz_copd", "risk_factor"),
    ("ph_wheezing", "dz_copd", "phenotype_of"),
    ("ph_cough", "dz_copd", "phenotype_of"),
    ("dr_albuterol", "dz_copd", "indicated_for"),
    # hypertension neighborhood
    ("ph_obesity", "dz_hypertension", "risk_factor"),
    ("ph_headache", "dz_hypertension", "phenotype_of"),
    ("gn_ace", "pw_raas", "participates_in"),
    ("pw_raas", "dz_hypertension", "involved_in"),
    ("gn_nos3", "dz_hypertension", "associated_with"),
    ("dr_lisinopril", "dz_hypertension", "indicated_for"),
    ("ex_alcohol", "dz_hypertension", "risk_factor"),
    ("dz_diabetes", "dz_hypertension", "comorbid_with"),
    ("dz_ckd", "dz_hypertension", "causes"),
    ("ph_edema", "dz_hypertension", "associated_with"),
    # kidney / diabetes / cardiac cross-links
    ("dz_hypertension", "dz_ckd", "complicates"),
    ("dz_diabetes", "dz_ckd", "complicates"),
    ("ph_proteinuria", "dz_ckd", "phenotype_of"),
    ("ph_edema", "dz_ckd", "phenotype_of"),
    ("dr_furosemide", "dz_ckd", "indicated_for"),
    ("ph_hyperglycemia", "dz_diabetes", "phenotype_of"),
    ("ph_fatigue", "dz_diabetes", "associated_with"),
    ("dr_metformin", "dz_diabetes", "indicated_for"),
    ("dr_insulin", "dz_diabetes", "indicated_for"),
    ("ph_obesity", "dz_diabetes", "risk_factor"),
    ("gn_apoe", "dz_cad", "associated_with"),
    ("ph_chest_pain", "dz_cad", "phenotype_of"),
    ("dz_hypertension", "dz_cad", "risk_factor"),
    ("dz_diabetes", "dz_cad", "risk_factor"),
    ("dr_atorvastatin", "dz_cad", "indicated_for"),
    ("ex_smoking", "dz_cad", "risk_factor"),
    ("ph_fatigue", "dz_ckd", "associated_with"),
    ("pw_inflammation", "dz_cad", "involved_in"),
    ("gn_il6", "dz_copd", "associated_with"),
    ("gn_tnf", "dz_ckd", "associated_with"),
]

EDGE_TARGET = 96

VOCAB = [
    ("486", "pneumonia"),
    ("401.9", "essential hypertension"),
    ("496", "chronic obstructive pulmonary disease"),
    ("250.00", "diabetes mellitus"),
    ("585.9", "chronic kidney disease"),
    ("414.01", "coronary atherosclerosis"),
    ("786.2", "cough"),
    ("786.09", "dyspnea"),
    ("782.3", "edema"),
    ("780.79", "fatigue"),
    ("784.0", "headache"),
    ("791.0", "proteinuria"),
    ("786.07", "wheezing"),
    ("278.00", "obesity"),
    ("368.60", "night blindness"),
    ("780.60", "Fever."),  # similarity stage via punctuation difference
    ("786.50", "chest pain!"),
    ("790.29", "hyperglycemia,"),
    ("305.1", "Tobacco Smoking."),  # validator revises out-of-candidate
    ("999.99", "quantum flux disorder"),  # maps nowhere
]

LABEL_MAP = [
    ("486", "pneumonia"),
    ("480.9", "pneumonia"),  # label-only code, outside the vocabulary
    ("401.9", "hypertension"),
    ("402.90", "hypertension"),  # label-only code
]

TARGETS = [
    {"disease_id": "pneumonia", "description": "pneumonia"},
    {"disease_id": "hypertension", "description": "essential hypertension"},
]

DISEASE_NAMES = {"pneumonia": "pneumonia", "hypertension": "essential hypertension"}

NODE_SELECT_REPLIES = {
    "pneumonia": [
        "ph_fever", "ph_cough", "dz_copd", "ph_dyspnea",
        "ph_night_blindness", "zz_bogus_feature", "dz_pneumonia",
        "ph_wheezing", "ph_fatigue",
    ],
    "essential hypertension": [
        "ph_obesity", "dz_diabetes", "dz_ckd", "ph_headache",
        "ph_edema", "dz_cad", "ph_hyperglycemia", "ph_proteinuria",
    ],
}

PATH_SELECT_REPLIES = {
    "pneumonia": [3, 0, 2, 1, 5],
    "essential hypertension": [1, 0, 4, 2, 6],
}

GARBAGE_REPLY = "Further monitoring of the patient is advisable."
NO_REPLY = (
    "The recorded diagnoses do not activate the listed chains, and the key "
    "factors are absent.\nConclusion: No"
)
YES_REPLY = (
    "The recorded diagnoses activate the listed chains toward the target "
    "disease.\nConclusion: Yes"
)


def build_edges() -> list[tuple[str, str, str]]:
    edges = list(HAND_EDGES)
    seen = set(edges)
    rng = random.Random(42)
    pool = [
        n for n, t, _ in NODES
        if t in ("phenotype", "gene", "drug", "pathway", "exposure")
        and n != "ph_night_blindness"
    ]
    relations = ["co_occurs_with", "interacts_with", "modulates"]
    while len(edges) < EDGE_TARGET:
        src, dst = rng.choice(pool), rng.choice(pool)
        if src == dst:
            continue
        relation = rng.choice(relations)
        key = (src, dst, relation)
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
    return edges


def build_cohort(rng: random.Random) -> list[dict]:
    label_codes = ["486", "480.9", "401.9", "402.90"]
    other_codes = [c for c, _ in VOCAB if c not in ("486", "401.9")] + ["V99.9"]
    patients = []
    for i in range(30):
        n_visits = 1 if i >= 25 else rng.randint(2, 4)
        visits = []
        for seq in range(n_visits):
            codes = rng.sample(other_codes, rng.randint(2, 4))
            if rng.random() < 0.45:
                codes.append(rng.choice(label_codes))
            visits.append({"seq": seq, "codes": sorted(set(codes))})
        patients.append({"patient_id": f"P{i:02d}", "visits": visits})
    return patients


def derive_units(patients: list[dict]) -> list[tuple[str, str, int]]:
    """(case_id, disease_id, label) per generation unit, sorted."""
    label_map = dict(LABEL_MAP)
    units = []
    for patient in patients:
        visits = sorted(patient["visits"], key=lambda v: v["seq"])
        for earlier, later in zip(visits, visits[1:]):
            case_id = f"{patient['patient_id']}#{earlier['seq']}"
            next_diseases = {label_map[c] for c in later["codes"] if c in label_map}
            for target in TARGETS:
                d = target["disease_id"]
                units.append((case_id, d, int(d in next_diseases)))
    return sorted(units)


def build_scenario(units: list[tuple[str, str, int]]) -> tuple[dict, dict]:
    positives = [(c, d) for c, d, label in units if label == 1]
    negatives = [(c, d) for c, d, label in units if label == 0]
    garbage_units = [negatives[i] for i in (2, 7, 11)]
    mismatch_units = positives[-2:]  # stay on the default No reply
    yes_units = [u for u in positives[:-2]]

    rules = []
    for code in ("780.60", "786.50", "790.29"):
        rules.append(
            {
                "tag": "entity_select",
                "contains": f"Vocabulary entry: {code}",
                "reply": '{"verdict":"confirm"}',
            }
        )
    rules.append(
        {
            "tag": "entity_select",
            "contains": "Vocabulary entry: 305.1",
            "reply": '{"verdict":"revise","node_id":"zz_not_a_node"}',
        }
    )
    for name, reply in NODE_SELECT_REPLIES.items():
        rules.append(
            {
                "tag": "node_select",
                "contains": f"Target disease: {name}",
                "reply": json.dumps(reply),
            }
        )
    for name, reply in PATH_SELECT_REPLIES.items():
        rules.append(
            {
                "tag": "path_select",
                "contains": f"Target disease: {name}",
                "reply": json.dumps(reply),
            }
        )
    for case_id, disease_id in garbage_units:
        rules.append(
            {
                "tag": "cot_generate",
                "contains": f"Case: {case_id}\nTarget disease: {DISEASE_NAMES[disease_id]}",
                "reply": GARBAGE_REPLY,
            }
        )
    for case_id, disease_id in yes_units:
        rules.append(
            {
                "tag": "cot_generate",
                "contains": f"Case: {case_id}\nTarget disease: {DISEASE_NAMES[disease_id]}",
                "reply": YES_REPLY,
            }
        )
    scenario = {"embedding_dim": 16, "seed": 7, "rules": rules, "default_reply": NO_REPLY}
    expected = {
        "generated": len(units),
        "kept": len(yes_units) + (len(negatives) - len(garbage_units)),
        "dropped_mismatch": len(mismatch_units),
        "dropped_unparseable": len(garbage_units),
        "failed": 0,
    }
    return scenario, expected


def write_fixtures() -> dict:
    FIXTURES.mkdir(exist_ok=True)
    edges = build_edges()
    with (FIXTURES / "kg_nodes.tsv").open("w", encoding="utf-8") as fh:
        fh.write("node_id\tnode_type\tnode_name\tsource\n")
        for node_id, node_type, name in NODES:
            fh.write(f"{node_id}\t{node_type}\t{name}\tkg_mini\n")
    with (FIXTURES / "kg_edges.tsv").open("w", encoding="utf-8") as fh:
        fh.write("src_id\tdst_id\trelation\tdisplay_relation\n")
        for src, dst, relation in edges:
            fh.write(f"{src}\t{dst}\t{relation}\t{relation.replace('_', ' ')}\n")
    with (FIXTURES / "vocab.tsv").open("w", encoding="utf-8") as fh:
        fh.write("code\tdescription\n")
        for code, description in VOCAB:
            fh.write(f"{code}\t{description}\n")
    with (FIXTURES / "label_map.tsv").open("w", encoding="utf-8") as fh:
        fh.write("code\tdisease_id\n")
        for code, disease_id in LABEL_MAP:
            fh.write(f"{code}\t{disease_id}\n")

    patients = build_cohort(random.Random(20260810))
    with (FIXTURES / "cohort.jsonl").open("w", encoding="utf-8") as fh:
        for patient in patients:
            fh.write(json.dumps(patient, sort_keys=True) + "\n")

    units = derive_units(patients)
    scenario, expected_counts = build_scenario(units)
    (FIXTURES / "scenario.json").write_text(
        json.dumps(scenario, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    config = {
        "paths": {
            "kg_nodes": "kg_nodes.tsv",
            "kg_edges": "kg_edges.tsv",
            "vocab": "vocab.tsv",
            "cohort": "cohort.jsonl",
            "label_map": "label_map.tsv",
            "out_dir": "out",
        },
        "params": {"train_sizes": [8, 16], "relevance_prefilter": None},
        "provider": {"kind": "mock", "scenario": "scenario.json", "embedding_dim": 16, "seed": 7},
        "targets": TARGETS,
        "study": {"names": ["kg_guided", "plain_baseline"]},
    }
    (FIXTURES / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    n_visits = sum(len(p["visits"]) for p in patients)
    n_cases = len(units) // len(TARGETS)
    manifest = {
        "kg": {
            "nodes": len(NODES),
            "edges": len(edges),
            "disease_nodes": ["dz_pneumonia", "dz_hypertension"],
            "sample_members": ["ph_fever", "ph_cough", "dz_copd"],
            "isolated_node": "ph_night_blindness",
        },
        "cohort": {"patients": len(patients), "visits": n_visits, "cases": n_cases},
        "vocab": {"codes": len(VOCAB)},
        "alignment": {"exact": 15, "llm_validated": 3, "llm_revised": 0, "rejected": 2},
        "generation": expected_counts,
    }
    (FIXTURES / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def verify(manifest: dict) -> None:
    """Run the pipeline against the fresh fixtures; fail loudly on drift."""
    from kgcot.cli import Runtime, stage_build_cohort, stage_evaluate, stage_gen_cot, \
        stage_map_entities, stage_mine_evidence
    from kgcot.config import load_config
    from kgcot.evidence import extract_candidate_paths, RelevanceSet

    out_dir = FIXTURES / "out"
    if out_dir.exists():
        shutil.rmtree(out_dir)
    config = load_config(FIXTURES / "config.json")
    rt = Runtime(config)

    cohort_summary = stage_build_cohort(rt)
    assert cohort_summary["cases"] == manifest["cohort"]["cases"], cohort_summary

    align_summary = stage_map_entities(rt)
    assert align_summary["stages"]["exact"] == manifest["alignment"]["exact"], align_summary
    assert align_summary["stages"]["llm_validated"] == manifest["alignment"]["llm_validated"]
    assert align_summary["stages"]["rejected"] == manifest["alignment"]["rejected"]
    assert align_summary["stages"]["similarity"] == 0

    evidence_summary = stage_mine_evidence(rt)
    for disease in ("pneumonia", "hypertension"):
        assert evidence_summary[disease]["paths"] == 5, evidence_summary

    # scripted path indices must stay within the candidate pools
    for disease_id, node in (("pneumonia", "dz_pneumonia"), ("hypertension", "dz_hypertension")):
        evidence = json.loads((out_dir / "evidence" / f"{disease_id}.json").read_text())
        relevance = RelevanceSet(node, evidence["relevance"])
        candidates, _ = extract_candidate_paths(relevance, rt.kg, max_hops=5)
        needed = max(PATH_SELECT_REPLIES[DISEASE_NAMES[disease_id]]) + 1
        assert len(candidates) >= needed, (disease_id, len(candidates), needed)

    gen_counts = stage_gen_cot(rt)
    assert gen_counts == manifest["generation"], (gen_counts, manifest["generation"])

    eval_summary = stage_evaluate(rt)
    assert eval_summary["flags"] == [], eval_summary

    labels = [u[2] for u in derive_units(json_lines(FIXTURES / "cohort.jsonl"))]
    assert labels.count(1) >= 6 and labels.count(0) >= 6

    golden_dir = FIXTURES / "golden"
    golden_dir.mkdir(exist_ok=True)
    shutil.copy(out_dir / "evidence" / "pneumonia.json", golden_dir / "evidence_pneumonia.json")
    shutil.copy(out_dir / "mapping.jsonl", golden_dir / "mapping.jsonl")
    shutil.rmtree(out_dir)
    print("fixture verification passed")


def json_lines(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


if __name__ == "__main__":
    manifest = write_fixtures()
    verify(manifest)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    sys.exit(0)
