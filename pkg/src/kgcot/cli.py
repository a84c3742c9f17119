"""Command-line front end: one config file, seeded reproducible stages.

Exit codes: 0 success, 1 input/config error, 2 provider failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import cached_property
from pathlib import Path

from kgcot import __version__
from kgcot.align import load_mapping, load_vocab_entries, run_alignment, write_mapping
from kgcot.cohort import (
    build_pairs,
    load_cases,
    load_cohort,
    load_label_map,
    load_vocab,
    make_splits,
    splits_to_json,
    write_cases,
)
from kgcot.config import PipelineConfig, load_config
from kgcot.cotgen import generate_and_filter, write_corpus, write_predictions, write_report
from kgcot.errors import InputError, ProviderError
from kgcot.evidence import build_evidence, load_evidence, write_evidence
from kgcot.gateway import Gateway
from kgcot.kg.graph import load_graph
from kgcot.metrics import classify_and_score, load_predictions, write_metrics
from kgcot.prompts import load_template
from kgcot.study import StudyStore, build_study, write_study


class Runtime:
    """Lazily loaded shared state for one CLI invocation."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        config.out_dir().mkdir(parents=True, exist_ok=True)

    @cached_property
    def kg(self):
        return load_graph(
            self.config.paths.kg_nodes,
            self.config.paths.kg_edges,
            self.config.paths.column_map,
        )

    @cached_property
    def gateway(self) -> Gateway:
        provider_cfg = self.config.provider
        if provider_cfg.cache_dir is None:
            provider_cfg.cache_dir = str(self.config.cache_dir())
        return Gateway.from_config(provider_cfg)

    @cached_property
    def templates(self) -> dict:
        prompts_dir = self.config.paths.prompts
        return {
            name: load_template(name, prompts_dir)
            for name in ("entity_select", "node_select", "path_select", "cot_system", "cot_generate")
        }

    @cached_property
    def vocab(self) -> list[tuple[str, str]]:
        return load_vocab(self.config.paths.vocab)

    @cached_property
    def descriptions(self) -> dict[str, str]:
        return dict(self.vocab)

    def out(self, name: str) -> Path:
        return self.config.out_dir() / name


def stage_build_cohort(rt: Runtime) -> dict:
    config = rt.config
    visits = load_cohort(config.paths.cohort)
    label_map = load_label_map(config.paths.label_map)
    targets = [disease_id for disease_id, _ in config.targets]
    if not targets:
        raise InputError("config declares no disease targets")
    cases = build_pairs(visits, label_map, targets)
    write_cases(cases, rt.out("cases.jsonl"))
    splits = make_splits(
        cases,
        seed=config.params.seed,
        test_frac=config.params.test_frac,
        train_sizes=config.params.train_sizes,
    )
    payload = splits_to_json(splits, config.params.seed)
    rt.out("splits.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {"visits": len(visits), "cases": len(cases), "splits": sorted(splits)}


def stage_map_entities(rt: Runtime) -> dict:
    config = rt.config
    entries = load_vocab_entries(config.paths.vocab)
    result = run_alignment(
        entries,
        rt.kg,
        rt.gateway,
        targets=config.targets,
        tau=config.params.tau,
        c=config.params.candidates,
        template=rt.templates["entity_select"],
        max_in_flight=config.provider.max_in_flight,
    )
    write_mapping(result.records, rt.out("mapping.jsonl"))
    rt.out("disease_nodes.json").write_text(
        json.dumps(
            {d: r.to_dict() for d, r in result.disease_nodes.items()},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    rt.out("align_summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return result.summary


def stage_mine_evidence(rt: Runtime) -> dict:
    config = rt.config
    mapping = load_mapping(rt.out("mapping.jsonl"))
    disease_nodes = json.loads(rt.out("disease_nodes.json").read_text(encoding="utf-8"))
    feature_nodes = sorted({r.node_id for r in mapping if r.node_id})
    if not feature_nodes:
        raise InputError("mapping.jsonl contains no mapped feature nodes")
    evidence_dir = rt.out("evidence")
    evidence_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for disease_id, record in sorted(disease_nodes.items()):
        evidence = build_evidence(
            disease_id,
            record["node_id"],
            feature_nodes,
            rt.kg,
            rt.gateway,
            k_node=config.params.k_node,
            k_path=config.params.k_path,
            max_hops=config.params.max_hops,
            max_paths_per_pair=config.params.max_paths,
            directed=config.params.directed_paths,
            prefilter=config.params.relevance_prefilter,
            templates=rt.templates,
        )
        write_evidence(evidence, evidence_dir / f"{disease_id}.json")
        summary[disease_id] = {
            "relevance": len(evidence.relevance.members),
            "paths": len(evidence.paths),
            "flags": len(evidence.flags),
        }
    summary["provider_stats"] = dict(rt.gateway.stats)
    return summary


def stage_gen_cot(rt: Runtime) -> dict:
    config = rt.config
    cases = load_cases(rt.out("cases.jsonl"))
    if config.params.gen_split:
        splits = json.loads(rt.out("splits.json").read_text(encoding="utf-8"))
        if config.params.gen_split not in splits:
            raise InputError(f"unknown gen_split {config.params.gen_split!r}")
        wanted = set(splits[config.params.gen_split])
        cases = [c for c in cases if c.case_id in wanted]
    mapping = load_mapping(rt.out("mapping.jsonl"))
    code_to_node = {r.code: r.node_id for r in mapping if r.node_id}
    disease_ids = sorted(d for d, _ in config.targets)
    evidence_by_disease = {
        d: load_evidence(rt.out("evidence") / f"{d}.json") for d in disease_ids
    }
    result = generate_and_filter(
        cases,
        disease_ids,
        evidence_by_disease,
        rt.kg,
        code_to_node,
        rt.descriptions,
        rt.gateway,
        temperature=config.params.gen_temperature,
        char_budget=config.params.prompt_char_budget,
        include_absent=config.params.include_absent_features,
        fail_fast=config.params.fail_fast,
        templates=rt.templates,
    )
    write_corpus(result.samples, rt.out("corpus.jsonl"))
    write_predictions(result.predictions, rt.out("predictions.jsonl"))
    write_report(result.report, rt.out("report.json"))
    return result.report["counts"]


def stage_evaluate(rt: Runtime, predictions_path: str | None = None) -> dict:
    config = rt.config
    records = load_predictions(predictions_path or rt.out("predictions.jsonl"))
    cases = load_cases(rt.out("cases.jsonl"))
    labels = {
        (case.case_id, disease_id): label
        for case in cases
        for disease_id, label in case.labels.items()
    }
    report = classify_and_score(records, labels, threshold=config.params.threshold)
    write_metrics(report, rt.out("metrics.json"), rt.out("metrics.csv"))
    return {"macro": report.macro, "flags": report.flags}


def _study_store(rt: Runtime) -> StudyStore:
    config = rt.config
    study_path = rt.out(config.study.study_file)
    log_path = rt.out(config.study.log_file)
    if not study_path.exists():
        if not (config.study.system1 and config.study.system2):
            raise InputError(
                "study needs either an existing study file or both "
                "study.system1 and study.system2 prediction paths"
            )
        system1 = load_predictions(config.study.system1)
        system2 = load_predictions(config.study.system2)
        cases = load_cases(rt.out("cases.jsonl"))
        labels = {
            (case.case_id, d): label
            for case in cases
            for d, label in case.labels.items()
        }
        summaries = {}
        for case in cases:
            described = [rt.descriptions.get(c, c) for c in case.codes_t]
            for d in case.labels:
                summaries[(case.case_id, d)] = (
                    f"Index visit diagnoses: {'; '.join(described) or '(none)'}. "
                    f"Target disease: {d}."
                )
        bundle = build_study(
            system1,
            system2,
            labels,
            seed=rt.config.params.seed,
            names=tuple(config.study.names),
            summaries=summaries,
            sample_size=config.study.sample_size,
            ties_enabled=config.study.ties_enabled,
        )
        write_study(bundle, study_path)
    return StudyStore.from_file(study_path, log_path)


def stage_serve_study(rt: Runtime, port: int) -> None:
    import uvicorn

    from kgcot.server import create_app

    store = _study_store(rt)
    app = create_app(store, ui_dir=rt.config.paths.ui_dir)
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except OSError as err:
        raise InputError(f"cannot serve on port {port}: {err}") from err


def stage_run_all(rt: Runtime) -> dict:
    summary = {
        "build_cohort": stage_build_cohort(rt),
        "map_entities": stage_map_entities(rt),
        "mine_evidence": stage_mine_evidence(rt),
        "gen_cot": stage_gen_cot(rt),
        "evaluate": stage_evaluate(rt),
    }
    summary["provider_stats"] = dict(rt.gateway.stats)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgcot",
        description="KG-guided chain-of-thought supervision pipeline",
    )
    parser.add_argument("--version", action="version", version=f"kgcot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--seed", type=int, help="override params.seed")
        p.add_argument("--out", help="override paths.out_dir")
        return p

    add("build-cohort", "construct index cases and seeded splits")
    add("map-entities", "align vocabulary codes to KG nodes")
    add("mine-evidence", "select relevance nodes and prune reasoning paths")
    add("gen-cot", "generate traces and filter by label consistency")
    evaluate = add("evaluate", "score a predictions file")
    evaluate.add_argument("--predictions", help="predictions.jsonl path (default: out dir)")
    serve = add("serve-study", "serve the blinded pairwise review study")
    serve.add_argument("--port", type=int, default=8765)
    add("run-all", "run every pipeline stage in order")
    return parser


def run(args: argparse.Namespace) -> dict | None:
    config = load_config(args.config)
    if args.seed is not None:
        config.params.seed = args.seed
    if args.out:
        config.paths.out_dir = args.out
    rt = Runtime(config)
    config.echo_resolved()

    if args.command == "build-cohort":
        return stage_build_cohort(rt)
    if args.command == "map-entities":
        return stage_map_entities(rt)
    if args.command == "mine-evidence":
        return stage_mine_evidence(rt)
    if args.command == "gen-cot":
        return stage_gen_cot(rt)
    if args.command == "evaluate":
        return stage_evaluate(rt, predictions_path=args.predictions)
    if args.command == "serve-study":
        stage_serve_study(rt, args.port)
        return None
    if args.command == "run-all":
        return stage_run_all(rt)
    raise InputError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run(args)
    except (InputError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ProviderError as err:
        print(f"provider error: {err}", file=sys.stderr)
        return 2
    if summary is not None:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
