"""Pipeline configuration: one JSON file, env overrides for secrets only.

Numeric defaults are the pipeline's fixed points (similarity threshold 0.85,
8 relevance nodes, 5 kept paths, hop bound 5, decision threshold 0.5, 10%
test split, train sizes 400/1000); every run echoes the resolved values to
resolved-config.json for audit.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from kgcot.errors import InputError
from kgcot.gateway import ProviderConfig
from kgcot.prompts import template_versions


@dataclass
class PathsConfig:
    kg_nodes: str = "kg_nodes.tsv"
    kg_edges: str = "kg_edges.tsv"
    vocab: str = "vocab.tsv"
    cohort: str = "cohort.jsonl"
    label_map: str = "label_map.tsv"
    prompts: str | None = None  # template override directory
    out_dir: str = "out"
    cache_dir: str | None = None
    ui_dir: str | None = None
    column_map: dict | None = None


@dataclass
class ParamsConfig:
    tau: float = 0.85
    candidates: int = 20
    k_node: int = 8
    k_path: int = 5
    max_hops: int = 5
    max_paths: int = 64
    test_frac: float = 0.10
    train_sizes: list[int] = field(default_factory=lambda: [400, 1000])
    threshold: float = 0.5
    seed: int = 7
    relevance_prefilter: int | None = 300
    prompt_char_budget: int = 6000
    include_absent_features: bool = True
    directed_paths: bool = False
    select_temperature: float = 0.0
    gen_temperature: float = 0.7
    fail_fast: bool = False
    gen_split: str | None = None  # restrict generation units to one train split


@dataclass
class StudyConfig:
    system1: str | None = None  # predictions.jsonl of the first system
    system2: str | None = None
    names: list[str] = field(default_factory=lambda: ["system_1", "system_2"])
    sample_size: int | None = None
    ties_enabled: bool = False
    study_file: str = "study.json"
    log_file: str = "preferences.jsonl"


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    targets: list[tuple[str, str]] = field(default_factory=list)
    study: StudyConfig = field(default_factory=StudyConfig)

    def out_dir(self) -> Path:
        return Path(self.paths.out_dir)

    def cache_dir(self) -> Path:
        configured = self.paths.cache_dir or os.environ.get("KGCOT_CACHE_DIR")
        return Path(configured) if configured else self.out_dir() / "cache"

    def echo_resolved(self) -> Path:
        """Write resolved-config.json (full parameter audit trail)."""
        out = self.out_dir()
        out.mkdir(parents=True, exist_ok=True)
        resolved = {
            "paths": asdict(self.paths),
            "params": asdict(self.params),
            "provider": {
                k: v
                for k, v in asdict(self.provider).items()
                if k not in ("api_key_env",)
            },
            "effective_cache_dir": str(self.cache_dir()),
            "targets": [list(t) for t in self.targets],
            "templates": template_versions(self.paths.prompts),
        }
        path = out / "resolved-config.json"
        path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _build_section(cls, raw: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise InputError(f"{where}: unknown key(s) {sorted(unknown)}")
    return cls(**raw)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a config file; relative paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing config file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: bad JSON: {err}") from err

    base = path.parent

    def resolve(value: str | None) -> str | None:
        if value is None:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    paths = _build_section(PathsConfig, raw.get("paths", {}), f"{path}:paths")
    for name in ("kg_nodes", "kg_edges", "vocab", "cohort", "label_map",
                 "prompts", "out_dir", "cache_dir", "ui_dir"):
        setattr(paths, name, resolve(getattr(paths, name)))

    params = _build_section(ParamsConfig, raw.get("params", {}), f"{path}:params")
    provider = _build_section(ProviderConfig, raw.get("provider", {}), f"{path}:provider")
    if provider.scenario:
        provider.scenario = resolve(provider.scenario)

    targets = []
    for entry in raw.get("targets", []):
        try:
            targets.append((entry["disease_id"], entry["description"]))
        except (KeyError, TypeError) as err:
            raise InputError(f"{path}: bad target entry {entry!r}: {err}") from err

    study = _build_section(StudyConfig, raw.get("study", {}), f"{path}:study")
    study.system1 = resolve(study.system1)
    study.system2 = resolve(study.system2)

    return PipelineConfig(
        paths=paths, params=params, provider=provider, targets=targets, study=study
    )
