"""Visit cohorts: adjacent-visit prediction cases, vectors, seeded splits."""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from kgcot.errors import CohortError

TEST_FRACTION_DEFAULT = 0.10


@dataclass(frozen=True)
class Visit:
    patient_id: str
    seq: int
    codes: frozenset[str]


@dataclass
class IndexCase:
    """An adjacent visit pair: codes at visit t, per-disease labels at t+1."""

    case_id: str
    patient_id: str
    index_seq: int
    codes_t: tuple[str, ...]  # sorted for determinism
    labels: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "patient_id": self.patient_id,
            "index_seq": self.index_seq,
            "codes_t": list(self.codes_t),
            "labels": self.labels,
        }


@dataclass(frozen=True)
class FeatureVector:
    dims: int
    on_bits: tuple[int, ...]  # strictly increasing vocabulary indices


@dataclass
class CohortSplit:
    test_ids: list[str]
    train_ids: list[str]
    dev_ids: list[str]
    seed: int


def load_cohort(path: str | Path) -> list[Visit]:
    """Parse cohort.jsonl: one object per patient with ordered visits."""
    path = Path(path)
    if not path.exists():
        raise CohortError(f"missing cohort file: {path}")
    visits: list[Visit] = []
    seen: set[tuple[str, int]] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                patient_id = obj["patient_id"]
                patient_visits = obj["visits"]
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise CohortError(f"{path}:{lineno}: malformed patient record: {err}") from err
            for v in patient_visits:
                try:
                    seq = int(v["seq"])
                    codes = frozenset(str(c) for c in v["codes"])
                except (KeyError, TypeError, ValueError) as err:
                    raise CohortError(f"{path}:{lineno}: malformed visit: {err}") from err
                if (patient_id, seq) in seen:
                    raise CohortError(
                        f"{path}:{lineno}: duplicate visit seq {seq} for patient {patient_id}"
                    )
                seen.add((patient_id, seq))
                visits.append(Visit(patient_id=patient_id, seq=seq, codes=codes))
    visits.sort(key=lambda v: (v.patient_id, v.seq))
    return visits


def build_pairs(
    visits: Sequence[Visit],
    label_map: Mapping[str, str],
    targets: Sequence[str],
) -> list[IndexCase]:
    """One IndexCase per consecutive visit pair of each patient.

    labels[d] = 1 iff any code of the later visit maps to disease d.
    Single-visit patients contribute nothing.
    """
    if not targets:
        raise CohortError("empty disease target list")
    by_patient: dict[str, list[Visit]] = {}
    for v in visits:
        by_patient.setdefault(v.patient_id, []).append(v)
    cases: list[IndexCase] = []
    for patient_id in sorted(by_patient):
        ordered = sorted(by_patient[patient_id], key=lambda v: v.seq)
        for earlier, later in zip(ordered, ordered[1:]):
            next_diseases = {label_map[c] for c in later.codes if c in label_map}
            labels = {d: int(d in next_diseases) for d in targets}
            cases.append(
                IndexCase(
                    case_id=f"{patient_id}#{earlier.seq}",
                    patient_id=patient_id,
                    index_seq=earlier.seq,
                    codes_t=tuple(sorted(earlier.codes)),
                    labels=labels,
                )
            )
    return cases


def vectorize(
    case: IndexCase,
    vocab: Sequence[str],
    tally: Counter | None = None,
) -> FeatureVector:
    """Binary feature vector over the fixed vocabulary order.

    Codes outside the vocabulary are dropped; pass a Counter to collect the
    drop tally (real exports routinely contain unmappable codes).
    """
    index = {code: i for i, code in enumerate(vocab)}
    on_bits = []
    for code in case.codes_t:
        pos = index.get(code)
        if pos is None:
            if tally is not None:
                tally["unknown_codes"] += 1
        else:
            on_bits.append(pos)
    return FeatureVector(dims=len(vocab), on_bits=tuple(sorted(on_bits)))


def make_splits(
    cases: Sequence[IndexCase],
    seed: int,
    test_frac: float = TEST_FRACTION_DEFAULT,
    train_sizes: Sequence[int] = (400, 1000),
) -> dict[str, CohortSplit]:
    """Seeded test/train/dev splits with nested training sets.

    The test set is drawn first (floor(test_frac * total)); train sets are
    prefixes of one shuffled pool, so train_400 is a subset of train_1000 and
    size comparisons vary only by the added cases. dev is the pool remainder
    after the largest train set.
    """
    case_ids = [c.case_id for c in cases]
    if len(set(case_ids)) != len(case_ids):
        raise CohortError("duplicate case_ids")
    total = len(case_ids)
    test_size = int(test_frac * total)
    sizes = sorted(train_sizes)
    if not sizes:
        raise CohortError("train_sizes must be non-empty")
    if sizes[-1] + test_size > total:
        raise CohortError(
            f"insufficient cases: need {sizes[-1]} train + {test_size} test, have {total}"
        )
    rng = random.Random(seed)
    shuffled = case_ids[:]
    rng.shuffle(shuffled)
    test_ids = shuffled[:test_size]
    pool = shuffled[test_size:]
    largest = sizes[-1]
    dev_ids = pool[largest:]
    splits: dict[str, CohortSplit] = {}
    for size in sizes:
        splits[f"train_{size}"] = CohortSplit(
            test_ids=list(test_ids),
            train_ids=pool[:size],
            dev_ids=list(dev_ids),
            seed=seed,
        )
    return splits


def splits_to_json(splits: Mapping[str, CohortSplit], seed: int) -> dict:
    """Flat splits.json shape: test/dev shared, one list per train size."""
    names = sorted(splits, key=lambda n: int(n.rsplit("_", 1)[1]))
    any_split = splits[names[0]]
    payload = {"seed": seed, "test": any_split.test_ids, "dev": any_split.dev_ids}
    for name in names:
        payload[name] = splits[name].train_ids
    return payload


def write_cases(cases: Iterable[IndexCase], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case.to_dict(), sort_keys=True) + "\n")


def load_cases(path: str | Path) -> list[IndexCase]:
    cases = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            cases.append(
                IndexCase(
                    case_id=obj["case_id"],
                    patient_id=obj["patient_id"],
                    index_seq=int(obj["index_seq"]),
                    codes_t=tuple(obj["codes_t"]),
                    labels={d: int(v) for d, v in obj["labels"].items()},
                )
            )
    return cases


def load_vocab(path: str | Path) -> list[tuple[str, str]]:
    """vocab.tsv rows as (code, description); file order defines indices."""
    path = Path(path)
    if not path.exists():
        raise CohortError(f"missing vocab file: {path}")
    entries: list[tuple[str, str]] = []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:2] != ["code", "description"]:
            raise CohortError(f"{path}: expected header code<TAB>description")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 2 or not fields[1]:
                raise CohortError(f"{path}:{lineno}: expected code<TAB>description")
            entries.append((fields[0], fields[1]))
    return entries


def load_label_map(path: str | Path) -> dict[str, str]:
    """label_map.tsv rows as code -> disease_id."""
    path = Path(path)
    if not path.exists():
        raise CohortError(f"missing label map file: {path}")
    mapping: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:2] != ["code", "disease_id"]:
            raise CohortError(f"{path}: expected header code<TAB>disease_id")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 2:
                raise CohortError(f"{path}:{lineno}: expected code<TAB>disease_id")
            mapping[fields[0]] = fields[1]
    return mapping
