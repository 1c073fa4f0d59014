"""Labeled datasets, train/test splits, and overlap statistics.

Dataset files are JSONL, one sample per line:

    {"id": ..., "text": ..., "pt_id": ...}            concept-labeled
    {"id": ..., "text": ..., "llt_id": ...}           term-labeled
    {"id": ..., "text": ..., "llt_id": ..., "group": ...}

Exactly one of pt_id / llt_id must be present; a term label is resolved
to its parent concept at load time, keeping the term id as provenance.
An optional group key ties samples that must not straddle a train/test
boundary (e.g. several mentions from one document).

Split files are JSON objects: {"seed": ..., "train": [ids], "test":
[ids], "category": {id: "IN" | "OUT"}}. A test sample is IN when its
gold concept also labels at least one training sample, OUT otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import FileFormatError
from .fileio import atomic_write_text, dump_json, dump_jsonl, read_json, \
    read_jsonl
from .rng import SplitMix64
from .validation import check_seed, check_unit_interval

CATEGORY_IN = "IN"
CATEGORY_OUT = "OUT"

_SAMPLE_KEYS = {"id", "text", "pt_id", "llt_id", "group"}


@dataclass(frozen=True)
class Sample:
    sample_id: str
    text: str
    label_pt_id: str
    group_key: Optional[str] = None
    source_llt_id: Optional[str] = None

    def __post_init__(self):
        if not self.sample_id:
            raise ValueError("sample_id must be nonempty")
        if not self.text.strip():
            raise ValueError(f"text must be nonempty for sample "
                             f"{self.sample_id!r}")
        if not self.label_pt_id:
            raise ValueError(f"label_pt_id must be nonempty for sample "
                             f"{self.sample_id!r}")


@dataclass(frozen=True)
class Dataset:
    """Named tuple of samples with unique ids."""

    name: str
    samples: tuple

    def __post_init__(self):
        seen = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise ValueError(f"duplicate sample_id {s.sample_id!r} "
                                 f"in dataset {self.name!r}")
            seen.add(s.sample_id)

    def __len__(self):
        return len(self.samples)

    def ids(self) -> list:
        return [s.sample_id for s in self.samples]

    def label_set(self) -> set:
        return {s.label_pt_id for s in self.samples}

    def by_id(self, sample_id: str) -> Sample:
        try:
            return self._index()[sample_id]
        except KeyError:
            raise FileFormatError(f"sample id {sample_id!r} not in dataset "
                                  f"{self.name!r}") from None

    def _index(self) -> dict:
        cached = getattr(self, "_id_index", None)
        if cached is None:
            cached = {s.sample_id: s for s in self.samples}
            object.__setattr__(self, "_id_index", cached)
        return cached

    def subset(self, ids, name: Optional[str] = None) -> "Dataset":
        picked = tuple(self.by_id(i) for i in sorted(ids))
        return Dataset(name=name or self.name, samples=picked)

    def canonical(self) -> "Dataset":
        """Copy with samples ordered by sample_id."""
        ordered = tuple(sorted(self.samples, key=lambda s: s.sample_id))
        return Dataset(name=self.name, samples=ordered)


def load_dataset(path, ontology, name: Optional[str] = None) -> Dataset:
    """Parse a JSONL dataset and resolve labels against the ontology.

    Samples come back ordered by sample id regardless of file order.
    """
    path = Path(path)
    samples = []
    seen = set()
    for lineno, row in read_jsonl(path):
        extra = set(row) - _SAMPLE_KEYS
        if extra:
            raise FileFormatError(f"unknown keys {sorted(extra)}",
                                  path=path, line=lineno)
        for key in ("id", "text"):
            if key not in row:
                raise FileFormatError(f"missing key {key!r}", path=path,
                                      line=lineno)
            if not isinstance(row[key], str):
                raise FileFormatError(f"key {key!r} must be a string",
                                      path=path, line=lineno)
        sample_id = row["id"]
        if sample_id in seen:
            raise FileFormatError(f"duplicate sample id {sample_id!r}",
                                  path=path, line=lineno)
        seen.add(sample_id)
        has_pt = "pt_id" in row
        has_llt = "llt_id" in row
        if has_pt == has_llt:
            raise FileFormatError(
                "exactly one of pt_id / llt_id is required",
                path=path, line=lineno)
        group = row.get("group")
        if group is not None and not isinstance(group, str):
            raise FileFormatError("group must be a string", path=path,
                                  line=lineno)
        if has_pt:
            pt_id = row["pt_id"]
            if not isinstance(pt_id, str):
                raise FileFormatError("pt_id must be a string", path=path,
                                      line=lineno)
            if not ontology.has_pt(pt_id):
                raise FileFormatError(f"unknown pt_id {pt_id!r}", path=path,
                                      line=lineno)
            source = None
        else:
            llt_id = row["llt_id"]
            if not isinstance(llt_id, str):
                raise FileFormatError("llt_id must be a string", path=path,
                                      line=lineno)
            if not ontology.has_llt(llt_id):
                raise FileFormatError(f"unknown llt_id {llt_id!r}", path=path,
                                      line=lineno)
            pt_id = ontology.parent_of(llt_id)
            source = llt_id
        try:
            samples.append(Sample(sample_id=sample_id, text=row["text"],
                                  label_pt_id=pt_id, group_key=group,
                                  source_llt_id=source))
        except ValueError as exc:
            raise FileFormatError(str(exc), path=path, line=lineno) from exc
    samples.sort(key=lambda s: s.sample_id)
    return Dataset(name=name or path.stem, samples=tuple(samples))


def save_dataset(dataset: Dataset, path, label_field: str = "auto") -> Path:
    """Write JSONL rows in dataset order.

    label_field "auto" keeps term-level provenance (llt_id) where a
    sample has it; "pt" always writes the resolved concept label.
    """
    if label_field not in ("auto", "pt"):
        raise ValueError(f"label_field must be 'auto' or 'pt', "
                         f"got {label_field!r}")
    rows = []
    for s in dataset.samples:
        row = {"id": s.sample_id, "text": s.text}
        if label_field == "auto" and s.source_llt_id is not None:
            row["llt_id"] = s.source_llt_id
        else:
            row["pt_id"] = s.label_pt_id
        if s.group_key is not None:
            row["group"] = s.group_key
        rows.append(row)
    return atomic_write_text(path, dump_jsonl(rows))


@dataclass(frozen=True)
class Split:
    """Disjoint, exhaustive train/test partition with test categories."""

    seed: int
    train: tuple
    test: tuple
    category: dict = field(compare=True)

    def out_ids(self) -> list:
        return [i for i in self.test if self.category[i] == CATEGORY_OUT]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _split_one(dataset: Dataset, seed: int, train_ratio: float) -> Split:
    seed = check_seed(seed)
    ordered = sorted(dataset.samples, key=lambda s: s.sample_id)
    n = len(ordered)
    target = round_half_up(train_ratio * n)
    grouped = any(s.group_key is not None for s in ordered)

    # Units are shuffled whole: single samples when no grouping is used,
    # otherwise groups (ungrouped samples stay singleton units).
    units: dict = {}
    for s in ordered:
        key = ("grp", s.group_key) if s.group_key is not None \
            else ("solo", s.sample_id)
        units.setdefault(key, []).append(s.sample_id)
    unit_keys = sorted(units)
    rng = SplitMix64(seed)
    rng.shuffle(unit_keys)

    train_ids: list = []
    test_ids: list = []
    if grouped:
        for key in unit_keys:
            bucket = train_ids if len(train_ids) < target else test_ids
            bucket.extend(units[key])
    else:
        flat = [units[key][0] for key in unit_keys]
        train_ids = flat[:target]
        test_ids = flat[target:]

    train_ids.sort()
    test_ids.sort()
    train_labels = {dataset.by_id(i).label_pt_id for i in train_ids}
    category = {
        i: (CATEGORY_IN if dataset.by_id(i).label_pt_id in train_labels
            else CATEGORY_OUT)
        for i in test_ids
    }
    return Split(seed=seed, train=tuple(train_ids), test=tuple(test_ids),
                 category=category)


def make_splits(dataset: Dataset, seeds, train_ratio: float = 0.6) -> tuple:
    """One Split per seed over the canonicalized dataset.

    Pure function of (dataset content, seed, ratio): repeated calls are
    bit-identical. Ungrouped datasets get exactly round(ratio * n)
    training samples (round half up); grouped datasets accumulate whole
    shuffled groups until that target is met or passed, so the realized
    ratio can deviate.
    """
    if len(dataset) < 2:
        raise ValueError(f"dataset {dataset.name!r} has {len(dataset)} "
                         f"samples; need at least 2 to split")
    check_unit_interval(train_ratio, "train_ratio", open_ends=True)
    seeds = [check_seed(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"seeds must be distinct, got {seeds}")
    return tuple(_split_one(dataset, s, train_ratio) for s in seeds)


def out_fraction(split: Split):
    """Fraction of test samples categorized OUT; None for an empty test."""
    if not split.test:
        return None
    return len(split.out_ids()) / len(split.test)


def save_split(split: Split, path) -> Path:
    payload = {
        "seed": split.seed,
        "train": list(split.train),
        "test": list(split.test),
        "category": dict(split.category),
    }
    return atomic_write_text(path, dump_json(payload))


def load_split(path, dataset: Optional[Dataset] = None) -> Split:
    """Read and structurally validate a split file.

    With a dataset, additionally checks the partition covers exactly its
    sample ids and the categories match its labels.
    """
    path = Path(path)
    obj = read_json(path)
    if not isinstance(obj, dict) or set(obj) != {"seed", "train", "test",
                                                "category"}:
        raise FileFormatError("expected object with keys seed, train, test, "
                              "category", path=path)
    if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
        raise FileFormatError("seed must be an integer", path=path)
    for key in ("train", "test"):
        if not (isinstance(obj[key], list)
                and all(isinstance(i, str) for i in obj[key])):
            raise FileFormatError(f"{key} must be a list of ids", path=path)
    train, test = obj["train"], obj["test"]
    overlap = set(train) & set(test)
    if overlap:
        raise FileFormatError(f"train and test overlap: "
                              f"{sorted(overlap)[:5]}", path=path)
    if len(set(train)) != len(train) or len(set(test)) != len(test):
        raise FileFormatError("duplicate ids within train or test", path=path)
    category = obj["category"]
    if not isinstance(category, dict):
        raise FileFormatError("category must be an object", path=path)
    if set(category) != set(test):
        raise FileFormatError("category keys must be exactly the test ids",
                              path=path)
    bad = {v for v in category.values()} - {CATEGORY_IN, CATEGORY_OUT}
    if bad:
        raise FileFormatError(f"invalid category values {sorted(bad)}",
                              path=path)
    split = Split(seed=obj["seed"], train=tuple(train), test=tuple(test),
                  category=dict(category))
    if dataset is not None:
        ids = set(dataset.ids())
        covered = set(train) | set(test)
        if covered != ids:
            missing = sorted(ids - covered)[:5]
            stray = sorted(covered - ids)[:5]
            raise FileFormatError(
                f"split does not partition dataset {dataset.name!r} "
                f"(missing {missing}, unknown {stray})", path=path)
        train_labels = {dataset.by_id(i).label_pt_id for i in train}
        for i in test:
            expect = CATEGORY_IN \
                if dataset.by_id(i).label_pt_id in train_labels \
                else CATEGORY_OUT
            if category[i] != expect:
                raise FileFormatError(
                    f"category for test id {i!r} should be {expect}",
                    path=path)
    return split


@dataclass(frozen=True)
class OverlapReport:
    """Set-algebra view of which concepts label which datasets."""

    dataset_names: tuple
    label_counts: dict          # name -> {pt_id: count}
    unique_labels: dict         # name -> count of labels seen nowhere else
    shared_two_or_more: int
    shared_all: int
    union_size: int

    def count_histograms(self) -> dict:
        """Per dataset: {occurrence count: number of concepts}."""
        out = {}
        for name in self.dataset_names:
            hist: dict = {}
            for c in self.label_counts[name].values():
                hist[c] = hist.get(c, 0) + 1
            out[name] = {str(k): hist[k] for k in sorted(hist)}
        return out

    def to_dict(self) -> dict:
        return {
            "dataset_names": list(self.dataset_names),
            "label_counts": {n: dict(sorted(c.items()))
                             for n, c in self.label_counts.items()},
            "count_histograms": self.count_histograms(),
            "unique_labels": dict(self.unique_labels),
            "shared_two_or_more": self.shared_two_or_more,
            "shared_all": self.shared_all,
            "union_size": self.union_size,
        }


def dataset_stats(datasets) -> OverlapReport:
    """Label overlap partition across datasets.

    unique_labels[name] counts concepts labeling only that dataset;
    shared_two_or_more counts concepts labeling at least two; shared_all
    counts concepts labeling every dataset.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one dataset")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError(f"dataset names must be unique, got {names}")
    counts = {}
    for d in datasets:
        c: dict = {}
        for s in d.samples:
            c[s.label_pt_id] = c.get(s.label_pt_id, 0) + 1
        counts[d.name] = c
    membership: dict = {}
    for name in names:
        for pt in counts[name]:
            membership.setdefault(pt, set()).add(name)
    unique = {
        name: sum(1 for pt, who in membership.items() if who == {name})
        for name in names
    }
    shared2 = sum(1 for who in membership.values() if len(who) >= 2)
    shared_all = sum(1 for who in membership.values()
                     if len(who) == len(names))
    return OverlapReport(dataset_names=tuple(names), label_counts=counts,
                         unique_labels=unique, shared_two_or_more=shared2,
                         shared_all=shared_all, union_size=len(membership))
