"""Evaluation: accuracy and macro-F1 over IN/OUT test categories.

Per split, each metric is computed three times: over test samples whose
gold concept occurred in training (IN), over the rest (OUT), and over
the whole test set. A subset with zero support yields None, never a
fabricated zero. Macro-F1 averages per-class F1 over exactly the
concepts appearing in the gold labels of the evaluated subset; a class
with zero precision+recall contributes F1 = 0.

Aggregation over the three splits of a dataset reports mean and sample
standard deviation (ddof=1) per metric, counting how many of the three
runs actually defined the metric; undefined runs propagate as a reduced
count rather than silently as zeros.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import CATEGORY_IN, CATEGORY_OUT
from .models import predict_split

METRIC_FIELDS = (
    "accuracy_in", "accuracy_out", "accuracy_overall",
    "macro_f1_in", "macro_f1_out", "macro_f1_overall",
)


@dataclass(frozen=True)
class Metrics:
    support_in: int
    support_out: int
    accuracy_in: Optional[float]
    accuracy_out: Optional[float]
    accuracy_overall: Optional[float]
    macro_f1_in: Optional[float]
    macro_f1_out: Optional[float]
    macro_f1_overall: Optional[float]

    def to_dict(self) -> dict:
        return {
            "support_in": self.support_in,
            "support_out": self.support_out,
            **{f: getattr(self, f) for f in METRIC_FIELDS},
        }


def _accuracy(gold: list, pred: list) -> Optional[float]:
    if not gold:
        return None
    correct = sum(1 for g, p in zip(gold, pred) if g == p)
    return correct / len(gold)


def _macro_f1(gold: list, pred: list) -> Optional[float]:
    if not gold:
        return None
    classes = sorted(set(gold))
    scores = []
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0.0:
            scores.append(0.0)
        else:
            scores.append(2 * precision * recall / (precision + recall))
    return sum(scores) / len(scores)


def evaluate(predictions: dict, split, dataset) -> Metrics:
    """Score a prediction map against a split's gold labels.

    predictions must cover exactly the split's test ids; missing or
    stray ids are errors, not silent zeros.
    """
    test_ids = list(split.test)
    missing = set(test_ids) - set(predictions)
    if missing:
        raise ValueError(f"predictions missing {len(missing)} test id(s), "
                         f"e.g. {sorted(missing)[:5]}")
    stray = set(predictions) - set(test_ids)
    if stray:
        raise ValueError(f"predictions for {len(stray)} id(s) outside the "
                         f"test set, e.g. {sorted(stray)[:5]}")

    subsets = {CATEGORY_IN: [], CATEGORY_OUT: []}
    for sid in test_ids:
        subsets[split.category[sid]].append(sid)

    def score(ids):
        gold = [dataset.by_id(i).label_pt_id for i in ids]
        pred = [predictions[i] for i in ids]
        return _accuracy(gold, pred), _macro_f1(gold, pred)

    acc_in, f1_in = score(subsets[CATEGORY_IN])
    acc_out, f1_out = score(subsets[CATEGORY_OUT])
    acc_all, f1_all = score(test_ids)
    return Metrics(
        support_in=len(subsets[CATEGORY_IN]),
        support_out=len(subsets[CATEGORY_OUT]),
        accuracy_in=acc_in, accuracy_out=acc_out, accuracy_overall=acc_all,
        macro_f1_in=f1_in, macro_f1_out=f1_out, macro_f1_overall=f1_all,
    )


@dataclass(frozen=True)
class FieldStat:
    """Mean and sample std over however many runs defined the metric."""

    mean: Optional[float]
    std: Optional[float]
    n_defined: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std,
                "n_defined": self.n_defined}


@dataclass(frozen=True)
class AggregateReport:
    per_split: tuple
    stats: dict

    def to_dict(self) -> dict:
        return {
            "per_split": [m.to_dict() for m in self.per_split],
            "stats": {f: s.to_dict() for f, s in self.stats.items()},
        }


def _field_stat(values) -> FieldStat:
    defined = [v for v in values if v is not None]
    if not defined:
        return FieldStat(mean=None, std=None, n_defined=0)
    mean = float(np.mean(defined))
    std = float(np.std(defined, ddof=1)) if len(defined) >= 2 else None
    return FieldStat(mean=mean, std=std, n_defined=len(defined))


def aggregate(metrics_runs) -> AggregateReport:
    """Combine the three per-split Metrics of one configuration."""
    runs = tuple(metrics_runs)
    if len(runs) != 3:
        raise ValueError(f"aggregate expects exactly 3 runs, "
                         f"got {len(runs)}")
    stats = {f: _field_stat([getattr(m, f) for m in runs])
             for f in METRIC_FIELDS}
    stats["support_in"] = _field_stat([float(m.support_in) for m in runs])
    stats["support_out"] = _field_stat([float(m.support_out) for m in runs])
    return AggregateReport(per_split=runs, stats=stats)


@dataclass(frozen=True)
class CrossMatrix:
    """Zero-shot transfer grid: rows train datasets, columns test."""

    dataset_names: tuple
    cells: dict                     # (train_name, test_name) -> Aggregate

    def cell(self, train_name: str, test_name: str) -> AggregateReport:
        return self.cells[(train_name, test_name)]

    def to_dict(self) -> dict:
        return {
            "datasets": list(self.dataset_names),
            "cells": {
                tr: {te: self.cells[(tr, te)].to_dict()
                     for te in self.dataset_names}
                for tr in self.dataset_names
            },
        }


def cross_matrix(models: dict, datasets, splits: dict,
                 jobs: int = 1) -> CrossMatrix:
    """Evaluate every trained model on every dataset's own splits.

    models and splits are keyed by dataset name; each cell aggregates
    over the *test* dataset's three splits, using that dataset's own
    IN/OUT categories.
    """
    datasets = list(datasets)
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError(f"dataset names must be unique, got {names}")
    for name in names:
        if name not in models:
            raise ValueError(f"no model for dataset {name!r}")
        if name not in splits:
            raise ValueError(f"no splits for dataset {name!r}")
    by_name = {d.name: d for d in datasets}

    def one_cell(pair):
        train_name, test_name = pair
        model = models[train_name]
        test_dataset = by_name[test_name]
        runs = []
        for split in splits[test_name]:
            preds = predict_split(model, test_dataset, split)
            runs.append(evaluate(preds, split, test_dataset))
        return pair, aggregate(runs)

    pairs = [(tr, te) for tr in names for te in names]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_cell, pairs))
    else:
        results = [one_cell(p) for p in pairs]
    return CrossMatrix(dataset_names=tuple(names), cells=dict(results))


# -- tabular exports -----------------------------------------------------

def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def results_csv(rows: dict) -> str:
    """CSV of aggregate results keyed by (dataset, strategy)."""
    header = ["dataset", "strategy"]
    for f in METRIC_FIELDS:
        header += [f + "_mean", f + "_std"]
    header += ["support_in_mean", "support_out_mean"]
    lines = [",".join(header)]
    for (dataset_name, strategy) in sorted(rows):
        agg = rows[(dataset_name, strategy)]
        cells = [dataset_name, strategy]
        for f in METRIC_FIELDS:
            st = agg.stats[f]
            cells += [_fmt(st.mean), _fmt(st.std)]
        cells += [_fmt(agg.stats["support_in"].mean),
                  _fmt(agg.stats["support_out"].mean)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cross_csv(matrix: CrossMatrix, metric_field: str = "accuracy_overall",
              stat: str = "mean") -> str:
    """One train-by-test grid of a single metric statistic."""
    if metric_field not in METRIC_FIELDS:
        raise ValueError(f"metric_field must be one of {METRIC_FIELDS}")
    lines = [",".join(["train\\test", *matrix.dataset_names])]
    for tr in matrix.dataset_names:
        row = [tr]
        for te in matrix.dataset_names:
            st = matrix.cells[(tr, te)].stats[metric_field]
            row.append(_fmt(getattr(st, stat)))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
