"""Contrastive training sample generators.

Three generators over a labeled dataset and its ontology:

  - contrastive_pairs_and_triples: every unordered pair of samples
    becomes a positive pair (same gold concept) or a negative pair
    (different concepts); negative pairs whose two concepts share a
    grandparent additionally yield an "RO" (related-other) triple.
  - synonym_pairs_from_dataset: positive pairs joining each ontology
    child-term text with every mention normalized to that term's parent.
  - synonym_pairs_from_ontology: positive pairs of child-term texts that
    share a parent, k*(k-1)/2 pairs for a concept with k children.

Ordering is deterministic everywhere: samples by sample_id, concepts by
pt_id, child terms by llt_id, unordered pairs in (i, j) index order with
i < j.

Pair files are JSONL {"left", "right", "polarity"}; triple files are
JSONL {"left", "relation", "right"} with relation always "RO".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import FileFormatError
from .fileio import atomic_write_text, dump_jsonl, read_jsonl
from .rng import SplitMix64

logger = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
RELATION_OTHER = "RO"


@dataclass(frozen=True)
class PairSample:
    left: str
    right: str
    polarity: str

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be {POSITIVE!r} or {NEGATIVE!r},"
                             f" got {self.polarity!r}")


@dataclass(frozen=True)
class TripleSample:
    left: str
    relation: str
    right: str

    def __post_init__(self):
        if self.relation != RELATION_OTHER:
            raise ValueError(f"relation must be {RELATION_OTHER!r}, "
                             f"got {self.relation!r}")


def contrastive_pairs_and_triples(dataset, ontology,
                                  max_negatives_per_positive=None,
                                  seed: int = 0):
    """Pairs over all sample combinations, plus related-other triples.

    A triple is emitted for a negative pair whose two concepts both have
    a grandparent and it is the same one. Concepts lacking a grandparent
    are reported once via logging and their candidate triples skipped.

    max_negatives_per_positive caps the negative pairs at that multiple
    of the positive-pair count via a seeded order-preserving subsample;
    triples then come only from the kept negatives.
    """
    if max_negatives_per_positive is not None \
            and max_negatives_per_positive < 0:
        raise ValueError("max_negatives_per_positive must be >= 0 or None")
    ordered = sorted(dataset.samples, key=lambda s: s.sample_id)
    records = []                      # (sample_a, sample_b) with a before b
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            records.append((ordered[i], ordered[j]))
    negative_idx = [k for k, (a, b) in enumerate(records)
                    if a.label_pt_id != b.label_pt_id]
    n_positive = len(records) - len(negative_idx)

    kept = set(negative_idx)
    if max_negatives_per_positive is not None:
        budget = max_negatives_per_positive * n_positive
        if len(negative_idx) > budget:
            order = list(negative_idx)
            SplitMix64(seed).shuffle(order)
            kept = set(order[:budget])

    pairs = []
    triples = []
    missing_hlt = set()
    for k, (a, b) in enumerate(records):
        if a.label_pt_id == b.label_pt_id:
            pairs.append(PairSample(a.text, b.text, POSITIVE))
            continue
        if k not in kept:
            continue
        pairs.append(PairSample(a.text, b.text, NEGATIVE))
        ca = ontology.concept(a.label_pt_id)
        cb = ontology.concept(b.label_pt_id)
        if ca.hlt_id is None or cb.hlt_id is None:
            for c in (ca, cb):
                if c.hlt_id is None:
                    missing_hlt.add(c.pt_id)
        elif ca.hlt_id == cb.hlt_id:
            triples.append(TripleSample(a.text, RELATION_OTHER, b.text))
    if missing_hlt:
        logger.warning(
            "skipped related-other triples for %d concept(s) without a "
            "grandparent: %s", len(missing_hlt), sorted(missing_hlt))
    return pairs, triples


def synonym_pairs_from_dataset(dataset, ontology):
    """Positive pairs (child-term text, mention text) sharing a concept.

    Ordered by (sample_id, llt_id); left is always the ontology term.
    """
    pairs = []
    for s in sorted(dataset.samples, key=lambda x: x.sample_id):
        for entry in ontology.children_of(s.label_pt_id):
            pairs.append(PairSample(entry.llt_text, s.text, POSITIVE))
    return pairs


def synonym_pairs_from_ontology(ontology):
    """Positive pairs of sibling child-term texts, per concept.

    Ordered by pt_id, then by (llt_id, llt_id) with the smaller first.
    """
    pairs = []
    for concept in ontology.concepts:
        entries = ontology.children_of(concept.pt_id)
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                pairs.append(PairSample(entries[i].llt_text,
                                        entries[j].llt_text, POSITIVE))
    return pairs


def save_pairs(pairs, path) -> Path:
    rows = [{"left": p.left, "right": p.right, "polarity": p.polarity}
            for p in pairs]
    return atomic_write_text(path, dump_jsonl(rows))


def save_triples(triples, path) -> Path:
    rows = [{"left": t.left, "relation": t.relation, "right": t.right}
            for t in triples]
    return atomic_write_text(path, dump_jsonl(rows))


def load_pairs(path) -> list:
    pairs = []
    for lineno, row in read_jsonl(path):
        if set(row) != {"left", "right", "polarity"}:
            raise FileFormatError("expected keys left, right, polarity",
                                  path=path, line=lineno)
        try:
            pairs.append(PairSample(row["left"], row["right"],
                                    row["polarity"]))
        except (TypeError, ValueError) as exc:
            raise FileFormatError(str(exc), path=path, line=lineno) from exc
    return pairs


def load_triples(path) -> list:
    triples = []
    for lineno, row in read_jsonl(path):
        if set(row) != {"left", "relation", "right"}:
            raise FileFormatError("expected keys left, relation, right",
                                  path=path, line=lineno)
        try:
            triples.append(TripleSample(row["left"], row["relation"],
                                        row["right"]))
        except (TypeError, ValueError) as exc:
            raise FileFormatError(str(exc), path=path, line=lineno) from exc
    return triples
