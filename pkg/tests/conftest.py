"""Shared builders for the test suite.

Plain functions rather than fixtures so tests can parametrize them with
their own RandomState streams.
"""

import numpy as np

from termnorm.data import Dataset, Sample
from termnorm.ontology import Concept, LltEntry, Ontology


def toy_ontology():
    """Two concepts under one shared grandparent, three child terms."""
    concepts = [
        Concept("asthenia", "asthenia", "H1", "asthenic conditions"),
        Concept("malaise", "malaise", "H1", "asthenic conditions"),
    ]
    llts = [
        LltEntry("L1", "weakness", "asthenia"),
        LltEntry("L2", "loss of energy", "asthenia"),
        LltEntry("L3", "feeling unwell", "malaise"),
    ]
    return Ontology(concepts, llts, version_tag="toy")


def toy_mentions():
    """Three mentions over toy_ontology, ids in pairing order."""
    return Dataset(name="toy-mentions", samples=(
        Sample("a1", "weak knees", "asthenia"),
        Sample("a2", "zap me of all energy", "asthenia"),
        Sample("a3", "feel like crap", "malaise"),
    ))


def random_ontology(rs: np.random.RandomState, max_pt: int = 4,
                    max_children: int = 3, max_hlt: int = 2,
                    p_hlt: float = 0.8) -> Ontology:
    n_pt = int(rs.randint(2, max_pt + 1))
    concepts = []
    llts = []
    for p in range(n_pt):
        pt_id = f"P{p:02d}"
        if rs.rand() < p_hlt:
            h = int(rs.randint(max_hlt))
            concepts.append(Concept(pt_id, f"concept {p}",
                                    f"H{h}", f"group {h}"))
        else:
            concepts.append(Concept(pt_id, f"concept {p}"))
        for c in range(int(rs.randint(1, max_children + 1))):
            llts.append(LltEntry(f"L{p:02d}{c}", f"term {p} {c}", pt_id))
    return Ontology(concepts, llts, version_tag="rand")


def random_dataset(rs: np.random.RandomState, ontology: Ontology,
                   max_samples: int = 12, grouped: bool = False) -> Dataset:
    pts = ontology.pt_ids()
    n = int(rs.randint(2, max_samples + 1))
    samples = []
    for i in range(n):
        label = pts[int(rs.randint(len(pts)))]
        group = f"g{int(rs.randint(3))}" \
            if grouped and rs.rand() < 0.7 else None
        samples.append(Sample(f"s{i:03d}", f"mention {i} of {label}",
                              label, group_key=group))
    return Dataset(name="rand-data", samples=tuple(samples))
