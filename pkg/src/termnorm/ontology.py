"""Two-level concept ontology: concepts (PT) with child terms (LLT).

On disk an ontology is a tab-separated file with a header row and one row
per child term:

    llt_id  llt_text  pt_id  pt_text  hlt_id  hlt_text

Parent columns repeat on every row and must be consistent wherever the
same pt_id appears. The grandparent columns (hlt_id, hlt_text) are
optional per concept but must be given both-or-neither, and likewise
consistently. A row with an empty pt_id leaves its term without a
resolvable parent and is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import FileFormatError, UnknownIdError
from .fileio import atomic_write_text

_COLUMNS = ("llt_id", "llt_text", "pt_id", "pt_text", "hlt_id", "hlt_text")


@dataclass(frozen=True)
class Concept:
    """A normalization target, optionally grouped under a grandparent."""

    pt_id: str
    pt_text: str
    hlt_id: Optional[str] = None
    hlt_text: Optional[str] = None

    def __post_init__(self):
        if not self.pt_id:
            raise ValueError("pt_id must be nonempty")
        if not self.pt_text:
            raise ValueError(f"pt_text must be nonempty for {self.pt_id!r}")
        if (self.hlt_id is None) != (self.hlt_text is None):
            raise ValueError(f"hlt_id and hlt_text must be given together "
                             f"for {self.pt_id!r}")


@dataclass(frozen=True)
class LltEntry:
    """A child term pointing at its single parent concept."""

    llt_id: str
    llt_text: str
    parent_pt_id: str

    def __post_init__(self):
        if not self.llt_id:
            raise ValueError("llt_id must be nonempty")
        if not self.llt_text:
            raise ValueError(f"llt_text must be nonempty for {self.llt_id!r}")
        if not self.parent_pt_id:
            raise ValueError(f"parent_pt_id must be nonempty "
                             f"for {self.llt_id!r}")


class Ontology:
    """Immutable lookup structure over concepts and child terms.

    Construction validates referential integrity: unique ids on each
    level and no child pointing at a missing concept.
    """

    def __init__(self, concepts, llts, version_tag: str = ""):
        by_pt: dict = {}
        for c in concepts:
            if c.pt_id in by_pt:
                if by_pt[c.pt_id] != c:
                    raise ValueError(f"conflicting definitions for concept "
                                     f"{c.pt_id!r}")
                continue
            by_pt[c.pt_id] = c
        by_llt: dict = {}
        children: dict = {pt_id: [] for pt_id in by_pt}
        for e in llts:
            if e.llt_id in by_llt:
                raise ValueError(f"duplicate llt_id {e.llt_id!r}")
            if e.parent_pt_id not in by_pt:
                raise ValueError(f"llt_id {e.llt_id!r} references missing "
                                 f"concept {e.parent_pt_id!r}")
            by_llt[e.llt_id] = e
            children[e.parent_pt_id].append(e)
        self._concepts = {k: by_pt[k] for k in sorted(by_pt)}
        self._llts = {k: by_llt[k] for k in sorted(by_llt)}
        self._children = {
            pt_id: tuple(sorted(entries, key=lambda e: e.llt_id))
            for pt_id, entries in children.items()
        }
        self.version_tag = version_tag

    @property
    def concepts(self) -> tuple:
        """All concepts, sorted by pt_id."""
        return tuple(self._concepts.values())

    @property
    def llts(self) -> tuple:
        """All child terms, sorted by llt_id."""
        return tuple(self._llts.values())

    @property
    def n_concepts(self) -> int:
        return len(self._concepts)

    @property
    def n_llts(self) -> int:
        return len(self._llts)

    def pt_ids(self) -> list:
        return list(self._concepts)

    def has_pt(self, pt_id: str) -> bool:
        return pt_id in self._concepts

    def has_llt(self, llt_id: str) -> bool:
        return llt_id in self._llts

    def concept(self, pt_id: str) -> Concept:
        try:
            return self._concepts[pt_id]
        except KeyError:
            raise UnknownIdError(f"unknown pt_id {pt_id!r}") from None

    def llt(self, llt_id: str) -> LltEntry:
        try:
            return self._llts[llt_id]
        except KeyError:
            raise UnknownIdError(f"unknown llt_id {llt_id!r}") from None

    def parent_of(self, llt_id: str) -> str:
        """pt_id of the child term's single parent."""
        return self.llt(llt_id).parent_pt_id

    def children_of(self, pt_id: str) -> tuple:
        """Child terms of a concept, sorted by llt_id."""
        if pt_id not in self._concepts:
            raise UnknownIdError(f"unknown pt_id {pt_id!r}")
        return self._children[pt_id]

    def __eq__(self, other):
        if not isinstance(other, Ontology):
            return NotImplemented
        return (self._concepts == other._concepts
                and self._llts == other._llts
                and self.version_tag == other.version_tag)

    def __repr__(self):
        return (f"Ontology(n_concepts={self.n_concepts}, "
                f"n_llts={self.n_llts}, version_tag={self.version_tag!r})")


def load_ontology(path, version_tag: Optional[str] = None) -> Ontology:
    """Parse and validate an ontology TSV file.

    version_tag defaults to the file's stem. Raises FileFormatError with
    the offending line number on any schema violation.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read file: {exc}", path=path) from exc
    lines = raw.splitlines()
    if not lines:
        raise FileFormatError("empty file, expected a header row", path=path)
    header = tuple(lines[0].split("\t"))
    if header != _COLUMNS:
        raise FileFormatError(
            f"bad header: expected {list(_COLUMNS)}, got {list(header)}",
            path=path, line=1)

    concepts: dict = {}
    concept_line: dict = {}
    llts: dict = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != len(_COLUMNS):
            raise FileFormatError(f"expected {len(_COLUMNS)} columns, "
                                  f"got {len(cols)}", path=path, line=lineno)
        llt_id, llt_text, pt_id, pt_text, hlt_id, hlt_text = cols
        if not llt_id:
            raise FileFormatError("empty llt_id", path=path, line=lineno)
        if not llt_text:
            raise FileFormatError(f"empty llt_text for llt_id {llt_id!r}",
                                  path=path, line=lineno)
        if not pt_id:
            raise FileFormatError(
                f"llt_id {llt_id!r} has no parent pt_id (dangling reference)",
                path=path, line=lineno)
        if not pt_text:
            raise FileFormatError(f"empty pt_text for pt_id {pt_id!r}",
                                  path=path, line=lineno)
        if bool(hlt_id) != bool(hlt_text):
            raise FileFormatError(
                f"hlt_id and hlt_text must be both set or both empty "
                f"for pt_id {pt_id!r}", path=path, line=lineno)
        try:
            concept = Concept(pt_id, pt_text, hlt_id or None, hlt_text or None)
        except ValueError as exc:
            raise FileFormatError(str(exc), path=path, line=lineno) from exc
        if pt_id in concepts:
            if concepts[pt_id] != concept:
                raise FileFormatError(
                    f"inconsistent definition of pt_id {pt_id!r} "
                    f"(first seen on line {concept_line[pt_id]})",
                    path=path, line=lineno)
        else:
            concepts[pt_id] = concept
            concept_line[pt_id] = lineno
        if llt_id in llts:
            raise FileFormatError(f"duplicate llt_id {llt_id!r}",
                                  path=path, line=lineno)
        llts[llt_id] = LltEntry(llt_id, llt_text, pt_id)

    if not llts:
        raise FileFormatError("no data rows", path=path)
    if version_tag is None:
        version_tag = path.stem
    return Ontology(concepts.values(), llts.values(), version_tag=version_tag)


def save_ontology(ontology: Ontology, path) -> Path:
    """Write the canonical TSV form: header plus rows sorted by llt_id."""
    out = ["\t".join(_COLUMNS)]
    for entry in ontology.llts:
        concept = ontology.concept(entry.parent_pt_id)
        out.append("\t".join((
            entry.llt_id, entry.llt_text, concept.pt_id, concept.pt_text,
            concept.hlt_id or "", concept.hlt_text or "",
        )))
    return atomic_write_text(path, "\n".join(out) + "\n")


def build_pretraining_corpus(ontology: Ontology):
    """Labeled corpus pairing every child term's text with its parent.

    Covers each LLT exactly once (sample_id = llt_id, ordered by llt_id),
    so the label multiset is exactly {parent of each child term}. Every
    concept with at least one child appears as a label, which is what
    makes training on this corpus cover the full output inventory.
    """
    from .data import Dataset, Sample

    samples = [
        Sample(sample_id=e.llt_id, text=e.llt_text,
               label_pt_id=e.parent_pt_id, source_llt_id=e.llt_id)
        for e in ontology.llts
    ]
    name = "ontology-corpus"
    if ontology.version_tag:
        name += ":" + ontology.version_tag
    return Dataset(name=name, samples=tuple(samples))
