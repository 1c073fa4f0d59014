"""Text normalization and hashed character n-gram features.

The feature scheme is part of the on-disk model contract and must stay
bit-stable across platforms and reimplementations:

  - normalize: Unicode NFKC, lowercase, whitespace runs collapsed to a
    single space, leading/trailing whitespace removed
  - pad: "^" + normalized text + "$" (an empty normalized string is not
    padded and produces no features)
  - n-grams: every contiguous substring of length n, for each n in the
    inclusive range [lo, hi]
  - index: FNV-1a 64-bit over the n-gram's UTF-8 bytes, reduced modulo
    the table size (a power of two, so the reduction is a mask)

FNV-1a 64-bit constants: offset basis 14695981039346656037
(0xcbf29ce484222325), prime 1099511628211 (0x100000001b3).
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from scipy import sparse

from .validation import check_ngram_range, check_power_of_two, check_texts

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

DEFAULT_N_FEATURES = 2 ** 16
DEFAULT_NGRAM_RANGE = (2, 4)


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = FNV_OFFSET_BASIS
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def normalize_text(text: str) -> str:
    """Canonical text form: NFKC, lowercased, whitespace collapsed.

    Idempotent: normalize_text(normalize_text(s)) == normalize_text(s).
    """
    folded = unicodedata.normalize("NFKC", text).lower()
    return " ".join(folded.split())


@dataclass(frozen=True)
class FeatureVector:
    """Sparse non-negative feature map over a fixed-size hash table."""

    dim: int
    entries: dict

    def mass(self) -> float:
        """Total count mass, i.e. the number of n-grams hashed in."""
        return float(sum(self.entries.values()))

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(v * v for v in self.entries.values())))

    def to_arrays(self, norm: bool = False):
        """Return (indices, values) sorted by index.

        With norm=True values are L2-normalized; an empty vector stays
        empty rather than dividing by zero.
        """
        idx = np.array(sorted(self.entries), dtype=np.int64)
        val = np.array([self.entries[i] for i in idx], dtype=np.float64)
        if norm and val.size:
            val /= np.linalg.norm(val)
        return idx, val


def featurize(text: str, n_features: int = DEFAULT_N_FEATURES,
              ngram_range: tuple = DEFAULT_NGRAM_RANGE) -> FeatureVector:
    """Hashed character n-gram counts of the boundary-padded normalized text.

    Parameters
    ----------
    text : str
        Raw input text; normalized internally.
    n_features : int
        Hash table size, must be a power of two.
    ngram_range : (int, int)
        Inclusive range of n-gram lengths, 1 <= lo <= hi.
    """
    check_power_of_two(n_features, "n_features")
    lo, hi = check_ngram_range(ngram_range)
    normalized = normalize_text(text)
    entries: dict = {}
    if not normalized:
        return FeatureVector(n_features, entries)
    padded = "^" + normalized + "$"
    mask = n_features - 1
    for n in range(lo, hi + 1):
        for start in range(len(padded) - n + 1):
            gram = padded[start:start + n]
            slot = fnv1a_64(gram.encode("utf-8")) & mask
            entries[slot] = entries.get(slot, 0.0) + 1.0
    return FeatureVector(n_features, entries)


def encode_text(text: str, n_features: int, ngram_range: tuple,
                norm: bool = True):
    """featurize + to_arrays in one call; the hot path used by models."""
    return featurize(text, n_features, ngram_range).to_arrays(norm=norm)


class HashingFeaturizer(BaseEstimator, TransformerMixin):
    """Stateless text-to-sparse-matrix transformer over the hash scheme.

    Parameters
    ----------
    n_features : int, default 65536
        Hash table size, must be a power of two.
    ngram_range : tuple, default (2, 4)
        Inclusive character n-gram length range.
    norm : {"l2", None}, default "l2"
        Row normalization applied after counting.
    """

    def __init__(self, n_features: int = DEFAULT_N_FEATURES,
                 ngram_range: tuple = DEFAULT_NGRAM_RANGE,
                 norm: str | None = "l2"):
        self.n_features = n_features
        self.ngram_range = ngram_range
        self.norm = norm

    def _validate(self):
        check_power_of_two(self.n_features, "n_features")
        check_ngram_range(self.ngram_range)
        if self.norm not in ("l2", None):
            raise ValueError(f"norm must be 'l2' or None, got {self.norm!r}")

    def fit(self, X, y=None):
        self._validate()
        check_texts(X)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        self._validate()
        texts = check_texts(X)
        indptr = [0]
        indices: list = []
        data: list = []
        for text in texts:
            idx, val = encode_text(text, self.n_features, self.ngram_range,
                                   norm=(self.norm == "l2"))
            indices.extend(idx.tolist())
            data.extend(val.tolist())
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.asarray(data, dtype=np.float64),
             np.asarray(indices, dtype=np.int64),
             np.asarray(indptr, dtype=np.int64)),
            shape=(len(texts), self.n_features),
        )
