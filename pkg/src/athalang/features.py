"""Text normalization and fixed-dimension n-gram count features.

The feature space is learned from training text only: the `dimension`
most frequent n-grams (total occurrence count, ties broken by
lexicographic order of the n-gram) get indices 0..D-1 in that order.
Character n-grams over 1..3 code points are the default; a word-level
variant is available via ``kind="word"``.
"""

from __future__ import annotations

import heapq
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_fitted

NgramRange = tuple[int, int]

FEATURE_KINDS = ("char", "word")


def normalize(text: str) -> str:
    """Canonical-compose, casefold and collapse whitespace.

    NFC is applied again after casefolding because folding can produce
    decomposed sequences; the result is idempotent.
    """
    folded = unicodedata.normalize("NFC", text).casefold()
    return " ".join(unicodedata.normalize("NFC", folded).split())


def extract_ngrams(text: str, n_range: NgramRange, kind: str = "char") -> list[str]:
    """All contiguous n-grams of each length in `n_range`, shortest
    length first, left to right, duplicates retained.

    Character n-grams are code-point windows (spaces included); word
    n-grams are space-joined windows over the space-separated tokens.
    """
    n_min, n_max = n_range
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"bad n-gram range {n_range}")
    if kind == "char":
        units: Sequence[str] = text
    elif kind == "word":
        units = text.split(" ") if text else []
    else:
        raise ValueError(f"unknown feature kind {kind!r}, expected one of {FEATURE_KINDS}")
    grams: list[str] = []
    for n in range(n_min, n_max + 1):
        if kind == "char":
            grams.extend(text[i : i + n] for i in range(len(text) - n + 1))
        else:
            grams.extend(" ".join(units[i : i + n]) for i in range(len(units) - n + 1))
    return grams


@dataclass(frozen=True)
class Vocabulary:
    """Ordered n-gram to feature-index map, most frequent first.

    `dimension` always equals the number of entries; `counts[i]` is the
    training-corpus occurrence count of the n-gram at index i.
    """

    ngram_to_index: dict[str, int]
    n_range: NgramRange
    dimension: int
    kind: str = "char"
    counts: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.dimension != len(self.ngram_to_index):
            raise ValueError(
                f"dimension {self.dimension} != {len(self.ngram_to_index)} entries"
            )
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")

    def ngrams_by_index(self) -> list[str]:
        out = [""] * self.dimension
        for gram, idx in self.ngram_to_index.items():
            out[idx] = gram
        return out


@dataclass(frozen=True)
class FeatureVector:
    """Sparse count vector: absent index means count 0."""

    entries: dict[int, int]
    dimension: int


def build_vocabulary(
    texts: Iterable[str],
    n_range: NgramRange = (1, 3),
    dimension: int = 5000,
    kind: str = "char",
) -> Vocabulary:
    """Learn the top-`dimension` n-grams from (training) texts.

    Texts are normalized internally. Selection is by total occurrence
    count, descending, ties broken by lexicographic order; if fewer
    distinct n-grams exist the vocabulary is smaller.
    """
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    totals: Counter[str] = Counter()
    seen_any = False
    for text in texts:
        seen_any = True
        totals.update(extract_ngrams(normalize(text), n_range, kind))
    if not seen_any:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    top = heapq.nsmallest(dimension, totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(
        ngram_to_index={gram: i for i, (gram, _) in enumerate(top)},
        n_range=n_range,
        dimension=len(top),
        kind=kind,
        counts=tuple(count for _, count in top),
    )


def vectorize(text: str, vocab: Vocabulary) -> FeatureVector:
    """Count in-vocabulary n-grams of `text` (normalized internally);
    out-of-vocabulary n-grams are ignored."""
    entries: dict[int, int] = {}
    index_of = vocab.ngram_to_index.get
    for gram in extract_ngrams(normalize(text), vocab.n_range, vocab.kind):
        idx = index_of(gram)
        if idx is not None:
            entries[idx] = entries.get(idx, 0) + 1
    return FeatureVector(entries, vocab.dimension)


def count_matrix(texts: Sequence[str], vocab: Vocabulary) -> sp.csr_matrix:
    """Stack vectorize() results into an int64 CSR matrix."""
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for text in texts:
        fv = vectorize(text, vocab)
        for idx in sorted(fv.entries):
            indices.append(idx)
            data.append(fv.entries[idx])
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (
            np.asarray(data, dtype=np.int64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(texts), vocab.dimension),
    )
    return X


class NgramCountVectorizer(BaseEstimator, TransformerMixin):
    """sklearn-style transformer around the n-gram vocabulary.

    fit() learns the vocabulary from the given texts only; transform()
    maps texts to sparse count rows in that fixed space.
    """

    def __init__(self, n_min: int = 1, n_max: int = 3, dimension: int = 5000,
                 kind: str = "char"):
        self.n_min = n_min
        self.n_max = n_max
        self.dimension = dimension
        self.kind = kind

    def fit(self, X: Iterable[str], y=None):
        self.vocabulary_ = build_vocabulary(
            X, (self.n_min, self.n_max), self.dimension, self.kind
        )
        return self

    def transform(self, X: Sequence[str]) -> sp.csr_matrix:
        check_fitted(self, "vocabulary_")
        return count_matrix(X, self.vocabulary_)
