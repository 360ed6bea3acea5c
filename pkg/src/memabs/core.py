"""Alphabet, word and word-distribution primitives.

Words are tuples of alphabet indices. Batches of same-length words are kept
as 2-D integer arrays and, where sets of words have to be compared, encoded
as base-M integers (``word_codes``). Integer codes of a fixed length sort in
the same order as the words sort lexicographically, so a sorted code array
doubles as a lexicographically ordered support.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PRUNE_EPS = 1e-12
NORM_TOL = 1e-9

Word = tuple[int, ...]


class InvalidArgument(ValueError):
    """Raised when an operation's preconditions are violated."""


class CapacityError(RuntimeError):
    """Raised when a computation would exceed a configured size cap."""


class Alphabet:
    """Ordered set of distinct output labels."""

    def __init__(self, labels: Iterable) -> None:
        labels = tuple(str(lab) for lab in labels)
        if not labels:
            raise InvalidArgument("alphabet must contain at least one label")
        if len(set(labels)) != len(labels):
            raise InvalidArgument(f"alphabet labels are not distinct: {labels}")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}
        self.separator = "" if all(len(lab) == 1 for lab in labels) else "."

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Alphabet({list(self.labels)!r})"

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise InvalidArgument(f"unknown label {label!r}") from None

    def render(self, word: Sequence[int]) -> str:
        return self.separator.join(self.labels[i] for i in word)

    def parse(self, text: str) -> Word:
        text = text.strip()
        if not text:
            return ()
        parts = list(text) if self.separator == "" else text.split(self.separator)
        return tuple(self.index(p) for p in parts)


def code_dtype(alphabet_size: int, length: int):
    """int64 when every code of `length` letters fits, Python ints otherwise."""
    if alphabet_size ** length < 2**62:
        return np.int64
    return object


def word_codes(letters: np.ndarray, alphabet_size: int) -> np.ndarray:
    """Encode the rows of a 2-D letter array as base-M integers."""
    letters = np.asarray(letters)
    n_words, length = letters.shape
    dtype = code_dtype(alphabet_size, length)
    acc = np.zeros(n_words, dtype=dtype)
    for j in range(length):
        col = letters[:, j].astype(np.int64)
        acc = acc * alphabet_size + (col if dtype is np.int64 else col.astype(object))
    return acc


def window_codes(letters: np.ndarray, width: int, alphabet_size: int) -> np.ndarray:
    """Codes of every contiguous length-`width` window; shape (n_words, L-width+1)."""
    n_words, length = letters.shape
    n_win = length - width + 1
    dtype = code_dtype(alphabet_size, width)
    acc = np.zeros((n_words, n_win), dtype=dtype)
    for j in range(width):
        col = letters[:, j:j + n_win].astype(np.int64)
        acc = acc * alphabet_size + (col if dtype is np.int64 else col.astype(object))
    return acc


def decode_codes(codes: np.ndarray, alphabet_size: int, length: int) -> np.ndarray:
    """Inverse of :func:`word_codes`."""
    codes = np.asarray(codes)
    out = np.zeros((len(codes), length), dtype=np.int64)
    rest = codes.copy()
    for j in range(length - 1, -1, -1):
        out[:, j] = (rest % alphabet_size).astype(np.int64)
        rest = rest // alphabet_size
    return out


def sorted_member(ref: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Boolean mask of `queries` present in the sorted array `ref`."""
    if len(ref) == 0:
        return np.zeros(len(queries), dtype=bool)
    idx = np.searchsorted(ref, queries)
    idx = np.minimum(idx, len(ref) - 1)
    return ref[idx] == queries


def count_subwords(word: Sequence[int], k: int) -> dict[Word, int]:
    """Count overlapping occurrences of every length-k subword."""
    n = len(word)
    if k <= 0 or k > n:
        raise InvalidArgument(f"subword length k={k} must satisfy 1 <= k <= {n}")
    word = tuple(word)
    return dict(Counter(word[i:i + k] for i in range(n - k + 1)))


@dataclass(frozen=True, eq=False)
class WordDistribution:
    """Finitely supported distribution over words of one fixed length.

    ``codes`` is sorted and ``probs`` strictly positive. ``absorbed`` is mass
    that ran into a dead-end model state before reaching ``length`` letters,
    ``pruned`` is mass dropped as floating-point dust; together with the
    support they add up to 1.
    """

    alphabet: Alphabet
    length: int
    codes: np.ndarray
    probs: np.ndarray
    absorbed: float = 0.0
    pruned: float = 0.0

    def __post_init__(self) -> None:
        if self.codes.shape != self.probs.shape:
            raise InvalidArgument("codes and probs differ in shape")
        if len(self.probs) and self.probs.min() <= 0:
            raise InvalidArgument("distribution support contains zero mass")
        total = float(self.probs.sum()) + self.absorbed + self.pruned
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidArgument(f"distribution mass sums to {total!r}, not 1")

    @classmethod
    def from_codes(cls, alphabet, length, codes, weights, absorbed=0.0, pruned=0.0):
        """Build from unsorted, possibly repeated codes with (unnormalized) weights."""
        codes = np.asarray(codes)
        weights = np.asarray(weights, dtype=float)
        if len(codes):
            uniq, inv = np.unique(codes, return_inverse=True)
            mass = np.bincount(inv.ravel(), weights=weights, minlength=len(uniq))
        else:
            uniq = codes.astype(code_dtype(len(alphabet), length))
            mass = np.zeros(0)
        keep = mass > 0
        return cls(alphabet, length, uniq[keep], mass[keep], absorbed, pruned)

    @classmethod
    def from_dict(cls, alphabet: Alphabet, support: dict) -> "WordDistribution":
        """Normalizing constructor from ``{word: weight}``; words may be tuples or strings."""
        words = [alphabet.parse(w) if isinstance(w, str) else tuple(w) for w in support]
        if not words:
            raise InvalidArgument("empty support")
        length = len(words[0])
        if any(len(w) != length for w in words):
            raise InvalidArgument("support words differ in length")
        weights = np.array(list(support.values()), dtype=float)
        if (weights < 0).any() or weights.sum() <= 0:
            raise InvalidArgument("weights must be nonnegative with positive sum")
        weights = weights / weights.sum()
        letters = np.array(words, dtype=np.int64).reshape(len(words), length)
        codes = word_codes(letters, len(alphabet))
        return cls.from_codes(alphabet, length, codes, weights).prune()

    @classmethod
    def empirical(cls, alphabet: Alphabet, letters: np.ndarray) -> "WordDistribution":
        """Relative frequencies of the rows of a 2-D letter array."""
        letters = np.asarray(letters)
        codes = word_codes(letters, len(alphabet))
        return cls.from_codes(alphabet, letters.shape[1], codes, np.full(len(codes), 1.0 / len(codes)))

    def prune(self, eps: float = PRUNE_EPS) -> "WordDistribution":
        small = self.probs < eps
        if not small.any():
            return self
        return WordDistribution(self.alphabet, self.length, self.codes[~small], self.probs[~small],
                                self.absorbed, self.pruned + float(self.probs[small].sum()))

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def mass(self) -> float:
        return float(self.probs.sum())

    def letters(self) -> np.ndarray:
        return decode_codes(self.codes, len(self.alphabet), self.length)

    def words(self) -> list[Word]:
        return [tuple(int(c) for c in row) for row in self.letters()]

    def as_dict(self, render: bool = False) -> dict:
        keys = self.words()
        if render:
            keys = [self.alphabet.render(w) for w in keys]
        return dict(zip(keys, (float(p) for p in self.probs)))

    def prob(self, word) -> float:
        if isinstance(word, str):
            word = self.alphabet.parse(word)
        if len(word) != self.length:
            return 0.0
        code = word_codes(np.array([word], dtype=np.int64), len(self.alphabet))
        hit = sorted_member(self.codes, code)
        if not hit[0]:
            return 0.0
        return float(self.probs[np.searchsorted(self.codes, code)[0]])

    def contains(self, codes: np.ndarray) -> np.ndarray:
        return sorted_member(self.codes, np.asarray(codes))

    def outside_mass(self, other: "WordDistribution") -> float:
        """Mass of this distribution on words that `other` does not support."""
        return float(self.probs[~other.contains(self.codes)].sum())


# Spec-facing name; every distribution in the package is a WordDistribution.
CategoricalDistribution = WordDistribution


def total_variation_like_gap(p: WordDistribution, q: WordDistribution) -> float:
    """p(supp p minus supp q) + q(supp q minus supp p)."""
    if p.length != q.length:
        raise InvalidArgument(f"word lengths differ: {p.length} vs {q.length}")
    if p.alphabet != q.alphabet:
        raise InvalidArgument("distributions are over different alphabets")
    return p.outside_mass(q) + q.outside_mass(p)
