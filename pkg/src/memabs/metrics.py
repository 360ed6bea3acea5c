"""Support-based behavioural distance between abstractions at a horizon of h letters.

d_h(S1, S2) = Q1(B1 minus B2) + Q2(B2 minus B1), where B_i is the set of
h-letter words with positive probability and Q_i the word distribution.
Operands are either memory models or fixed word distributions (for example
the empirical h-prefix behaviour of a sample set).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .abstraction import DEFAULT_SUPPORT_CAP, MemoryMarkovModel, build_model
from .core import InvalidArgument, WordDistribution, word_codes
from .sampler import SampleSet
from .systems import stream

log = logging.getLogger(__name__)

CSV_FIELDS = ("h", "ell1", "ell2", "d", "left", "right", "method",
              "support1", "support2", "absorbed1", "absorbed2")
MC_BLOCK = 10_000


@dataclass(frozen=True)
class DistanceReport:
    h: int
    ell1: int | None
    ell2: int | None
    d: float
    left: float
    right: float
    method: str
    support1: int | None
    support2: int | None
    absorbed1: float
    absorbed2: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=False)

    def csv_row(self) -> str:
        return ",".join(_cell(getattr(self, k)) for k in CSV_FIELDS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_FIELDS)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def empirical_behavior(samples: SampleSet, h: int) -> WordDistribution:
    """Distribution of the h-letter prefixes of the sampled words."""
    if not 1 <= h <= samples.length:
        raise InvalidArgument(f"horizon {h} must lie in [1, L={samples.length}]")
    return WordDistribution.empirical(samples.alphabet, samples.letters[:, :h])


def _memory(op) -> int | None:
    return op.memory if isinstance(op, MemoryMarkovModel) else None


def _check(op1, op2, h: int) -> None:
    if op1.alphabet != op2.alphabet:
        raise InvalidArgument("operands are over different alphabets")
    for op in (op1, op2):
        if isinstance(op, MemoryMarkovModel):
            if h < op.memory:
                raise InvalidArgument(f"horizon {h} is below the model memory {op.memory}")
        elif isinstance(op, WordDistribution):
            if op.length != h:
                raise InvalidArgument(f"behaviour has words of {op.length} letters, horizon is {h}")
        else:
            raise InvalidArgument(f"cannot compare objects of type {type(op).__name__}")


def _behavior(op, h: int, cap: int) -> WordDistribution:
    return op.unroll(h, cap) if isinstance(op, MemoryMarkovModel) else op


def _draw(op, n: int, h: int, rng: np.random.Generator):
    if isinstance(op, MemoryMarkovModel):
        return op.sample_words(n, h, rng)
    cum = np.cumsum(op.probs)
    pick = np.searchsorted(cum, rng.random(n), side="right")
    absorbed = pick >= len(cum)
    letters = op.letters()[np.minimum(pick, len(cum) - 1)]
    letters[absorbed] = -1
    return letters, absorbed


def _member(op, letters: np.ndarray) -> np.ndarray:
    if isinstance(op, MemoryMarkovModel):
        return op.accepts(letters)
    return op.contains(word_codes(letters, len(op.alphabet)))


def _mc_outside(op1, op2, h: int, n_samples: int, seed: int, side: int):
    """Monte-Carlo estimate of op1's mass outside op2's support, and op1's absorbed mass."""
    outside = absorbed = 0
    for block, start in enumerate(range(0, n_samples, MC_BLOCK)):
        n = min(MC_BLOCK, n_samples - start)
        rng = stream(seed, 2 * block + side)
        letters, dead = _draw(op1, n, h, rng)
        live = ~dead
        outside += int((~_member(op2, letters[live])).sum()) if live.any() else 0
        absorbed += int(dead.sum())
    return outside / n_samples, absorbed / n_samples


def distance(op1, op2, h: int, method: str = "exact", n_samples: int = 100_000, seed: int = 0,
             cap: int = DEFAULT_SUPPORT_CAP) -> DistanceReport:
    """d_h between two models or behaviours, with both one-sided terms."""
    _check(op1, op2, h)
    if method == "exact":
        b1, b2 = _behavior(op1, h, cap), _behavior(op2, h, cap)
        left, right = b1.outside_mass(b2), b2.outside_mass(b1)
        d = left + right
        report = DistanceReport(h, _memory(op1), _memory(op2), d, left, right, "exact",
                                len(b1), len(b2), b1.absorbed, b2.absorbed)
    elif method in ("monte-carlo", "mc"):
        left, a1 = _mc_outside(op1, op2, h, n_samples, seed, 0)
        right, a2 = _mc_outside(op2, op1, h, n_samples, seed, 1)
        report = DistanceReport(h, _memory(op1), _memory(op2), left + right, left, right,
                                f"monte-carlo({n_samples})", None, None, a1, a2)
    else:
        raise InvalidArgument(f"unknown method {method!r}; use 'exact' or 'monte-carlo'")
    m1, m2 = _memory(op1), _memory(op2)
    if m1 is not None and m2 is not None and m1 != m2 and report.left > 0 and report.right > 0:
        log.warning("models of memory %d and %d differ on both sides at h=%d (left=%.3g, right=%.3g)",
                    m1, m2, h, report.left, report.right)
    return report


def spurious_mass(model, reference, h: int, method: str = "exact", **kw) -> float:
    """Mass of `model`'s h-letter words that `reference` cannot produce."""
    return distance(model, reference, h, method, **kw).left


def missing_mass(model, reference, h: int, method: str = "exact", **kw) -> float:
    """Mass of `reference`'s h-letter words that `model` cannot produce."""
    return distance(model, reference, h, method, **kw).right


def proposition1_check(samples: SampleSet, h: int) -> DistanceReport:
    """Compare the memory-h model built from `samples` with their empirical h-prefix behaviour.

    Both supports are the set of observed h-prefixes, so both terms are 0.
    """
    model = build_model(samples, h)
    return distance(model, empirical_behavior(samples, h), h)
