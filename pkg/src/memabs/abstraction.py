"""Memory-ℓ Markov models estimated from sampled words.

A model's states are length-ℓ words; from state ``y`` emitting letter ``c``
the next state is ``y[1:] + c``. Transitions are stored in CSR form over the
sorted state codes: the row of state ``i`` holds ``next_letters`` and
``probs`` in ``indptr[i]:indptr[i+1]``, letters ascending.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import (
    Alphabet,
    CapacityError,
    InvalidArgument,
    NORM_TOL,
    PRUNE_EPS,
    WordDistribution,
    code_dtype,
    decode_codes,
    sorted_member,
    window_codes,
    word_codes,
)
from .sampler import SampleSet
from .systems import stream

DEFAULT_SUPPORT_CAP = 1_000_000
FORMAT_TAG = "memabs-model 1"


def _as_dtype(codes: np.ndarray, dtype) -> np.ndarray:
    if dtype is object and codes.dtype != object:
        return codes.astype(object)
    return codes


def _expand_rows(starts: np.ndarray, deg: np.ndarray):
    """Parent index and edge index of every outgoing edge of a frontier."""
    parent = np.repeat(np.arange(len(deg)), deg)
    first = np.cumsum(deg) - deg
    edge = np.repeat(starts, deg) + (np.arange(int(deg.sum())) - np.repeat(first, deg))
    return parent, edge


class MemoryMarkovModel:
    def __init__(self, alphabet: Alphabet, memory: int, states, indptr, next_letters, probs,
                 initial: WordDistribution, meta: dict | None = None):
        if memory < 1:
            raise InvalidArgument(f"memory must be >= 1, got {memory}")
        self.alphabet = alphabet
        self.memory = int(memory)
        self.states = np.asarray(states)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.next_letters = np.asarray(next_letters, dtype=np.int64)
        self.probs = np.asarray(probs, dtype=float)
        self.initial = initial
        self.meta = dict(meta or {})
        self._gcum = np.cumsum(self.probs)
        M = len(alphabet)
        src = np.repeat(self.states, np.diff(self.indptr))
        self.gram_codes = _as_dtype(src, code_dtype(M, memory + 1)) * M + self.next_letters
        self.validate()

    # -- structure -----------------------------------------------------------------
    def validate(self) -> None:
        M = len(self.alphabet)
        if len(self.indptr) != len(self.states) + 1 or self.indptr[0] != 0 \
                or self.indptr[-1] != len(self.probs):
            raise InvalidArgument("malformed transition table")
        if len(self.states) > 1 and not (self.states[1:] > self.states[:-1]).all():
            raise InvalidArgument("states must be strictly increasing codes")
        if len(self.next_letters) and (self.next_letters.min() < 0 or self.next_letters.max() >= M):
            raise InvalidArgument("transition letter outside the alphabet")
        if len(self.probs) and self.probs.min() <= 0:
            raise InvalidArgument("stored transitions must have positive probability")
        deg = np.diff(self.indptr)
        row_mass = np.bincount(np.repeat(np.arange(len(deg)), deg), weights=self.probs,
                               minlength=len(deg))
        live = deg > 0
        if live.any() and np.abs(row_mass[live] - 1.0).max() > NORM_TOL:
            raise InvalidArgument("transition rows are not stochastic")
        targets = self.gram_codes % (M ** self.memory) if len(self.gram_codes) else self.gram_codes
        if not sorted_member(self.states, targets).all():
            raise InvalidArgument("a transition targets a word outside the state set")
        if self.initial.length != self.memory or not sorted_member(self.states, self.initial.codes).all():
            raise InvalidArgument("initial distribution must be supported on the state set")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return len(self.probs)

    def state_words(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row)
                for row in decode_codes(self.states, len(self.alphabet), self.memory)]

    def _code(self, word) -> object:
        if isinstance(word, str):
            word = self.alphabet.parse(word)
        if len(word) != self.memory:
            raise InvalidArgument(f"state words have {self.memory} letters, got {len(word)}")
        return word_codes(np.array([word], dtype=np.int64), len(self.alphabet))

    def successors(self, word) -> dict[int, float]:
        """Outgoing letter probabilities of a state word (empty for dead ends)."""
        code = self._code(word)
        if not sorted_member(self.states, code)[0]:
            raise InvalidArgument(f"{word!r} is not a state of the model")
        i = int(np.searchsorted(self.states, code)[0])
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return {int(c): float(p) for c, p in zip(self.next_letters[lo:hi], self.probs[lo:hi])}

    def prob(self, word, letter) -> float:
        if isinstance(letter, str):
            letter = self.alphabet.index(letter)
        try:
            return self.successors(word).get(int(letter), 0.0)
        except InvalidArgument:
            return 0.0

    @property
    def transitions(self) -> dict:
        """``{(state word, letter): probability}`` for every stored transition."""
        out = {}
        for i, w in enumerate(self.state_words()):
            for e in range(self.indptr[i], self.indptr[i + 1]):
                out[(w, int(self.next_letters[e]))] = float(self.probs[e])
        return out

    def dead_ends(self) -> list[tuple[int, ...]]:
        deg = np.diff(self.indptr)
        words = self.state_words()
        return [words[i] for i in np.flatnonzero(deg == 0)]

    def accepts(self, letters: np.ndarray) -> np.ndarray:
        """Which rows of a (n_words, n) letter array lie in the model's behaviour."""
        letters = np.asarray(letters, dtype=np.int64)
        n = letters.shape[1]
        if n < self.memory:
            raise InvalidArgument(f"words of {n} letters are shorter than the memory {self.memory}")
        M = len(self.alphabet)
        ok = self.initial.contains(word_codes(letters[:, :self.memory], M))
        if n > self.memory:
            grams = window_codes(letters, self.memory + 1, M)
            hits = sorted_member(self.gram_codes, grams.ravel()).reshape(grams.shape)
            ok &= hits.all(axis=1)
        return ok

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemoryMarkovModel):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.memory == other.memory
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.next_letters, other.next_letters)
                and np.array_equal(self.probs, other.probs)
                and np.array_equal(self.initial.codes, other.initial.codes)
                and np.array_equal(self.initial.probs, other.initial.probs)
                and self.initial.absorbed == other.initial.absorbed)

    def __repr__(self) -> str:
        return (f"MemoryMarkovModel(memory={self.memory}, states={self.n_states}, "
                f"transitions={self.n_transitions})")

    # -- semantics -----------------------------------------------------------------
    def unroll(self, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> WordDistribution:
        """Exact distribution over the model's n-letter words.

        Expansion is breadth first in lexicographic order. Mass reaching a
        dead-end state before n letters is reported as ``absorbed``.
        """
        if n < self.memory:
            raise InvalidArgument(f"horizon {n} is below the memory {self.memory}")
        M = len(self.alphabet)
        mod = M ** self.memory
        codes = self.initial.codes
        probs = self.initial.probs.copy()
        absorbed, pruned = self.initial.absorbed, self.initial.pruned
        for t in range(self.memory, n):
            codes = _as_dtype(codes, code_dtype(M, t + 1))
            idx = np.searchsorted(self.states, codes % mod)
            deg = self.indptr[idx + 1] - self.indptr[idx]
            dead = deg == 0
            if dead.any():
                absorbed += float(probs[dead].sum())
            total = int(deg.sum())
            if total > cap:
                raise CapacityError(f"support of {total} words at {t + 1} letters exceeds the cap "
                                    f"of {cap}; use the monte-carlo method")
            parent, edge = _expand_rows(self.indptr[idx], deg)
            codes = codes[parent] * M + self.next_letters[edge]
            probs = probs[parent] * self.probs[edge]
            small = probs < PRUNE_EPS
            if small.any():
                pruned += float(probs[small].sum())
                codes, probs = codes[~small], probs[~small]
        return WordDistribution(self.alphabet, n, codes, probs, absorbed, pruned)

    def lift(self, target_memory: int) -> "MemoryMarkovModel":
        """Equivalent model with memory `target_memory` over the reachable words."""
        if target_memory < self.memory:
            raise InvalidArgument(f"cannot lift memory {self.memory} down to {target_memory}")
        if target_memory == self.memory:
            return self
        M = len(self.alphabet)
        initial = self.unroll(target_memory)
        dtype = code_dtype(M, target_memory + 1)
        mod_old, mod_new = M ** self.memory, M ** target_memory
        found = _as_dtype(initial.codes, dtype)
        frontier = found
        while len(frontier):
            idx = np.searchsorted(self.states, frontier % mod_old)
            deg = self.indptr[idx + 1] - self.indptr[idx]
            parent, edge = _expand_rows(self.indptr[idx], deg)
            nxt = np.unique((frontier[parent] * M + self.next_letters[edge]) % mod_new)
            frontier = nxt[~sorted_member(found, nxt)]
            found = np.union1d(found, frontier)
        idx = np.searchsorted(self.states, found % mod_old)
        deg = self.indptr[idx + 1] - self.indptr[idx]
        _, edge = _expand_rows(self.indptr[idx], deg)
        indptr = np.concatenate([[0], np.cumsum(deg)])
        meta = dict(self.meta, lifted_from=self.memory)
        return MemoryMarkovModel(self.alphabet, target_memory, found, indptr,
                                 self.next_letters[edge], self.probs[edge], initial, meta)

    def sample_words(self, n_words: int, n: int, rng: np.random.Generator):
        """Raw draws: (letters, absorbed mask). Absorbed rows are padded with -1."""
        if n < self.memory:
            raise InvalidArgument(f"horizon {n} is below the memory {self.memory}")
        M = len(self.alphabet)
        mod = M ** self.memory
        letters = np.full((n_words, n), -1, dtype=np.int64)
        icum = np.cumsum(self.initial.probs)
        pick = np.searchsorted(icum, rng.random(n_words), side="right")
        absorbed = pick >= len(icum)
        pick = np.minimum(pick, len(icum) - 1)
        state = self.initial.codes[pick]
        letters[:, :self.memory] = decode_codes(state, M, self.memory)
        for t in range(self.memory, n):
            u = rng.random(n_words)
            idx = np.searchsorted(self.states, state)
            lo, hi = self.indptr[idx], self.indptr[idx + 1]
            absorbed |= hi == lo
            live = ~absorbed
            base = np.where(lo > 0, self._gcum[np.maximum(lo - 1, 0)], 0.0)
            edge = np.searchsorted(self._gcum, base + u, side="right")
            edge = np.clip(edge, lo, np.maximum(hi - 1, lo))
            edge = np.where(live, edge, 0)
            letters[live, t] = self.next_letters[edge[live]]
            state = np.where(live, (state * M + np.where(live, self.next_letters[edge], 0)) % mod, state)
        letters[absorbed] = -1
        return letters, absorbed


def build_model(samples: SampleSet, memory: int) -> MemoryMarkovModel:
    """Empirical memory-ℓ model from pooled overlapping windows of every sampled word.

    P(c | y) = N_{yc} / N_y, where N_y counts only occurrences of y that have
    a successor letter. The initial distribution is the frequency of each
    ℓ-prefix among the sampled words.
    """
    if samples.n_traj == 0:
        raise InvalidArgument("empty sample set")
    if not 1 <= memory < samples.length:
        raise InvalidArgument(f"memory must satisfy 1 <= memory < L={samples.length}, got {memory}")
    M = len(samples.alphabet)
    letters = samples.letters
    states = np.unique(window_codes(letters, memory, M).ravel())
    grams, counts = np.unique(window_codes(letters, memory + 1, M).ravel(), return_counts=True)
    src = grams // M
    next_letters = (grams % M).astype(np.int64)
    row = np.searchsorted(states, src)
    row_total = np.bincount(row, weights=counts, minlength=len(states))
    probs = counts / row_total[row]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(row, minlength=len(states)))])
    initial = WordDistribution.empirical(samples.alphabet, letters[:, :memory])
    return MemoryMarkovModel(samples.alphabet, memory, states, indptr, next_letters, probs,
                             initial, dict(samples.meta))


def lift(model: MemoryMarkovModel, target_memory: int) -> MemoryMarkovModel:
    return model.lift(target_memory)


def unroll(model: MemoryMarkovModel, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> WordDistribution:
    return model.unroll(n, cap)


def sample_model(model: MemoryMarkovModel, n_words: int, n: int, seed: int = 0) -> SampleSet:
    """I.i.d. n-letter words from the model, conditioned on not being absorbed."""
    if len(model.initial) == 0:
        raise InvalidArgument("model has an empty initial distribution")
    rng = stream(seed, 0)
    kept, have, rounds = [], 0, 0
    while have < n_words:
        letters, absorbed = model.sample_words(max(n_words - have, 1), n, rng)
        letters = letters[~absorbed]
        kept.append(letters)
        have += len(letters)
        rounds += 1
        if rounds > 1000 and have == 0:
            raise InvalidArgument("every sampled path is absorbed before the horizon")
    letters = np.concatenate(kept)[:n_words]
    return SampleSet(model.alphabet, letters, meta={"source": "model", "memory": model.memory,
                                                    "seed": seed, "n_traj": n_words, "length": n})


# -- serialization -------------------------------------------------------------------
def _fmt(x: float) -> str:
    return "%.17g" % x


def write_model(model: MemoryMarkovModel, path) -> None:
    a = model.alphabet
    if any(not lab or any(ch.isspace() for ch in lab) for lab in a.labels):
        raise InvalidArgument("labels containing whitespace cannot be serialized")
    lines = [FORMAT_TAG]
    for key in sorted(model.meta):
        lines.append(f"# {key}={model.meta[key]}")
    lines += [
        "alphabet " + " ".join(a.labels),
        f"memory {model.memory}",
        f"states {model.n_states}",
        f"initial {len(model.initial)}",
        f"transitions {model.n_transitions}",
        f"absorbed {_fmt(model.initial.absorbed)} {_fmt(model.initial.pruned)}",
        "[states]",
    ]
    words = model.state_words()
    lines += [a.render(w) for w in words]
    lines.append("[initial]")
    for w, p in zip(model.initial.words(), model.initial.probs):
        lines.append(f"{a.render(w)} {_fmt(p)}")
    lines.append("[transitions]")
    for i, w in enumerate(words):
        for e in range(model.indptr[i], model.indptr[i + 1]):
            lines.append(f"{a.render(w)} {a.labels[model.next_letters[e]]} {_fmt(model.probs[e])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> MemoryMarkovModel:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise InvalidArgument(f"{path}: not a model file (missing '{FORMAT_TAG}' header)")
    header, section, body = {}, None, {"states": [], "initial": [], "transitions": []}
    meta = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line.startswith("["):
            section = line.strip("[]")
            if section not in body:
                raise InvalidArgument(f"{path}:{lineno}: unknown section {line}")
        elif section is None:
            key, _, val = line.partition(" ")
            header[key] = val
        else:
            body[section].append((lineno, line.split()))
    try:
        alphabet = Alphabet(header["alphabet"].split())
        memory = int(header["memory"])
        init_absorbed, init_pruned = (float(v) for v in header["absorbed"].split())
    except (KeyError, ValueError) as exc:
        raise InvalidArgument(f"{path}: bad or missing header field ({exc})") from None
    M = len(alphabet)

    def codes_of(words):
        if not words:
            return np.zeros(0, dtype=code_dtype(M, memory))
        return word_codes(np.array([alphabet.parse(w) for w in words], dtype=np.int64).reshape(-1, memory), M)

    try:
        states = codes_of([f[0] for _, f in body["states"]])
        init_codes = codes_of([f[0] for _, f in body["initial"]])
        init_probs = np.array([float(f[1]) for _, f in body["initial"]])
        tr = body["transitions"]
        src = codes_of([f[0] for _, f in tr])
        letters = np.array([alphabet.index(f[1]) for _, f in tr], dtype=np.int64)
        probs = np.array([float(f[2]) for _, f in tr])
    except (IndexError, ValueError) as exc:
        raise InvalidArgument(f"{path}: malformed body line ({exc})") from None
    for name, count in (("states", len(states)), ("initial", len(init_codes)), ("transitions", len(probs))):
        if int(header.get(name, count)) != count:
            raise InvalidArgument(f"{path}: header declares {header[name]} {name}, found {count}")
    row = np.searchsorted(states, src)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(row, minlength=len(states)))])
    order = np.lexsort((letters, row))
    initial = WordDistribution(alphabet, memory, init_codes, init_probs, init_absorbed, init_pruned)
    return MemoryMarkovModel(alphabet, memory, states, indptr, letters[order], probs[order], initial, meta)
