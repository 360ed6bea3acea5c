"""Monte-Carlo trajectory sampling of a system into labelled words."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Alphabet, CapacityError, InvalidArgument, Word
from .systems import System, stream

DEFAULT_MAX_CELLS = 50_000_000
BLOCK = 2048


@dataclass(eq=False)
class SampleSet:
    """N' words of L letters each, plus optionally the states that produced them.

    ``letters`` has shape (N', L); ``states`` has shape (N', L, dim).
    """

    alphabet: Alphabet
    letters: np.ndarray
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.letters = np.asarray(self.letters, dtype=np.int64)
        if self.letters.ndim != 2:
            raise InvalidArgument("letters must be a 2-D array (words x length)")
        if self.letters.size and (self.letters.min() < 0 or self.letters.max() >= len(self.alphabet)):
            raise InvalidArgument("letter index outside the alphabet")

    @classmethod
    def from_words(cls, alphabet: Alphabet, words, meta=None) -> "SampleSet":
        parsed = [alphabet.parse(w) if isinstance(w, str) else tuple(w) for w in words]
        if not parsed:
            raise InvalidArgument("empty sample set")
        if len({len(w) for w in parsed}) != 1:
            raise InvalidArgument("all sampled words must have the same length")
        return cls(alphabet, np.array(parsed, dtype=np.int64), meta=dict(meta or {}))

    @property
    def n_traj(self) -> int:
        return self.letters.shape[0]

    @property
    def length(self) -> int:
        return self.letters.shape[1]

    def words(self) -> list[Word]:
        return [tuple(int(c) for c in row) for row in self.letters]

    def rendered(self) -> list[str]:
        return [self.alphabet.render(w) for w in self.letters]

    def write(self, path) -> None:
        Path(path).write_text("".join(w + "\n" for w in self.rendered()))

    @classmethod
    def read(cls, path, alphabet: Alphabet) -> "SampleSet":
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        return cls.from_words(alphabet, lines, meta={"source": str(path)})

    def write_states(self, path) -> None:
        if self.states is None:
            raise InvalidArgument("sample set does not retain states")
        n, length, dim = self.states.shape
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["trajectory_id", "step"] + [f"x{j}" for j in range(dim)])
            for i in range(n):
                for k in range(length):
                    out.writerow([i, k] + [repr(float(v)) for v in self.states[i, k]])


def _simulate_block(system: System, start: int, stop: int, length: int, seed: int, keep_states: bool):
    n = stop - start
    u0 = np.empty((n, system.init_draws))
    us = np.zeros((n, max(length - 1, 0)))
    for i in range(n):
        rng = stream(seed, start + i)
        u0[i] = rng.random(system.init_draws)
        if not system.deterministic:
            us[i] = rng.random(length - 1)
    x = system.initial_from_uniform(u0)
    letters = np.empty((n, length), dtype=np.int64)
    states = np.empty((n, length, system.dim), dtype=x.dtype) if keep_states else None
    for k in range(length):
        if k:
            x = system.advance(x, us[:, k - 1])
        letters[:, k] = system.output_batch(x)
        if keep_states:
            states[:, k] = x
    return letters, states


def simulate(system: System, n_traj: int, length: int, seed: int = 0, keep_states: bool = False,
             max_cells: int = DEFAULT_MAX_CELLS, workers: int = 1) -> SampleSet:
    """Draw `n_traj` independent trajectories of `length` letters.

    Trajectory i uses its own stream keyed by (seed, i), so the result does
    not depend on `workers` and the first trajectories do not depend on
    `n_traj`.
    """
    if n_traj < 1 or length < 1:
        raise InvalidArgument(f"need n_traj >= 1 and length >= 1, got {n_traj}, {length}")
    if n_traj * length > max_cells:
        raise CapacityError(f"{n_traj} x {length} letters exceeds the cap of {max_cells}")
    bounds = [(s, min(s + BLOCK, n_traj)) for s in range(0, n_traj, BLOCK)]
    run = lambda b: _simulate_block(system, b[0], b[1], length, seed, keep_states)  # noqa: E731
    if workers == 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers or None) as pool:
            parts = list(pool.map(run, bounds))
    letters = np.concatenate([p[0] for p in parts])
    states = np.concatenate([p[1] for p in parts]) if keep_states else None
    meta = {"system": system.name, "seed": seed, "n_traj": n_traj, "length": length}
    return SampleSet(system.alphabet, letters, states, meta)
