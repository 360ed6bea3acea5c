"""Generative dynamical systems: initial sampling, one-step transition, output map.

Every system exposes a scalar interface (``sample_initial``, ``step``,
``output``) and a batched one used by the sampler. Both consume random
numbers identically: ``init_draws`` uniforms for the initial state, then one
uniform per step for stochastic systems and none for deterministic ones.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Alphabet, InvalidArgument, NORM_TOL

TWO_PI = 2.0 * math.pi
DEFAULT_THETA = TWO_PI * (math.sqrt(2.0) - 1.0)


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based random stream keyed by (master seed, trajectory index)."""
    if not 0 <= seed < 2**64 or not 0 <= index < 2**64:
        raise InvalidArgument("seed and stream index must lie in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=[seed, index]))


class System:
    name = "system"
    deterministic = True
    dim = 1
    init_draws = 1
    alphabet: Alphabet

    # batched interface, overridden by subclasses
    def initial_from_uniform(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def advance(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    # scalar interface
    def sample_initial(self, rng: np.random.Generator):
        u = rng.random(self.init_draws).reshape(1, self.init_draws)
        return self._unbatch(self.initial_from_uniform(u))

    def step(self, x, rng: np.random.Generator | None = None):
        u = np.zeros(1)
        if not self.deterministic:
            u[0] = rng.random()
        return self._unbatch(self.advance(self._batch(x), u))

    def output(self, x) -> int:
        return int(self.output_batch(self._batch(x))[0])

    def _batch(self, x) -> np.ndarray:
        return np.asarray(x, dtype=self._dtype).reshape(1, self.dim)

    def _unbatch(self, x: np.ndarray):
        if self.dim == 1:
            return x[0, 0].item()
        return x[0].copy()

    _dtype = float


def _box(low, high, dim):
    low = np.broadcast_to(np.asarray(low, dtype=float), (dim,)).copy()
    high = np.broadcast_to(np.asarray(high, dtype=float), (dim,)).copy()
    if (high < low).any():
        raise InvalidArgument(f"initial box has high < low: {low} {high}")
    return low, high


class Sturmian(System):
    """Rotation of the circle [0, 2pi) by theta; output 0 on [0, theta)."""

    name = "sturmian"

    def __init__(self, theta: float = DEFAULT_THETA, init_low=0.0, init_high=TWO_PI):
        if not 0.0 < theta < TWO_PI:
            raise InvalidArgument(f"theta must lie in (0, 2pi), got {theta}")
        self.theta = float(theta)
        self.alphabet = Alphabet(["0", "1"])
        self.init_low, self.init_high = _box(init_low, init_high, 1)
        if self.init_low[0] < 0 or self.init_high[0] > TWO_PI:
            raise InvalidArgument("initial interval must lie inside [0, 2pi]")

    def initial_from_uniform(self, u):
        x = self.init_low + u * (self.init_high - self.init_low)
        # u < 1 keeps x < high; a degenerate interval at 2pi wraps to 0
        return np.where(x >= TWO_PI, x - TWO_PI, x)

    def advance(self, x, u):
        # one subtraction suffices since 0 < theta < 2pi
        y = x + self.theta
        return np.where(y >= TWO_PI, y - TWO_PI, y)

    def output_batch(self, x):
        return (x[:, 0] >= self.theta).astype(np.int64)

    def params(self):
        return {"theta": self.theta, "init_low": list(self.init_low), "init_high": list(self.init_high)}


A1_DEFAULT = np.array([[math.cos(math.pi / 6), math.sin(math.pi / 6)],
                       [-math.sin(math.pi / 6), math.cos(math.pi / 6)]])
A2_DEFAULT = np.array([[1.02, 0.0], [0.0, 0.5]])


class SwitchedLinear(System):
    """x' = A1 x with probability p, A2 x otherwise; nine-cell radial/quadrant output."""

    name = "switched"
    deterministic = False
    dim = 2
    init_draws = 2

    def __init__(self, a1=A1_DEFAULT, a2=A2_DEFAULT, p: float = 0.5,
                 init_low=(-2.0, -2.0), init_high=(2.0, 2.0)):
        self.a1 = np.asarray(a1, dtype=float).reshape(2, 2)
        self.a2 = np.asarray(a2, dtype=float).reshape(2, 2)
        if not np.isfinite(self.a1).all() or not np.isfinite(self.a2).all():
            raise InvalidArgument("matrices must be finite")
        if not 0.0 <= p <= 1.0:
            raise InvalidArgument(f"switch probability must lie in [0, 1], got {p}")
        self.p = float(p)
        self.alphabet = Alphabet([str(i) for i in range(9)])
        self.init_low, self.init_high = _box(init_low, init_high, 2)

    def initial_from_uniform(self, u):
        return self.init_low + u * (self.init_high - self.init_low)

    def advance(self, x, u):
        first = (u < self.p)[:, None]
        return np.where(first, x @ self.a1.T, x @ self.a2.T)

    def output_batch(self, x):
        r = np.hypot(x[:, 0], x[:, 1])
        right = x[:, 0] >= 0
        upper = x[:, 1] >= 0
        quadrant = np.where(upper, np.where(right, 0, 1), np.where(right, 3, 2))
        ring = np.where(r < 1.0, 0, np.where(r < 2.0, 1, 5))
        return np.where(ring == 0, 0, ring + quadrant).astype(np.int64)

    def params(self):
        return {"a1": self.a1.ravel().tolist(), "a2": self.a2.ravel().tolist(), "p": self.p,
                "init_low": list(self.init_low), "init_high": list(self.init_high)}


class PiecewiseDemo(System):
    """Two-cell map on [0, 2) where every "ab" is followed by "a".

    a = [0, 1), b = [1, 2). [0, 0.5) and b minus {1.5} are fixed, [0.5, 1)
    collapses onto 1.5, and 1.5 returns to 0.25.
    """

    name = "piecewise"

    def __init__(self, init_low=0.0, init_high=2.0):
        self.alphabet = Alphabet(["a", "b"])
        self.init_low, self.init_high = _box(init_low, init_high, 1)
        if self.init_low[0] < 0 or self.init_high[0] > 2.0:
            raise InvalidArgument("initial interval must lie inside [0, 2]")

    def initial_from_uniform(self, u):
        return self.init_low + u * (self.init_high - self.init_low)

    def advance(self, x, u):
        y = x.copy()
        y[(x >= 0.5) & (x < 1.0)] = 1.5
        y[x == 1.5] = 0.25
        return y

    def output_batch(self, x):
        return (x[:, 0] >= 1.0).astype(np.int64)

    def params(self):
        return {"init_low": list(self.init_low), "init_high": list(self.init_high)}


class TableDriven(System):
    """Finite-state Markov chain with a labelling of its states."""

    name = "table"
    deterministic = False
    _dtype = np.int64

    def __init__(self, matrix, labels, initial, alphabet=None):
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        if matrix.ndim != 2 or matrix.shape != (n, n):
            raise InvalidArgument("transition table must be square")
        if (matrix < 0).any() or np.abs(matrix.sum(axis=1) - 1.0).max() > NORM_TOL:
            raise InvalidArgument("every row of the transition table must be a probability vector")
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (n,) or (initial < 0).any() or abs(initial.sum() - 1.0) > NORM_TOL:
            raise InvalidArgument("initial distribution must be a probability vector over the states")
        if alphabet is None:
            alphabet = Alphabet(sorted(set(str(lab) for lab in labels)))
        self.alphabet = alphabet
        self.labels = np.array([alphabet.index(str(lab)) for lab in labels], dtype=np.int64)
        if self.labels.shape != (n,):
            raise InvalidArgument("need one label per state")
        self.matrix = matrix
        self.initial = initial
        self._cum = np.cumsum(matrix, axis=1)
        self._cum[:, -1] = 1.0
        self._cum0 = np.cumsum(initial)
        self._cum0[-1] = 1.0

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def initial_from_uniform(self, u):
        return np.searchsorted(self._cum0, u[:, 0], side="right").reshape(-1, 1)

    def advance(self, x, u):
        cum = self._cum[x[:, 0]]
        return (u[:, None] >= cum).sum(axis=1).reshape(-1, 1)

    def output_batch(self, x):
        return self.labels[x[:, 0]]

    def params(self):
        return {"matrix": self.matrix.ravel().tolist(), "labels": [self.alphabet.labels[i] for i in self.labels],
                "initial": self.initial.tolist()}


VARIANTS = {cls.name: cls for cls in (Sturmian, SwitchedLinear, PiecewiseDemo, TableDriven)}


def make_system(variant: str, **params) -> System:
    """Construct a system by variant name; raises InvalidArgument on bad parameters."""
    try:
        cls = VARIANTS[variant.lower()]
    except KeyError:
        raise InvalidArgument(f"unknown system variant {variant!r}; "
                              f"choose from {sorted(VARIANTS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for {variant}: {exc}") from None
