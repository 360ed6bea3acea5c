import numpy as np
import pytest

from memabs import Alphabet, SampleSet, TableDriven, build_model, simulate

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def ab():
    return Alphabet("ab")


def words(alphabet, *ws):
    return SampleSet.from_words(alphabet, list(ws))


def random_chain(rng, n_states=3, n_labels=2, density=0.7):
    """Random labelled Markov chain with every row nonempty."""
    m = rng.random((n_states, n_states)) * (rng.random((n_states, n_states)) < density)
    for i in range(n_states):
        if m[i].sum() == 0:
            m[i, rng.integers(n_states)] = 1.0
    m /= m.sum(axis=1, keepdims=True)
    labels = [str(i % n_labels) for i in range(n_states)]
    return TableDriven(m, labels, np.full(n_states, 1.0 / n_states), Alphabet([str(i) for i in range(n_labels)]))


def random_model(seed, memory=1, n_traj=6, length=9):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, n_states=int(rng.integers(2, 5)), n_labels=int(rng.integers(2, 4)))
    samples = simulate(chain, n_traj, length, seed=seed)
    return build_model(samples, memory)
