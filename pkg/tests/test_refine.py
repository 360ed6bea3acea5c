import numpy as np
import pytest

from oracles import SQRT2_FRAC, sturmian_factors
from memabs import RefinementConfig, TableDriven, export_partition, run_refinement, simulate
from memabs.core import InvalidArgument
from memabs.systems import PiecewiseDemo, Sturmian


def markov_chain():
    m = np.array([[0.5, 0.5, 0.0], [0.0, 0.3, 0.7], [0.6, 0.0, 0.4]])
    return TableDriven(m, ["a", "b", "c"], [1 / 3, 1 / 3, 1 / 3])


def test_true_markov_chain_stops_at_two():
    cfg = RefinementConfig(markov_chain(), n_traj=2000, length=40, horizon=8, threshold=1e-6, max_memory=5)
    rep = run_refinement(cfg)
    assert rep.final_memory == 2 and rep.termination == "threshold"
    assert rep.record(2).d_prev == 0
    assert [r.ell for r in rep.records] == [1, 2]


def test_piecewise_needs_memory():
    cfg = RefinementConfig(PiecewiseDemo(), n_traj=10_000, length=20, horizon=6, threshold=1e-6, max_memory=5)
    rep = run_refinement(cfg)
    assert rep.record(1).d_next > 1e-6
    assert rep.final_memory in (2, 3)
    assert rep.termination == "threshold"


def test_sturmian_default_run():
    cfg = RefinementConfig(Sturmian(), n_traj=10_000, length=60, horizon=15, threshold=0.01, max_memory=12)
    rep = run_refinement(cfg)
    assert rep.final_memory <= 12
    assert rep.record(rep.final_memory).d_prev <= 0.01


def test_loop_stops_at_first_threshold_and_sweep():
    base = dict(n_traj=3000, length=20, horizon=6, threshold=1e-6, max_memory=5)
    short = run_refinement(RefinementConfig(PiecewiseDemo(), **base))
    full = run_refinement(RefinementConfig(PiecewiseDemo(), sweep=True, **base))
    assert len(short.records) == short.final_memory
    assert len(full.records) == 5 and full.final_memory == short.final_memory


def test_max_memory_termination():
    cfg = RefinementConfig(Sturmian(), n_traj=500, length=40, horizon=15, threshold=1e-9, max_memory=1)
    rep = run_refinement(cfg)
    assert rep.termination == "max_memory" and rep.final_memory == 1


def test_capacity_is_reported():
    cfg = RefinementConfig(Sturmian(), n_traj=500, length=40, horizon=30, threshold=1e-9, max_memory=3,
                           support_cap=50)
    rep = run_refinement(cfg)
    assert rep.termination == "capacity" and rep.capacity_memory == 1 and rep.final_memory is None


def test_resample_per_level():
    cfg = RefinementConfig(PiecewiseDemo(), n_traj=3000, length=20, horizon=6, threshold=1e-6, max_memory=4,
                           resample=True)
    rep = run_refinement(cfg)
    assert rep.final_memory in (2, 3)


@pytest.mark.parametrize("kw", [dict(max_memory=15, horizon=15), dict(horizon=70), dict(threshold=0.0)])
def test_config_validation(kw):
    base = dict(n_traj=10, length=60, horizon=15, threshold=0.01, max_memory=12)
    base.update(kw)
    with pytest.raises(InvalidArgument):
        run_refinement(RefinementConfig(Sturmian(), **base))


def test_partition_memory_one_is_output_map():
    s = Sturmian()
    samples = simulate(s, 500, 30, seed=1, keep_states=True)
    part = export_partition(samples, 1)
    labels = np.array(part.words())
    x = part.points[:, 0]
    assert set(labels) == {"0", "1"}
    assert (labels[x < s.theta] == "0").all() and (labels[x >= s.theta] == "1").all()


def test_partition_memory_two():
    samples = simulate(Sturmian(), 2000, 30, seed=2, keep_states=True)
    part = export_partition(samples, 2)
    assert part.distinct() <= 3
    assert {tuple(int(c) for c in w) for w in part.words()} <= sturmian_factors(2, SQRT2_FRAC)


def test_partition_point_label_consistency():
    s = PiecewiseDemo()
    samples = simulate(s, 3000, 10, seed=4, keep_states=True)
    part = export_partition(samples, 2)
    words = part.words()
    last = s.output_batch(part.points)
    assert all(s.alphabet.index(w[-1]) == c for w, c in zip(words, last))
    at = {w for w, x in zip(words, part.points[:, 0]) if x == 0.25}
    assert "ba" in at


def test_partition_requires_states():
    with pytest.raises(InvalidArgument):
        export_partition(simulate(Sturmian(), 5, 5), 1)


@pytest.mark.parametrize("ell", range(1, 11))
def test_sturmian_cell_count(ell):
    samples = simulate(Sturmian(), 10_000, max(6 * ell, 12), seed=3, keep_states=True)
    assert export_partition(samples, ell).distinct() == ell + 1


def test_run_directory(tmp_path):
    cfg = RefinementConfig(PiecewiseDemo(), n_traj=2000, length=20, horizon=6, threshold=1e-6, max_memory=5,
                           export_partition=True, write_samples=True)
    rep = run_refinement(cfg, tmp_path / "a")
    run_refinement(cfg, tmp_path / "b")
    ell = rep.final_memory
    for name in ("report.csv", "report.json", f"model_{ell}.txt", f"partition_{ell}.csv", "samples.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    labels = {line.rsplit(",", 1)[1] for line in (tmp_path / "a" / f"partition_{ell}.csv").read_text().splitlines()[1:]}
    states = {rep.model.alphabet.render(w) for w in rep.model.state_words()}
    assert labels <= states
