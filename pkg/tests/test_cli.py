import csv
import io

import pytest

from memabs import build_model, distance, read_model, write_model
from memabs.cli import load_config, main
from memabs.sampler import SampleSet
from memabs.systems import PiecewiseDemo

STURMIAN = """
[system]
variant = sturmian
theta = 2.6025805691371464

[sampler]
n_traj = 200
length = 30
seed = 5

[refine]
horizon = 10
threshold = 0.01
max_memory = 6

[output]
directory = {out}
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(STURMIAN.format(out=tmp_path / "run"))
    return path


def test_simulate(cfg, tmp_path):
    assert main(["simulate", str(cfg)]) == 0
    first = (tmp_path / "run" / "samples.txt").read_bytes()
    assert len(first.splitlines()) == 200
    assert main(["simulate", str(cfg)]) == 0
    assert (tmp_path / "run" / "samples.txt").read_bytes() == first
    assert (tmp_path / "run" / "config.cfg").exists()


def test_simulate_memory_too_large(cfg, capsys):
    assert main(["simulate", str(cfg), "--set", "refine.memory=30"]) == 2
    err = capsys.readouterr().err
    assert "memory < length" in err


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[system]\nvariant = sturmian\ntheta = banana\n")
    assert main(["simulate", str(bad)]) == 2
    assert "theta" in capsys.readouterr().err
    bad.write_text("[system]\nvariant = sturmian\n[sampler\nn_traj=3\n")
    assert main(["simulate", str(bad)]) == 2
    assert "line" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == 4


def test_overrides_roundtrip(cfg, tmp_path):
    c = load_config(cfg, ["sampler.n_traj=7", "refine.horizon=9"])
    assert c.n_traj == 7 and c.refine["horizon"] == 9
    echo = tmp_path / "echo.cfg"
    echo.write_text(c.dump())
    again = load_config(echo)
    assert again.n_traj == 7 and again.refine == c.refine and again.system.params() == c.system.params()


def test_build_and_distance(cfg, tmp_path, capsys):
    assert main(["simulate", str(cfg)]) == 0
    assert main(["build", str(cfg), "-m", "2"]) == 0
    assert main(["build", str(cfg), "-m", "4"]) == 0
    m2, m4 = tmp_path / "run" / "model_2.txt", tmp_path / "run" / "model_4.txt"
    capsys.readouterr()
    assert main(["distance", str(m2), str(m2), "-H", "8"]) == 0
    row = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]
    assert float(row["d"]) == 0
    assert main(["distance", str(m2), str(m4), "-H", "3"]) == 2


def test_distance_fixture_models(tmp_path, capsys):
    samples = SampleSet.from_words(PiecewiseDemo().alphabet, ["aaaaaa", "abaaaa", "bbbbbb", "aabbba"])
    m1, m2 = build_model(samples, 1), build_model(samples, 2)
    write_model(m1, tmp_path / "m1.txt")
    write_model(m2, tmp_path / "m2.txt")
    expected = distance(read_model(tmp_path / "m1.txt"), read_model(tmp_path / "m2.txt"), 5)
    (tmp_path / "expected.csv").write_text(expected.csv_header() + "\n" + expected.csv_row() + "\n")
    assert main(["distance", str(tmp_path / "m1.txt"), str(tmp_path / "m2.txt"), "-H", "5"]) == 0
    assert capsys.readouterr().out == (tmp_path / "expected.csv").read_text()


def test_distance_alphabet_mismatch(tmp_path, capsys):
    from memabs import Alphabet
    a = build_model(SampleSet.from_words(Alphabet("ab"), ["abab"]), 1)
    b = build_model(SampleSet.from_words(Alphabet("xy"), ["xyxy"]), 1)
    write_model(a, tmp_path / "a.txt")
    write_model(b, tmp_path / "b.txt")
    assert main(["distance", str(tmp_path / "a.txt"), str(tmp_path / "b.txt"), "-H", "3"]) == 2
    assert "alphabet" in capsys.readouterr().err


def _report(run_dir):
    return list(csv.DictReader(open(run_dir / "report.csv")))


@pytest.mark.parametrize("name", ["sturmian.cfg", "switched.cfg", "piecewise.cfg"])
def test_bundled_refine(name, tmp_path):
    out = tmp_path / name
    assert main(["refine", name, "--set", f"output.directory={out}"]) == 0
    rows = _report(out)
    assert [int(r["ell"]) for r in rows] == list(range(1, len(rows) + 1))
    assert (out / "report.json").exists() and (out / "config.cfg").exists()
    if name == "piecewise.cfg":
        assert float(rows[0]["d_next"]) > 1e-6


def test_refine_capacity_exit(cfg, tmp_path):
    assert main(["refine", str(cfg), "--set", "refine.support_cap=3"]) == 3
    assert (tmp_path / "run" / "report.csv").exists()


def test_export_partition(cfg, tmp_path):
    assert main(["export-partition", str(cfg), "-m", "3"]) == 0
    lines = (tmp_path / "run" / "partition_3.csv").read_text().splitlines()
    assert lines[0] == "x0,label" and len(lines) == 1 + 200 * 28
    assert len({ln.split(",")[1] for ln in lines[1:]}) == 4


def test_writes_stay_in_output_dir(cfg, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    before = {p for p in tmp_path.rglob("*")}
    assert main(["refine", str(cfg)]) == 0
    new = {p for p in tmp_path.rglob("*")} - before
    assert new and all(p == tmp_path / "run" or (tmp_path / "run") in p.parents for p in new)


def test_bundled_name_without_extension(tmp_path):
    out = tmp_path / "p"
    assert main(["simulate", "piecewise", "--set", f"output.directory={out}"]) == 0
    assert (out / "samples.txt").exists()
