"""Iterative memory refinement: grow ℓ until successive abstractions agree at horizon h."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .abstraction import DEFAULT_SUPPORT_CAP, MemoryMarkovModel, build_model, write_model
from .core import Alphabet, CapacityError, InvalidArgument, window_codes
from .metrics import distance, empirical_behavior
from .sampler import SampleSet, simulate
from .systems import System

REPORT_FIELDS = ("ell", "d_prev", "d_next", "d_horizon", "n_states", "n_transitions", "support")


@dataclass
class RefinementConfig:
    system: System
    n_traj: int = 10_000
    length: int = 60
    horizon: int = 15
    threshold: float = 0.01
    max_memory: int = 12
    seed: int = 0
    method: str = "exact"
    n_mc: int = 100_000
    export_partition: bool = False
    write_samples: bool = False
    resample: bool = False
    sweep: bool = False
    support_cap: int = DEFAULT_SUPPORT_CAP
    workers: int = 1

    def validate(self) -> None:
        if not 1 <= self.max_memory < self.horizon <= self.length:
            raise InvalidArgument(
                f"need 1 <= max_memory < horizon <= length, got max_memory={self.max_memory}, "
                f"horizon={self.horizon}, length={self.length}")
        if not self.threshold > 0:
            raise InvalidArgument(f"threshold must be positive, got {self.threshold}")
        if self.n_traj < 1:
            raise InvalidArgument("n_traj must be >= 1")


@dataclass
class LevelRecord:
    ell: int
    d_prev: float | None = None
    d_next: float | None = None
    d_horizon: float | None = None
    n_states: int = 0
    n_transitions: int = 0
    support: int | None = None
    wall_time: float = 0.0


@dataclass
class RefinementReport:
    records: list[LevelRecord] = field(default_factory=list)
    final_memory: int | None = None
    termination: str = ""
    capacity_memory: int | None = None
    message: str = ""
    model: MemoryMarkovModel | None = None
    samples: SampleSet | None = None

    def record(self, ell: int) -> LevelRecord:
        return self.records[ell - 1]

    def red_curve(self) -> dict[int, float]:
        return {r.ell: r.d_next for r in self.records if r.d_next is not None}

    def blue_curve(self) -> dict[int, float]:
        return {r.ell: r.d_horizon for r in self.records if r.d_horizon is not None}

    def csv(self) -> str:
        rows = [",".join(REPORT_FIELDS)]
        for r in self.records:
            rows.append(",".join("" if getattr(r, k) is None else repr(getattr(r, k)) for k in REPORT_FIELDS))
        return "\n".join(rows) + "\n"

    def as_dict(self) -> dict:
        return {
            "final_memory": self.final_memory,
            "termination": self.termination,
            "capacity_memory": self.capacity_memory,
            "message": self.message,
            "records": [{k: getattr(r, k) for k in REPORT_FIELDS} for r in self.records],
        }


@dataclass
class PartitionExport:
    """Sampled states paired with the ℓ-word that ends at them."""

    alphabet: Alphabet
    memory: int
    points: np.ndarray
    labels: np.ndarray

    def words(self) -> list[str]:
        from .core import decode_codes
        uniq, inv = np.unique(self.labels, return_inverse=True)
        rendered = [self.alphabet.render(w) for w in decode_codes(uniq, len(self.alphabet), self.memory)]
        return [rendered[i] for i in inv.ravel()]

    def distinct(self) -> int:
        return len(np.unique(self.labels))

    def write(self, path) -> None:
        dim = self.points.shape[1]
        lines = [",".join([f"x{j}" for j in range(dim)] + ["label"])]
        cols = [[repr(v) for v in self.points[:, j].tolist()] for j in range(dim)]
        for i, word in enumerate(self.words()):
            lines.append(",".join([c[i] for c in cols] + [word]))
        Path(path).write_text("\n".join(lines) + "\n")


def export_partition(samples: SampleSet, memory: int) -> PartitionExport:
    """Pair each sampled state x_k (k >= ℓ-1) with its trailing ℓ-word y_{k-ℓ+1..k}."""
    if samples.states is None:
        raise InvalidArgument("partition export needs a sample set that retains states")
    if not 1 <= memory <= samples.length:
        raise InvalidArgument(f"memory must lie in [1, L={samples.length}], got {memory}")
    labels = window_codes(samples.letters, memory, len(samples.alphabet)).ravel()
    points = samples.states[:, memory - 1:, :].reshape(-1, samples.states.shape[2])
    return PartitionExport(samples.alphabet, memory, points.astype(float), labels)


def _resample_seed(seed: int, ell: int) -> int:
    return int(np.random.SeedSequence([seed, ell]).generate_state(1, np.uint64)[0])


def run_refinement(config: RefinementConfig, out_dir=None) -> RefinementReport:
    """Build Σ_1, Σ_2, ... and stop once d_h(Σ_{ℓ-1}, Σ_ℓ) <= threshold or ℓ = max_memory.

    Each level also records d_h(Σ_ℓ, Σ_h), the distance to the empirical
    h-letter behaviour. With ``sweep`` the loop keeps going to max_memory
    for full curves; the final model is still the first level under threshold.
    """
    config.validate()
    h = config.horizon

    def draw(seed):
        return simulate(config.system, config.n_traj, config.length, seed,
                        keep_states=config.export_partition, workers=config.workers)

    def dist(a, b):
        return distance(a, b, h, config.method, n_samples=config.n_mc, seed=config.seed,
                        cap=config.support_cap)

    report = RefinementReport()
    samples = draw(config.seed)
    final_samples = samples
    behavior = empirical_behavior(samples, h)
    prev, final = None, None
    for ell in range(1, config.max_memory + 1):
        start = time.perf_counter()
        if config.resample and ell > 1:
            samples = draw(_resample_seed(config.seed, ell))
            behavior = empirical_behavior(samples, h)
        rec = LevelRecord(ell)
        try:
            model = build_model(samples, ell)
            rec.n_states, rec.n_transitions = model.n_states, model.n_transitions
            blue = dist(model, behavior)
            rec.d_horizon, rec.support = blue.d, blue.support1
            if prev is not None:
                red = dist(prev, model).d
                rec.d_prev = red
                report.records[-1].d_next = red
        except CapacityError as exc:
            rec.wall_time = time.perf_counter() - start
            report.records.append(rec)
            report.capacity_memory = ell
            report.message = str(exc)
            if final is None:
                report.termination = "capacity"
                final = (ell - 1, prev, final_samples) if prev is not None else None
            break
        rec.wall_time = time.perf_counter() - start
        report.records.append(rec)
        if final is None and prev is not None and rec.d_prev <= config.threshold:
            report.termination = "threshold"
            final = (ell, model, samples)
            if not config.sweep:
                break
        prev, final_samples = model, samples
    if final is None and report.termination != "capacity":
        report.termination = "max_memory"
        final = (prev.memory, prev, final_samples)
    if final is not None:
        report.final_memory, report.model, report.samples = final
    if out_dir is not None:
        write_run(report, config, out_dir)
    return report


def write_run(report: RefinementReport, config: RefinementConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.csv())
    (out / "report.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    timing = ["ell,wall_time"] + [f"{r.ell},{r.wall_time!r}" for r in report.records]
    (out / "timing.csv").write_text("\n".join(timing) + "\n")
    if report.model is None:
        return
    ell = report.final_memory
    write_model(report.model, out / f"model_{ell}.txt")
    if config.export_partition:
        export_partition(report.samples, ell).write(out / f"partition_{ell}.csv")
    if config.write_samples:
        report.samples.write(out / "samples.txt")
