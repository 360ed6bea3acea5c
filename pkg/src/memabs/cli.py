"""Command-line front end.

    memabs simulate CONFIG          sample trajectories -> samples.txt
    memabs build CONFIG -m L        memory-L model from samples.txt -> model_L.txt
    memabs distance M1 M2 -H h      d_h between two model files, CSV on stdout
    memabs refine CONFIG            full refinement run -> report.csv, report.json, model, partition
    memabs export-partition CONFIG  sampled states with their trailing L-word -> partition_L.csv

Exit codes: 0 success, 2 config error, 3 capacity error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .abstraction import build_model, read_model, write_model
from .core import CapacityError, InvalidArgument
from .metrics import DistanceReport, distance
from .refine import RefinementConfig, export_partition, run_refinement
from .sampler import SampleSet, simulate
from .systems import System, make_system

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("memabs")


class ConfigError(InvalidArgument):
    pass


# value kinds per system variant
SYSTEM_KEYS = {
    "sturmian": {"theta": float, "init_low": float, "init_high": float},
    "switched": {"a1": "floats", "a2": "floats", "p": float, "init_low": "floats", "init_high": "floats"},
    "piecewise": {"init_low": float, "init_high": float},
    "table": {"matrix": "floats", "labels": "words", "initial": "floats"},
}
SAMPLER_KEYS = {"n_traj": int, "length": int, "seed": int, "keep_states": bool}
REFINE_KEYS = {"horizon": int, "threshold": float, "max_memory": int, "memory": int, "method": str,
               "n_mc": int, "export_partition": bool, "write_samples": bool, "resample": bool,
               "sweep": bool, "support_cap": int}
SECTIONS = {"sampler": SAMPLER_KEYS, "refine": REFINE_KEYS, "output": {"directory": str}}


@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    system: System
    n_traj: int
    length: int
    seed: int
    keep_states: bool
    refine: dict
    out_dir: Path
    source: str

    @property
    def memory(self) -> int:
        return self.refine.get("memory", self.refine.get("max_memory", 1))

    def refinement(self, workers: int = 1) -> RefinementConfig:
        kw = {k: v for k, v in self.refine.items() if k != "memory"}
        kw.setdefault("max_memory", min(self.length - 1, 12))
        kw.setdefault("horizon", self.length)
        return RefinementConfig(system=self.system, n_traj=self.n_traj, length=self.length,
                                seed=self.seed, workers=workers, **kw)

    def dump(self) -> str:
        import io
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "yes", "no", "true", "false", "on", "off"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("1", "yes", "true", "on")
        if kind == "floats":
            return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        if kind == "words":
            return [v.strip() for v in raw.split(",") if v.strip()]
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw}: {exc}") from None


def bundled_config(name: str) -> Path | None:
    base = resources.files("memabs") / "configs"
    for candidate in (name, name + ".cfg"):
        ref = base / candidate
        if ref.is_file():
            return Path(str(ref))
    return None


def load_config(path, overrides=()) -> RunConfig:
    path = Path(path)
    if not path.exists():
        found = bundled_config(path.name)
        if found is None:
            raise FileNotFoundError(f"config file not found: {path}")
        path = found
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option.strip(), value.strip())
    return resolve(parser, str(path))


def resolve(parser: configparser.ConfigParser, source: str = "<config>") -> RunConfig:
    if not parser.has_section("system") or not parser.has_option("system", "variant"):
        raise ConfigError(f"{source}: missing [system] variant")
    variant = parser.get("system", "variant").strip().lower()
    if variant not in SYSTEM_KEYS:
        raise ConfigError(f"{source}: [system] variant = {variant}: unknown, choose from {sorted(SYSTEM_KEYS)}")
    params = {}
    for key, raw in parser.items("system"):
        if key == "variant":
            continue
        if key not in SYSTEM_KEYS[variant]:
            raise ConfigError(f"{source}: [system] {key}: unknown key for variant {variant}")
        params[key] = _convert("system", key, raw, SYSTEM_KEYS[variant][key])
    if variant == "table" and "matrix" in params:
        m = np.array(params["matrix"])
        n = int(round(np.sqrt(len(m))))
        if n * n != len(m):
            raise ConfigError(f"{source}: [system] matrix: {len(m)} entries is not a square table")
        params["matrix"] = m.reshape(n, n)
    if variant == "switched":
        for key in ("a1", "a2"):
            if key in params and len(params[key]) != 4:
                raise ConfigError(f"{source}: [system] {key}: expected 4 row-major entries")
    try:
        system = make_system(variant, **params)
    except InvalidArgument as exc:
        raise ConfigError(f"{source}: [system] {exc}") from None

    values = {}
    for section, keys in SECTIONS.items():
        values[section] = {}
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"{source}: [{section}] {key}: unknown key")
            values[section][key] = _convert(section, key, raw, keys[key])
    for section in parser.sections():
        if section not in SECTIONS and section != "system":
            raise ConfigError(f"{source}: unknown section [{section}]")
    s = values["sampler"]
    cfg = RunConfig(
        parser=parser, system=system, n_traj=s.get("n_traj", 1000), length=s.get("length", 50),
        seed=s.get("seed", 0), keep_states=s.get("keep_states", False), refine=values["refine"],
        out_dir=Path(values["output"].get("directory", f"runs/{variant}")), source=source,
    )
    _check_constraints(cfg)
    return cfg


def _check_constraints(cfg: RunConfig) -> None:
    if cfg.n_traj < 1 or cfg.length < 1:
        raise ConfigError(f"{cfg.source}: [sampler] need n_traj >= 1 and length >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"{cfg.source}: [sampler] seed must lie in [0, 2**64)")
    r = cfg.refine
    if "memory" in r and not 1 <= r["memory"] < cfg.length:
        raise ConfigError(f"{cfg.source}: [refine] memory = {r['memory']}: need 1 <= memory < length "
                          f"(length = {cfg.length})")
    if "max_memory" in r and not 1 <= r["max_memory"] < cfg.length:
        raise ConfigError(f"{cfg.source}: [refine] max_memory = {r['max_memory']}: need 1 <= max_memory < "
                          f"length (length = {cfg.length})")
    try:
        cfg.refinement().validate()
    except InvalidArgument as exc:
        raise ConfigError(f"{cfg.source}: [refine] {exc}") from None


def _prepare_out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "config.cfg").write_text(cfg.dump())
    return cfg.out_dir


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set)
    keep = cfg.keep_states or args.states
    samples = simulate(cfg.system, cfg.n_traj, cfg.length, cfg.seed, keep_states=keep, workers=args.threads)
    out = _prepare_out(cfg)
    samples.write(out / "samples.txt")
    if keep:
        samples.write_states(out / "states.csv")
    log.info("wrote %d words of %d letters to %s", cfg.n_traj, cfg.length, out / "samples.txt")
    return EXIT_OK


def _load_or_simulate(cfg: RunConfig, path, threads: int) -> SampleSet:
    path = Path(path) if path else cfg.out_dir / "samples.txt"
    if path.exists():
        return SampleSet.read(path, cfg.system.alphabet)
    return simulate(cfg.system, cfg.n_traj, cfg.length, cfg.seed, workers=threads)


def cmd_build(args) -> int:
    cfg = load_config(args.config, args.set)
    memory = args.memory or cfg.memory
    samples = _load_or_simulate(cfg, args.samples, args.threads)
    model = build_model(samples, memory)
    out = _prepare_out(cfg)
    write_model(model, out / f"model_{memory}.txt")
    log.info("memory-%d model: %d states, %d transitions", memory, model.n_states, model.n_transitions)
    return EXIT_OK


def cmd_distance(args) -> int:
    m1, m2 = read_model(args.model1), read_model(args.model2)
    report = distance(m1, m2, args.horizon, args.method, n_samples=args.n_samples, seed=args.seed)
    print(DistanceReport.csv_header())
    print(report.csv_row())
    return EXIT_OK


def cmd_refine(args) -> int:
    cfg = load_config(args.config, args.set)
    out = _prepare_out(cfg)
    report = run_refinement(cfg.refinement(args.threads), out)
    log.info("stopped at memory %s (%s)", report.final_memory, report.termination)
    if report.termination == "capacity":
        print(f"capacity limit at memory {report.capacity_memory}: {report.message}", file=sys.stderr)
        return EXIT_CAPACITY
    return EXIT_OK


def cmd_export_partition(args) -> int:
    cfg = load_config(args.config, args.set)
    memory = args.memory or cfg.memory
    if not 1 <= memory <= cfg.length:
        raise ConfigError(f"memory = {memory}: need 1 <= memory <= length (length = {cfg.length})")
    samples = simulate(cfg.system, cfg.n_traj, cfg.length, cfg.seed, keep_states=True, workers=args.threads)
    out = _prepare_out(cfg)
    export_partition(samples, memory).write(out / f"partition_{memory}.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memabs", description=__doc__.splitlines()[0] if __doc__ else None,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--threads", type=int, default=1, help="worker cap for sampling (0 = auto)")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="INI config file, or the name of a bundled config")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a scalar config key")
        p.set_defaults(func=func)
        return p

    p = with_config("simulate", cmd_simulate, "sample trajectories")
    p.add_argument("--states", action="store_true", help="also write states.csv")
    p = with_config("build", cmd_build, "build a memory model from samples")
    p.add_argument("-m", "--memory", type=int)
    p.add_argument("--samples", help="samples file (default: <output>/samples.txt, else simulate)")
    with_config("refine", cmd_refine, "run the refinement loop")
    p = with_config("export-partition", cmd_export_partition, "label sampled states by trailing words")
    p.add_argument("-m", "--memory", type=int)

    p = sub.add_parser("distance", help="d_h between two model files")
    p.add_argument("model1")
    p.add_argument("model2")
    p.add_argument("-H", "--horizon", type=int, required=True, help="horizon in letters")
    p.add_argument("--method", default="exact", choices=["exact", "monte-carlo"])
    p.add_argument("--n-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_distance)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
