"""Command-line front end: ``fmcwspoof run`` and ``fmcwspoof validate``.

Exit codes: 0 success, 1 simulation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .countermeasures import MODES
from .errors import ConfigurationError, SimulationError
from .scenario import BUILTIN_SCENARIOS, ScenarioResult, ScenarioSpec, run_scenario

log = logging.getLogger("fmcwspoof")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

RAW_COLUMNS = (
    "trial",
    "frame_index",
    "time_s",
    "dropout",
    "range_m",
    "velocity_mps",
    "beat_freq_hz",
    "valid_chirps",
    "phase_step_circvar",
    "phase_alarm",
    "rssi_score_db",
    "rssi_flag",
)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    scenario: str
    config_path: str | None
    seed: int
    output_dir: str
    files: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.12g}"


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_document(path: str | Path) -> dict:
    """Read a YAML config file into a mapping."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise UsageError(f"{path} must hold a mapping at top level")
    return doc


def resolve_document(scenario: str, config: str | None = None) -> tuple[dict, str | None]:
    """Scenario description as a plain mapping, before any CLI overrides.

    ``scenario`` is a built-in name or a path to a YAML file; ``config``
    optionally layers a partial YAML file on top.
    """
    config_path = None
    if scenario in BUILTIN_SCENARIOS:
        doc = BUILTIN_SCENARIOS[scenario]().to_dict()
    elif Path(scenario).is_file():
        config_path = scenario
        doc = load_document(scenario)
        base_name = doc.pop("base", None)
        if base_name is not None:
            if base_name not in BUILTIN_SCENARIOS:
                raise UsageError(f"unknown base scenario {base_name!r}")
            doc = _merge(BUILTIN_SCENARIOS[base_name]().to_dict(), doc)
    else:
        known = ", ".join(BUILTIN_SCENARIOS)
        raise UsageError(f"unknown scenario {scenario!r} (built-ins: {known}; or give a config path)")
    if config is not None:
        config_path = config
        doc = _merge(doc, load_document(config))
    return doc, config_path


def write_raw_csv(result: ScenarioResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        for i, trial in enumerate(result.trials):
            for j, m in enumerate(trial.measurements):
                t = result.times_s[j]
                if m is None:
                    row = [i, j, t, True] + [math.nan] * 5 + [False, math.nan, False]
                else:
                    row = [
                        i,
                        j,
                        t,
                        False,
                        m.range_m,
                        m.velocity_mps,
                        m.beat_freq_hz,
                        m.n_valid,
                        m.phase_step_circvar,
                        trial.phase_alarms[j],
                        trial.rssi_scores[j],
                        trial.rssi_flags[j],
                    ]
                writer.writerow([_fmt(x) for x in row])


def write_aggregate_csv(result: ScenarioResult, path: Path) -> None:
    cols = result.aggregate_columns()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for j in range(result.times_s.size):
            writer.writerow([_fmt(values[j]) for values in cols.values()])


def cmd_run(args) -> int:
    doc, config_path = resolve_document(args.scenario, args.config)
    seed = args.seed if args.seed is not None else int(doc.pop("seed", 0))
    doc.pop("seed", None)
    if args.trials is not None:
        doc["trials"] = args.trials
    if args.countermeasure is not None:
        doc["countermeasure"] = _merge(doc.get("countermeasure") or {}, {"mode": args.countermeasure})
    if args.backend is not None:
        doc["backend"] = args.backend
    try:
        spec = ScenarioSpec.from_dict(doc)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc

    out = Path(args.out) if args.out else Path("runs") / f"{spec.name}-seed{seed}"
    out.mkdir(parents=True, exist_ok=True)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{spec.name}: trial {done}/{total}", end="" if done < total else "\n", file=sys.stderr)

    start = time.perf_counter()
    result = run_scenario(spec, seed, workers=args.workers, progress=progress)
    elapsed = time.perf_counter() - start

    manifest = RunManifest(spec.name, config_path, seed, str(out))
    resolved = dict(spec.to_dict(), seed=seed)
    targets = {
        "measurements.csv": lambda p: write_raw_csv(result, p),
        "aggregate.csv": lambda p: write_aggregate_csv(result, p),
        "config.yaml": lambda p: p.write_text(yaml.safe_dump(resolved, sort_keys=False)),
    }
    for name, writer in targets.items():
        writer(out / name)
        manifest.files.append(name)
    manifest.files.append("manifest.json")
    manifest.wall_clock_s = elapsed
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")

    if not args.quiet:
        drops = int(result.dropout_count.sum())
        print(f"{spec.name}: {spec.trials} trials x {spec.n_steps} frames in {elapsed:.1f} s, {drops} dropouts")
        print(f"wrote {', '.join(manifest.files)} to {out}")
    return EXIT_OK


def collect_violations(doc: dict) -> list[str]:
    """Every invariant the scenario described by ``doc`` breaks (empty if valid)."""
    doc = dict(doc)
    doc.pop("seed", None)
    base_name = doc.pop("base", None)
    if base_name is not None:
        if base_name not in BUILTIN_SCENARIOS:
            return [f"unknown base scenario {base_name!r}"]
        doc = _merge(BUILTIN_SCENARIOS[base_name]().to_dict(), doc)
    try:
        spec = ScenarioSpec.from_dict(doc, check=False)
    except ConfigurationError as exc:
        return [str(exc)]
    return spec.violations()


def cmd_validate(args) -> int:
    doc = load_document(args.config)
    problems = collect_violations(doc)
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return EXIT_FAILURE
    print(f"{args.config}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmcwspoof", description="FMCW radar spoofing simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV results")
    run.add_argument("scenario", help=f"built-in name ({', '.join(BUILTIN_SCENARIOS)}) or YAML config path")
    run.add_argument("--seed", type=int, default=None, help="top-level seed (default: config value or 0)")
    run.add_argument("--out", help="output directory (default: runs/<name>-seed<seed>)")
    run.add_argument("--config", help="YAML file whose keys override the scenario")
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--countermeasure", choices=MODES, help="victim countermeasure")
    run.add_argument("--backend", choices=("spectral", "samples"), help="simulation backend")
    run.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    run.add_argument("--quiet", action="store_true", help="no progress output")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a YAML config against all invariants")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
