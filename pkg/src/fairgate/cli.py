"""Command-line entry point.

::

    fairgate validate --scenario default.yaml
    fairgate run --scenario default.yaml --controllers none,gating,prop-qb,maxmin-qb \\
                 --seeds 0-9 --out results --jobs 4

``run`` writes one trace CSV per (controller, seed) under ``<out>/traces``
and then ``fairness_report.csv`` and ``nfd_points.csv`` under ``<out>``.
Nothing is written unless every run succeeds.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .controllers import CONTROLLERS
from .metrics import write_reports
from .plant import run, write_trace_csv
from .scenario import ScenarioError, builtin_path, load_scenario


@dataclass(frozen=True)
class RunConfig:
    scenario_path: Path
    controllers: tuple[str, ...]
    seeds: tuple[int, ...]
    output_dir: Path
    parallelism: int = 1

    def __post_init__(self):
        if not self.controllers:
            raise ValueError("no controllers given")
        bad = [c for c in self.controllers if c not in CONTROLLERS]
        if bad:
            raise ValueError(f"unknown controller(s) {', '.join(bad)}; choose from {', '.join(CONTROLLERS)}")
        if not self.seeds:
            raise ValueError("no seeds given")
        if self.parallelism < 1:
            raise ValueError("--jobs must be >= 1")


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0,3,5-7"`` -> ``(0, 3, 5, 6, 7)``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    if any(s < 0 for s in seeds):
        raise ValueError("seeds must be non-negative")
    return tuple(dict.fromkeys(seeds))


def resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if not path.exists() and path.suffix == "" and builtin_path(arg).exists():
        return builtin_path(arg)
    return path


def _one_run(job):
    path, controller, seed = job
    return controller, seed, run(load_scenario(path), controller, seed)


def run_experiments(config: RunConfig):
    """Run every (controller, seed) pair and write traces and reports."""
    spec = load_scenario(config.scenario_path)
    jobs = [(config.scenario_path, c, s) for c in config.controllers for s in config.seeds]
    results = {}
    if config.parallelism == 1:
        for job in jobs:
            try:
                c, s, tr = _one_run(job)
            except Exception as exc:
                raise RuntimeError(f"run {job[1]} seed {job[2]} failed: {exc}") from exc
            results[(c, s)] = tr
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            futures = {job: pool.submit(_one_run, job) for job in jobs}
            for job, fut in futures.items():
                try:
                    c, s, tr = fut.result()
                except Exception as exc:
                    raise RuntimeError(f"run {job[1]} seed {job[2]} failed: {exc}") from exc
                results[(c, s)] = tr

    traces = {c: [results[(c, s)] for s in config.seeds] for c in config.controllers}
    out = config.output_dir
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for c in config.controllers:
        for s in config.seeds:
            write_trace_csv(results[(c, s)], out / "traces" / f"{c}_seed{s}.csv")
    return write_reports(traces, spec, out)


def cmd_validate(args) -> int:
    path = resolve_scenario(args.scenario)
    try:
        spec = load_scenario(path)
    except ScenarioError as exc:
        print(f"INVALID {path}: {exc}")
        return 1
    print(f"VALID {path}: {len(spec.zones)} zones, {len(spec.gates)} gates, "
          f"t_c={spec.controller.t_c:g} s, horizon={spec.horizon:g} s")
    return 0


def cmd_run(args, parser) -> int:
    try:
        config = RunConfig(
            scenario_path=resolve_scenario(args.scenario),
            controllers=tuple(c.strip() for c in args.controllers.split(",") if c.strip()),
            seeds=parse_seeds(args.seeds),
            output_dir=Path(args.out),
            parallelism=args.jobs,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        load_scenario(config.scenario_path)
    except ScenarioError as exc:
        print(f"error: {config.scenario_path}: {exc}", file=sys.stderr)
        return 1
    try:
        fair, nfd = run_experiments(config)
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {fair} and {nfd}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairgate", description="Perimeter control with queue balancing.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True, help="scenario YAML path or builtin name")

    r = sub.add_parser("run", help="sweep controllers and seeds, write CSV reports")
    r.add_argument("--scenario", required=True, help="scenario YAML path or builtin name")
    r.add_argument("--controllers", default=",".join(CONTROLLERS),
                   help=f"comma-separated subset of {','.join(CONTROLLERS)}")
    r.add_argument("--seeds", default="0", help="e.g. 0-9 or 1,2,5")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=int, default=1, help="parallel runs")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_run(args, parser)


if __name__ == "__main__":
    sys.exit(main())
