"""``nbbmap`` command line: verify, bench, render.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 resource error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import imaging, sim, verify
from .blockmap import IntraBlockStrategy
from .errors import ConfigError, NBBError, ResourceError
from .fractal import FractalSpec, get_spec, side

log = logging.getLogger("nbbmap")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
EMBED_CELL_CAP = 1 << 24
BENCH_COLUMNS = sim.CSV_FIELDS + ("workload", "n", "quotient", "quotient_weighted", "checksum")


@dataclass
class ExperimentPlan:
    spec: FractalSpec
    workloads: tuple[str, ...] = ("sw",)
    rmin: int = 0
    rmax: int = 8
    rhos: tuple[int, ...] = (1,)
    modes: tuple[str, ...] = ("bb", "lambda")
    strategy: str = "subbox"
    backend: str = "direct"
    repetitions: int = 1
    seed: int = 0
    workers: int = 1
    ca_steps: int = 1
    timing: bool = False
    rcap: Optional[int] = None

    def __post_init__(self):
        if self.rmin < 0 or self.rmax < self.rmin:
            raise ConfigError(f"empty r range {self.rmin}..{self.rmax}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        for w in self.workloads:
            if w not in ("sw", "rd", "ca"):
                raise ConfigError(f"unknown workload {w!r}")
        IntraBlockStrategy.parse(self.strategy)
        sim._parse(sim.Backend, self.backend)
        if self.rcap is None:
            self.rcap = default_rcap(self.spec)
        if self.rmax > self.rcap:
            raise ResourceError(f"r={self.rmax} exceeds the embedded-grid cap {self.rcap} (raise with --rcap)")


def default_rcap(spec: FractalSpec) -> int:
    """Largest level whose embedding stays within ``EMBED_CELL_CAP`` cells (12 for the gasket)."""
    r = 0
    while side(spec, r + 1) ** 2 <= EMBED_CELL_CAP:
        r += 1
    return r


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _run_workload(config: sim.DispatchConfig, workload: str, seed: int, ca_steps: int, workers: int):
    """Run one workload; returns ``(report, checksum)``."""
    if workload == "sw":
        grid, report = sim.run_single_write(config, workers=workers)
        return report, int(grid.data.sum())
    grid_seed = int(np.random.SeedSequence([seed, config.r]).generate_state(1)[0])
    if workload == "rd":
        grid = sim.Grid.random(config.spec, config.r, grid_seed, high=1000)
        value, report = sim.run_reduction(config, grid, workers=workers)
        return report, value
    grid = sim.Grid.random(config.spec, config.r, grid_seed)
    reports = sim.run_ca(config, grid, ca_steps, workers=workers)
    return reports[-1], int(grid.data.sum())


def _measure(config, plan: ExperimentPlan, workload: str):
    reports = []
    checksum = None
    for _ in range(plan.repetitions):
        report, checksum = _run_workload(config, workload, plan.seed, plan.ca_steps, plan.workers)
        reports.append(report)
    report = reports[0]
    report.micros = int(np.mean([r.micros for r in reports]))
    return report, checksum


def bench_rows(plan: ExperimentPlan):
    """Yield one row (list of values in ``BENCH_COLUMNS`` order) per measurement."""
    spec = plan.spec
    for r in range(plan.rmin, plan.rmax + 1):
        for rho in plan.rhos:
            try:
                configs = {
                    "bb": sim.DispatchConfig(spec, r, rho, "bb", plan.strategy, plan.backend),
                    "lambda": sim.DispatchConfig(spec, r, rho, "lambda", plan.strategy, plan.backend),
                }
            except ConfigError as exc:
                log.info("skipping r=%d rho=%d: %s", r, rho, exc)
                continue
            for workload in plan.workloads:
                measured = {mode: _measure(cfg, plan, workload) for mode, cfg in configs.items()}
                bb, lam = measured["bb"][0], measured["lambda"][0]
                quotient = sim.work_quotient(bb, lam)
                weighted = sim.work_quotient(bb, lam, weighted=True)
                for mode in plan.modes:
                    report, checksum = measured[mode]
                    yield report.csv_row(timing=plan.timing) + [
                        workload, side(spec, r), f"{quotient:.6f}", f"{weighted:.6f}", checksum,
                    ]


def write_bench(plan: ExperimentPlan, out: Optional[Path], fmt: str = "csv") -> int:
    rows = list(bench_rows(plan))
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        if fmt == "dat":
            fh.write("# " + " ".join(BENCH_COLUMNS) + "\n")
            for row in rows:
                fh.write(" ".join(str(v) for v in row) + "\n")
        else:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(BENCH_COLUMNS)
            writer.writerows(rows)
    finally:
        if out:
            fh.close()
    return len(rows)


def cmd_verify(args) -> int:
    spec = get_spec(args.spec)
    results = verify.run_suite(spec, args.rmax)
    width = max(len(r.name) for r in results)
    print(f"verify {spec.name} rmax={args.rmax}")
    for res in results:
        print(f"  {res.name:<{width}}  {'PASS' if res.ok else 'FAIL'}  {res.detail}")
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_bench(args) -> int:
    modes = ("bb", "lambda") if args.mode == "both" else (args.mode,)
    plan = ExperimentPlan(
        spec=get_spec(args.spec), workloads=tuple(args.workload.split(",")),
        rmin=args.rmin, rmax=args.rmax, rhos=args.rho, modes=modes,
        strategy=args.strategy, backend=args.backend, repetitions=args.reps,
        seed=args.seed, workers=args.workers, ca_steps=args.ca_steps,
        timing=args.timing, rcap=args.rcap,
    )
    try:
        count = write_bench(plan, Path(args.out) if args.out else None, args.format)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("wrote %d rows", count)
    return EXIT_OK


def cmd_render(args) -> int:
    spec = get_spec(args.spec)
    rcap = default_rcap(spec) if args.rcap is None else args.rcap
    if args.r > rcap:
        raise ResourceError(f"r={args.r} exceeds the render cap {rcap}")
    out = Path(args.out) if args.out else Path(f"{spec.name}_r{args.r}_{args.what}.{'pbm' if args.what == 'fractal' else 'pgm'}")
    if args.what == "fractal":
        imaging.write_pbm(out, imaging.render_fractal(spec, args.r), plain=not args.binary)
    elif args.what == "packing":
        imaging.write_pgm(out, imaging.render_packing(spec, args.r), maxval=spec.k, plain=not args.binary)
    else:
        imaging.write_pgm(out, imaging.render_mapping(spec, args.r), maxval=2, plain=not args.binary)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbbmap", description="Block-space thread maps for NBB fractals.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", default="sierpinski", help="built-in name or spec file")
    common.add_argument("--rcap", type=int, default=None,
                        help="largest embedded level allowed (default: 16M-cell embedding)")

    p = sub.add_parser("verify", parents=[common], help="run the oracle suite")
    p.add_argument("--rmax", type=int, default=6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", parents=[common], help="sweep r and rho, emit work counters")
    p.add_argument("--workload", default="sw", help="sw, rd, ca or a comma list")
    p.add_argument("--rmin", type=int, default=0)
    p.add_argument("--rmax", type=int, default=8)
    p.add_argument("--rho", type=_int_list, default=(1,), help="comma list, e.g. 1,2,4,8")
    p.add_argument("--mode", choices=("bb", "lambda", "both"), default="both")
    p.add_argument("--strategy", choices=[s.value for s in IntraBlockStrategy], default="subbox")
    p.add_argument("--backend", choices=[b.value for b in sim.Backend], default="direct")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ca-steps", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical output)")
    p.add_argument("--format", choices=("csv", "dat"), default="csv", help="dat = whitespace columns for gnuplot")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", parents=[common], help="write fractal / packing / mapping images")
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--what", choices=("fractal", "packing", "mapping"), default="fractal")
    p.add_argument("--binary", action="store_true", help="raw P4/P5 instead of plain P1/P2")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NBBError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
