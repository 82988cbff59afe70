"""Command-line experiment runner."""

from __future__ import annotations

import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .metrics import aggregate, anchor_segments, decompose, format_comparison, format_summary, timeline_rows
from .metrics.latency import LatencySummary
from .output_manager import OutputManager
from .protocol.modes import PROTOCOLS
from .sim import Scenario, ScenarioError, load_scenario, run
from .sim.trace import RunTrace
from .verify import OracleReport, check_oracles

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2

APP_NAME = "DagDelay"
APP_DISPLAY_NAME = "DagDelay - DAG-BFT latency simulator"

# Scenario fields that --sweep may vary, with their value types.
SWEEP_FIELDS = {
    "protocol": str,
    "n": int,
    "f": int,
    "k": int,
    "offset": float,
    "round_timeout": float,
    "fast_quorum": int,
    "delay": str,
    "delay_value": float,
    "drop_rate": float,
    "gst": float,
    "rate": float,
    "duration": float,
}


@dataclass
class RunReport:
    """Summary, oracle results and configuration echo of one scenario variant."""

    label: str
    scenario: Scenario
    seeds: list[int]
    summary: LatencySummary
    oracles: OracleReport
    traces: list[RunTrace] = field(default_factory=list, repr=False)

    def settings(self) -> dict:
        return self.scenario.resolved().to_dict()


# ----------------------------------------------------------------------
# Flag parsing
# ----------------------------------------------------------------------


def parse_seeds(text: str) -> list[int]:
    """"0..19" (inclusive range) or "1,4,7"."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ScenarioError(f"bad seed list {text!r}") from e
    if not seeds:
        raise ScenarioError(f"empty seed list {text!r}")
    return seeds


def parse_sweep(text: str) -> tuple[str, list]:
    """"protocol=bullshark,shoal,shoalpp" -> ("protocol", [...])."""
    if "=" not in text:
        raise ScenarioError(f"sweep must look like field=v1,v2,...: {text!r}")
    name, values = text.split("=", 1)
    name = name.strip().replace("-", "_")
    if name not in SWEEP_FIELDS:
        raise ScenarioError(f"cannot sweep {name!r}; choose from {sorted(SWEEP_FIELDS)}")
    try:
        parsed = [SWEEP_FIELDS[name](v.strip()) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise ScenarioError(f"bad value in sweep {text!r}") from e
    if not parsed:
        raise ScenarioError(f"sweep {text!r} has no values")
    return name, parsed


def parse_crashes(text: str) -> tuple[tuple[int, float], ...]:
    """"3" or "3@10,2@0": replicas crashing at the given times (default 0)."""
    crashes = []
    try:
        for item in text.split(","):
            if not item.strip():
                continue
            replica, _, at = item.partition("@")
            crashes.append((int(replica), float(at) if at else 0.0))
    except ValueError as e:
        raise ScenarioError(f"bad crash list {text!r}") from e
    return tuple(crashes)


def parse_replicas(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(r) for r in text.split(",") if r.strip())
    except ValueError as e:
        raise ScenarioError(f"bad replica list {text!r}") from e


def parse_delay(text: str) -> dict:
    """Model name, a fixed delay ("1.5") or a uniform range ("0.5:2")."""
    if text in ("fixed", "uniform", "matrix"):
        return {"delay": text}
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return {"delay": "uniform", "delay_range": (float(lo), float(hi))}
        return {"delay": "fixed", "delay_value": float(text)}
    except ValueError as e:
        raise ScenarioError(f"bad delay {text!r}") from e


def overrides_from_args(args: argparse.Namespace) -> dict:
    """Scenario fields set on the command line; flags override file values."""
    overrides = {
        "protocol": args.protocol,
        "n": args.n,
        "f": args.f,
        "k": args.k,
        "offset": args.offset,
        "round_timeout": args.round_timeout,
        "fast_quorum": args.fast_quorum,
        "drop_rate": args.drop,
        "gst": args.gst,
        "rate": args.rate,
        "seed": args.seed,
    }
    if args.delay is not None:
        overrides.update(parse_delay(args.delay))
    if args.drop_replicas is not None:
        overrides["drop_replicas"] = parse_replicas(args.drop_replicas)
    if args.crash is not None:
        overrides["crashes"] = parse_crashes(args.crash)
    if args.equivocate is not None:
        overrides["equivocators"] = parse_replicas(args.equivocate)
    if args.rounds is not None:
        overrides["duration"] = 3.0 * args.rounds
    if args.duration is not None:
        overrides["duration"] = args.duration
    return {k: v for k, v in overrides.items() if v is not None}


# ----------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------


def _expects_completion(scenario: Scenario) -> bool:
    return not (scenario.crashes or scenario.equivocators or scenario.drop_rate or scenario.gst)


def build_variants(base: Scenario, sweep: Optional[tuple[str, list]]) -> list[tuple[str, Scenario]]:
    if sweep is None:
        return [(base.label, base)]
    name, values = sweep
    return [(f"{name}={v}" if name != "protocol" else str(v), base.with_overrides(**{name: v})) for v in values]


def execute(
    variants: list[tuple[str, Scenario]],
    seeds: Sequence[int],
    jobs: int = 1,
    check_determinism: bool = False,
) -> list[RunReport]:
    """Run every (variant, seed) pair and evaluate the oracles per variant."""
    specs = [(label, scenario.with_overrides(seed=seed)) for label, scenario in variants for seed in seeds]
    for _, scenario in specs:
        scenario.validate()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(lambda spec: run(spec[1]), specs))
    else:
        traces = [run(scenario) for _, scenario in specs]

    reports = []
    for i, (label, scenario) in enumerate(variants):
        chunk = traces[i * len(seeds):(i + 1) * len(seeds)]
        timelines, segments, uncommitted = [], [], 0
        for trace in chunk:
            decomposition = decompose(trace)
            timelines.extend(decomposition.timelines)
            uncommitted += len(decomposition.uncommitted)
            segments.extend(anchor_segments(trace))
        oracles = check_oracles(
            chunk,
            replay=(lambda t: run(t.scenario)) if check_determinism else None,
            require_complete=_expects_completion(scenario),
        )
        reports.append(
            RunReport(label, scenario, list(seeds), aggregate(timelines, segments, uncommitted), oracles, chunk)
        )
    return reports


def write_outputs(reports: list[RunReport], out: Optional[str], label: str) -> tuple[str, object]:
    """CSV, summary and metadata for a batch; returns the summary text and folder."""
    sections = []
    rows = []
    for report in reports:
        for trace in report.traces:
            run_id = f"{report.label}-s{trace.seed}"
            rows.extend(timeline_rows(run_id, trace.scenario.protocol, trace.seed, decompose(trace).timelines))
        sections.append(format_summary(report.summary, f"== {report.label} (seeds {report.seeds[0]}..{report.seeds[-1]}) =="))
        sections.append(report.oracles.format())
    if len(reports) > 1:
        sections.append(format_comparison({r.label: r.summary for r in reports}))
    text = "\n\n".join(sections)

    manager = OutputManager(out)
    folder = manager.create_output_folder(label)
    manager.save_csv(folder, rows)
    manager.save_summary(folder, text)
    manager.save_metadata(
        folder,
        {r.label: r.settings() for r in reports},
        label=label,
        seeds=reports[0].seeds if reports else [],
        oracles_passed=all(r.oracles.passed for r in reports),
    )
    return text, folder


def run_scenario(
    path: Optional[str] = None,
    overrides: Optional[dict] = None,
    seeds: Optional[Sequence[int]] = None,
    sweep: Optional[tuple[str, list]] = None,
    out: Optional[str] = None,
    jobs: int = 1,
    check_determinism: bool = False,
) -> int:
    """Load, run, check and write one scenario (or sweep); returns the exit code."""
    try:
        base = load_scenario(path) if path else Scenario()
        base = base.with_overrides(**(overrides or {}))
        seeds = list(seeds) if seeds else [base.seed]
        variants = build_variants(base, sweep)
        reports = execute(variants, seeds, jobs, check_determinism)
    except ScenarioError as e:
        logger.error("configuration error: %s", e)
        print(f"Configuration error: {e}", flush=True)
        return EXIT_CONFIG

    label = base.label if sweep is None else f"{base.label}-{sweep[0]}-sweep"
    text, folder = write_outputs(reports, out, label)
    print(text, flush=True)
    print(f"\nResults written to {folder}", flush=True)

    failing = sorted({seed for r in reports for seed in r.oracles.failing_seeds()})
    if failing:
        print(f"Oracle violation; smallest failing seed: {failing[0]}", flush=True)
        return EXIT_VIOLATION
    return EXIT_OK


def list_outputs(out: Optional[str] = None) -> int:
    outputs = OutputManager(out).get_all_outputs()
    if not outputs:
        print("No previous runs.", flush=True)
    for entry in outputs:
        verdict = entry["metadata"].get("oracles_passed")
        status = "pass" if verdict else ("FAIL" if verdict is False else "?")
        print(f"{entry['date']} {entry['time']}  {entry['id']}  {entry['label']:<32} {status}", flush=True)
    return EXIT_OK


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagdelay", description=APP_DISPLAY_NAME)
    parser.add_argument("scenario", nargs="?", help="Path to a TOML scenario file")
    parser.add_argument("--protocol", choices=PROTOCOLS, help="Protocol mode")
    parser.add_argument("--n", type=int, help="Number of replicas (3f+1)")
    parser.add_argument("--f", type=int, help="Fault threshold")
    parser.add_argument("--k", type=int, help="Number of staggered DAGs")
    parser.add_argument("--offset", type=float, help="Stagger offset between DAG starts (md)")
    parser.add_argument("--round-timeout", type=float, help="Round timeout from round entry (md)")
    parser.add_argument("--fast-quorum", type=int, help="Weak votes required by the fast rule")
    parser.add_argument("--delay", help='Delay model: "fixed", "uniform", a fixed value, or "lo:hi"')
    parser.add_argument("--drop", type=float, help="Egress drop probability")
    parser.add_argument("--drop-replicas", help="Comma-separated replicas whose egress drops")
    parser.add_argument("--crash", help='Crashes as "replica@time", comma-separated')
    parser.add_argument("--equivocate", help="Comma-separated equivocating replicas")
    parser.add_argument("--gst", type=float, help="Global stabilization time (md)")
    parser.add_argument("--rounds", type=int, help="Run length in nominal rounds (3 md each)")
    parser.add_argument("--duration", type=float, help="Run length (md)")
    parser.add_argument("--rate", type=float, help="Transactions per md, system-wide")
    parser.add_argument("--seed", type=int, help="Seed of a single run")
    parser.add_argument("--seeds", help='Seed list: "0..19" or "1,2,3"')
    parser.add_argument("--sweep", help='Vary one field: "protocol=bullshark,shoal,shoalpp"')
    parser.add_argument("--out", help="Output directory (default $DAGDELAY_OUTPUT_DIR or ./outputs)")
    parser.add_argument("--jobs", type=int, default=1, help="Worker threads for multi-run batches")
    parser.add_argument("--check-determinism", action="store_true", help="Re-run the first seed and compare")
    parser.add_argument("--list", action="store_true", help="List previous runs and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Suppress all logging except errors")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    if quiet:
        logging.basicConfig(level=logging.ERROR, format="%(levelname)s: %(message)s")
    elif verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    else:
        logging.basicConfig(level=logging.INFO, format="%(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    if args.list:
        return list_outputs(args.out)

    try:
        overrides = overrides_from_args(args)
        seeds = parse_seeds(args.seeds) if args.seeds else None
        sweep = parse_sweep(args.sweep) if args.sweep else None
    except ScenarioError as e:
        print(f"Configuration error: {e}", flush=True)
        return EXIT_CONFIG

    return run_scenario(
        args.scenario,
        overrides,
        seeds=seeds,
        sweep=sweep,
        out=args.out,
        jobs=max(1, args.jobs),
        check_determinism=args.check_determinism,
    )
