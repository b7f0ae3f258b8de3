"""Command-line interface for the simulator."""

from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from irs_nlos.config import Settings, get_settings
from irs_nlos.observability import TracingContext, trace_operation
from irs_nlos.simkit.calibration import calibrate_slot_seconds, reproduce_scan_times
from irs_nlos.simkit.conformance import run_conformance
from irs_nlos.simkit.reports import emit_reports
from irs_nlos.simkit.runner import run_checks, run_scenario, sweep
from irs_nlos.simkit.scenario import SchedulerSpec, load_scenario

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False) -> None:
    """Configure logging for the CLI."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    # OTLP exporter retries are noisy when no collector is listening
    logging.getLogger("urllib3").setLevel(logging.WARNING)
    logging.getLogger("opentelemetry").setLevel(logging.WARNING)


def print_config(settings: Settings) -> None:
    """Print current configuration."""
    print("\n" + "=" * 60)
    print("irs-nlos Configuration")
    print("=" * 60)
    print(settings)
    print("=" * 60 + "\n")


def _report_failures(failures: list[str]) -> int:
    if not failures:
        print("✅ All checks passed")
        return 0
    print(f"❌ {len(failures)} check(s) failed:")
    for failure in failures:
        print(f"  - {failure}")
    return 1


# =============================================================================
# Commands
# =============================================================================


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    cfg = load_scenario(args.config)
    seed = settings.resolve_seed(args.seed, cfg.seed)
    out = Path(args.out) if args.out else settings.output_dir / cfg.name
    with trace_operation("cli.run", {"scenario.path": str(args.config)}):
        report = run_scenario(cfg, seed)
        for path in emit_reports(report, out):
            print(f"  wrote {path}")
        if args.check:
            return _report_failures(run_checks(cfg, report, seed))
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    paths = sorted({Path(p) for pattern in args.configs for p in glob.glob(pattern)})
    if not paths:
        print(f"❌ No scenario files match {args.configs}")
        return 1
    workers = args.workers or settings.sweep_workers
    out = Path(args.out) if args.out else settings.output_dir
    with trace_operation("cli.sweep", {"sweep.scenarios": len(paths), "sweep.workers": workers}):
        results = sweep(paths, out, workers=workers, seed=args.seed, check=args.check)
    failures = []
    for result in results:
        print(f"  {result.name}: {result.out_dir}")
        failures += [f"{result.name}: {f}" for f in result.failures]
    return _report_failures(failures) if args.check else 0


def cmd_conformance(args: argparse.Namespace, settings: Settings) -> int:
    with trace_operation("cli.conformance"):
        results = run_conformance()
    for result in results:
        mark = "✅" if result.passed else "❌"
        print(f"{mark} {result.name}")
        if not result.passed:
            print(f"    expected: {result.expected}")
            print(f"    actual:   {result.actual}")
    return 0 if all(r.passed for r in results) else 1


def cmd_calibrate(args: argparse.Namespace, settings: Settings) -> int:
    slot_seconds = calibrate_slot_seconds(args.naive_seconds)
    print(f"slot_seconds = {slot_seconds:.6f}")
    if not args.scan_times:
        return 0
    with trace_operation("cli.calibrate_slots", {"calibration.slot_seconds": slot_seconds}):
        rows = reproduce_scan_times(SchedulerSpec(slot_seconds=slot_seconds))
    print(f"{'case':<16}{'adaptive_s':>12}{'reported_s':>12}{'naive_s':>10}{'reduction':>11}")
    for row in rows:
        print(
            f"{row.case:<16}{row.adaptive_s:>12.3f}{row.reported_s:>12.2f}"
            f"{row.naive_s:>10.3f}{100 * row.reduction:>10.1f}%"
        )
    if args.check:
        return _report_failures(
            [
                f"{row.case}: {row.adaptive_s:.3f} s above {row.reported_s:.2f} s + 10%"
                for row in rows
                if not row.ok
            ]
        )
    return 0


def cmd_config(args: argparse.Namespace, settings: Settings) -> int:
    print_config(settings)
    return 0


# =============================================================================
# Entry point
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irs-nlos",
        description="irs-nlos - mmWave NLoS localization through a switchable reflecting surface",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run one scenario and write its reports
  irs-nlos run scenarios/single_target.toml --out out/single --seed 7

  # Run and fail on threshold violations
  irs-nlos run scenarios/multi_target.toml --check

  # Sweep scenario files in parallel
  irs-nlos sweep "scenarios/*.toml" --workers 4

  # State machine transcripts
  irs-nlos conformance

  # Fit the slot length and compare scanning times
  irs-nlos calibrate-slots --scan-times --check
        """,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one scenario")
    run.add_argument("config", type=Path, help="Scenario TOML file")
    run.add_argument("--out", type=str, help="Output directory (default: <output_dir>/<name>)")
    run.add_argument("--seed", type=int, help="Override the scenario seed")
    run.add_argument("--check", action="store_true", help="Exit 1 when a scenario check fails")
    run.set_defaults(handler=cmd_run)

    sw = sub.add_parser("sweep", help="Run many scenarios in a process pool")
    sw.add_argument("configs", nargs="+", help="Scenario file globs")
    sw.add_argument("--out", type=str, help="Output root (default: <output_dir>)")
    sw.add_argument("--seed", type=int, help="Override every scenario seed")
    sw.add_argument("--workers", type=int, help="Worker processes (default: SWEEP_WORKERS)")
    sw.add_argument("--check", action="store_true", help="Exit 1 when any check fails")
    sw.set_defaults(handler=cmd_sweep)

    conf = sub.add_parser("conformance", help="Run the state machine transcript suite")
    conf.set_defaults(handler=cmd_conformance)

    cal = sub.add_parser("calibrate-slots", help="Fit slot_seconds to the naive baseline")
    cal.add_argument(
        "--naive-seconds", type=float, default=7.15, help="Naive four-angle scan time (s)"
    )
    cal.add_argument(
        "--scan-times",
        action="store_true",
        help="Compare adaptive scanning times with the reported ones",
    )
    cal.add_argument("--check", action="store_true", help="Exit 1 above 110%% of reported")
    cal.set_defaults(handler=cmd_calibrate)

    cfg = sub.add_parser("config", help="Show configuration and exit")
    cfg.set_defaults(handler=cmd_config)
    return parser


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.verbose)

    try:
        settings = get_settings()
    except ValueError as e:
        print(f"❌ Configuration error: {e}")
        print("\nPlease check your .env file or environment variables.")
        sys.exit(1)

    try:
        with TracingContext(settings):
            code = args.handler(args, settings)
    except ValidationError as e:
        print(f"❌ Invalid scenario: {e}")
        sys.exit(1)
    except (OSError, ValueError) as e:
        print(f"❌ {e}")
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
