"""Command-line interface.

    simulate run --config <path> [--out <dir>] [--seed <u64>]
    simulate suite (--preset-all | --configs <paths...>) [--out <dir>] [--workers N]
    simulate presets

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .scenario import (
    ConfigError,
    RunReport,
    load_config,
    preset_config,
    preset_names,
    run_scenario,
    run_suite,
)
from .reports import emit_reports


def _report_line(report: RunReport) -> str:
    s = report.stress_summary
    return (
        f"{report.name:22s} mean_d={s.mean_d:.4f} max_d={s.max_d:.4f} "
        f"min_d={s.min_d:.4f} cv_d={s.cv_d:.4f} moran_i={report.moran.i:.4f} "
        f"moran_p={report.moran.p_value:.4g} cvm_p={report.cvm.p_value:.4g} "
        f"[{report.duration_s:.2f}s]"
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed: expected a non-negative integer, got {args.seed}")
        config.seed = args.seed
    report = run_scenario(config)
    paths = emit_reports(report, config, out_dir=args.out)
    print(_report_line(report))
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_suite(args: argparse.Namespace) -> int:
    if args.preset_all:
        configs = [preset_config(name) for name in preset_names()]
    else:
        configs = [load_config(path) for path in args.configs]
    result = run_suite(configs, out_dir=args.out, workers=args.workers)
    for report in result.reports:
        print(_report_line(report))
    if result.summary_path is not None:
        print(f"wrote {result.summary_path}")
    if result.failures:
        for name, exc in result.failures:
            print(f"FAILED {name}: {exc}", file=sys.stderr)
        return 1 if all(isinstance(e, ConfigError) for _, e in result.failures) else 2
    return 0


def _cmd_presets(_args: argparse.Namespace) -> int:
    for name in preset_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Crop-rotation soil-nutrient lattice simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario from a JSON config")
    run_p.add_argument("--config", required=True, help="path to scenario JSON")
    run_p.add_argument("--out", help="output directory override")
    run_p.add_argument("--seed", type=int, help="seed override")
    run_p.set_defaults(func=_cmd_run)

    suite_p = sub.add_parser("suite", help="run several scenarios and compare")
    group = suite_p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset-all", action="store_true", help="run all built-in presets")
    group.add_argument("--configs", nargs="+", help="paths to scenario JSON files")
    suite_p.add_argument("--out", help="output directory override")
    suite_p.add_argument("--workers", type=int, default=1, help="parallel scenario workers")
    suite_p.set_defaults(func=_cmd_suite)

    presets_p = sub.add_parser("presets", help="list built-in presets")
    presets_p.set_defaults(func=_cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits itself; keep documented codes
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
