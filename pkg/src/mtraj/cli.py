"""Command-line entry point.

Subcommands: ``run`` (execute a test suite and write a report),
``analyze`` (classification agreement sweep over a stored report),
``conformance`` (wire-protocol transcript suite against a predictor)
and ``gen-fixtures`` (write synthetic scenes and tracks).

Exit codes: 0 clean, 3 when the run subcommand found violations above
its gate threshold, 1 on any operational failure (including bad flags).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import MtrajError, RunConfig
from .conformance import run_conformance
from .dataio import extract_windows, load_scene_dir, read_report, read_tracks, write_report
from .fixtures import default_cases, write_fixture_dir
from .harness import SuiteReport, resolve_sut, run_suite
from .metrics import METRIC_KEYS
from .report import DEFAULT_SWEEP_THRESHOLDS, sweep_table, threshold_sweep
from .transforms import parse_mr_list

SETTINGS = {"short": (8, 12), "long": (5, 30)}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VIOLATIONS = 3


class BadFlag(MtrajError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadFlag(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mtraj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a metamorphic test suite")
    run.add_argument("--sut", required=True,
                     help="builtin:<cvg|biased|goal>[?opts], cmd:<command> or tcp://host:port")
    run.add_argument("--data", help="fixture directory (scenes + tracks.csv); "
                                    "omit to use generated in-memory cases")
    run.add_argument("--mr", required=True,
                     help="comma-separated relations: mirror-h, mirror-v, rescale:<factor>")
    run.add_argument("--n", type=int, default=8, help="source prediction repetitions")
    run.add_argument("--k", type=int, default=20, help="samples per prediction")
    run.add_argument("--p-threshold", type=float, default=0.05)
    run.add_argument("--seed", type=int, default=None,
                     help="base seed (falls back to MTRAJ_SEED, then 0)")
    run.add_argument("--setting", choices=sorted(SETTINGS), default="short")
    run.add_argument("--out", help="report path (line-delimited JSON)")
    run.add_argument("--cases", type=int, default=200,
                     help="number of generated cases when --data is omitted")
    run.add_argument("--stride", type=int, default=None,
                     help="window stride for --data extraction (default: window length)")
    run.add_argument("--limit", type=int, default=0, help="cap the number of cases (0 = all)")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel workers over test cases")
    run.add_argument("--two-sided", action="store_true",
                     help="use a two-sided z-test instead of the one-sided upper tail")
    run.add_argument("--followup-frame", choices=("source", "followup"), default="source",
                     help="frame in which follow-up predictions are compared")
    run.add_argument("--fail-threshold", type=float, default=15.0,
                     help="exit 3 when any relation's violation rate exceeds this percentage")

    analyze = sub.add_parser("analyze", help="agreement sweep over a stored report")
    analyze.add_argument("--report", required=True)
    analyze.add_argument("--label", required=True,
                         choices=[k.replace("_", "-") for k in METRIC_KEYS])
    analyze.add_argument("--thresholds",
                         default=",".join(str(t) for t in DEFAULT_SWEEP_THRESHOLDS))
    analyze.add_argument("--out", help="write the table here instead of stdout")

    conf = sub.add_parser("conformance", help="wire-protocol transcript suite")
    conf.add_argument("--sut", required=True, help="cmd:<command> or tcp://host:port")
    conf.add_argument("--transcripts", help="directory of *.jsonl transcripts "
                                            "(default: the packaged suite)")
    conf.add_argument("--timeout", type=float, default=30.0)

    gen = sub.add_parser("gen-fixtures", help="write synthetic scenes and tracks")
    gen.add_argument("--out", required=True)
    gen.add_argument("--cases", type=int, required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--setting", choices=sorted(SETTINGS), default="short")

    return parser


def _resolve_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("MTRAJ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise BadFlag(f"MTRAJ_SEED must be an integer, got {env!r}") from exc
    return 0


def _summary_table(report: SuiteReport) -> str:
    header = f"{'MR':<14} {'WVC':>8} {'BoN-ADE':>8} {'BoN-FDE':>8} {'Mean-ADE':>9} {'Mean-FDE':>9}"
    lines = [header, "-" * len(header)]
    for agg in report.aggregates():
        cells = [f"{agg.mr.spec:<14}", f"{agg.wvc_rate:>8.1f}"]
        for key, width in zip(METRIC_KEYS, (8, 8, 9, 9)):
            if agg.baseline_cases:
                cells.append(f"{agg.baseline_rates[key]:>{width}.1f}")
            else:
                cells.append(f"{'-':>{width}}")
        lines.append(" ".join(cells))
    return "\n".join(lines)


def _cmd_run(args) -> int:
    seed = _resolve_seed(args.seed)
    n_obs, horizon = SETTINGS[args.setting]
    cfg = RunConfig(
        n_source=args.n,
        k=args.k,
        p_threshold=args.p_threshold,
        seed=seed,
        horizon=horizon,
        observed_len=n_obs,
        two_sided=args.two_sided,
        followup_frame=args.followup_frame,
    )
    mrs = parse_mr_list(args.mr)

    if args.data:
        data = Path(args.data)
        scenes = load_scene_dir(data)
        if not scenes:
            raise MtrajError(f"no scenes (*.pgm) found in {data}")
        tracks = read_tracks(data / "tracks.csv")
        stride = args.stride if args.stride else n_obs + horizon
        cases = extract_windows(tracks, scenes, n=n_obs, horizon=horizon, stride=stride)
    else:
        if args.cases < 1:
            raise BadFlag("--cases must be >= 1")
        cases = default_cases(seed, args.cases, n=n_obs, horizon=horizon)
    if args.limit:
        cases = cases[: args.limit]
    if not cases:
        raise MtrajError("no test cases to run")

    sut = resolve_sut(args.sut)
    try:
        jobs = max(1, args.jobs)
        report = run_suite(sut, cases, mrs, cfg, jobs=jobs)
    finally:
        sut.close()

    if args.out:
        write_report(report, args.out)
    print(f"sut: {report.sut_name}   cases: {len(cases)}   "
          f"N={cfg.n_source} K={cfg.k} seed={cfg.seed}")
    print(_summary_table(report))
    if args.out:
        print(f"report written to {args.out}")

    worst = max(agg.wvc_rate for agg in report.aggregates())
    return EXIT_VIOLATIONS if worst > args.fail_threshold else EXIT_OK


def _cmd_analyze(args) -> int:
    report = read_report(args.report)
    label = args.label.replace("-", "_")
    try:
        thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
    except ValueError as exc:
        raise BadFlag(f"bad --thresholds list: {exc}") from exc
    if not thresholds:
        raise BadFlag("--thresholds must name at least one value")
    rows = threshold_sweep(report, label, thresholds)
    table = sweep_table(rows)
    if args.out:
        Path(args.out).write_text(table, "utf-8")
        print(f"table written to {args.out}")
    else:
        sys.stdout.write(table)
    return EXIT_OK


def _cmd_conformance(args) -> int:
    if args.transcripts:
        paths = sorted(Path(args.transcripts).glob("*.jsonl"))
        if not paths:
            raise MtrajError(f"no transcripts found in {args.transcripts}")
    else:
        paths = None
    failures = run_conformance(args.sut, paths, timeout=args.timeout)
    if failures:
        for f in failures:
            print(f, file=sys.stderr)
        print(f"conformance: FAIL ({len(failures)} mismatches)")
        return EXIT_FAILURE
    print("conformance: PASS")
    return EXIT_OK


def _cmd_gen_fixtures(args) -> int:
    if args.cases < 1:
        raise BadFlag("--cases must be >= 1")
    seed = _resolve_seed(args.seed)
    n_obs, horizon = SETTINGS[args.setting]
    count = write_fixture_dir(args.out, seed, args.cases, n=n_obs, horizon=horizon)
    print(f"wrote {count} cases to {args.out} (seed {seed}, setting {args.setting})")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "conformance":
            return _cmd_conformance(args)
        if args.command == "gen-fixtures":
            return _cmd_gen_fixtures(args)
        raise BadFlag(f"unknown command {args.command!r}")
    except BadFlag as exc:
        print(f"mtraj: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (MtrajError, OSError) as exc:
        print(f"mtraj: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
