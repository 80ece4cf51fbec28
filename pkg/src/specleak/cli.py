"""Command-line front end.

    specleak fuzz -c conf.yaml -n 1000 -i 50 [--seed S] [--out report.jsonl]
    specleak minimize -c conf.yaml --report report.jsonl --violation r3v0
    specleak reproduce --report report.jsonl --violation r3v0 [--disable CLAUSE]
    specleak stats --report report.jsonl

Exit codes: 0 = ran, no violations; 1 = violations found; 2 = usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .campaign import (
    CampaignConfig, ConfigError, SeedMismatch, config_fingerprint, format_stats,
    load_report, parse_config, reproduce, run_campaign,
)
from .filters import speculation_filter
from .generator import InfeasibleConfig
from .minimizer import minimize
from .pipeline import run_test_case, PipelineSettings


def _load_config(args) -> CampaignConfig:
    cfg = parse_config(args.config) if args.config else CampaignConfig()
    if getattr(args, "num_programs", None) is not None:
        cfg.num_programs = args.num_programs
    if getattr(args, "inputs_per_program", None) is not None:
        cfg.inputs_per_program = args.inputs_per_program
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_fuzz(args) -> int:
    cfg = _load_config(args)
    report = run_campaign(cfg, out_path=args.out, progress=not args.quiet)
    if not args.quiet:
        print(format_stats(report))
    return 1 if report.summary["violations"] else 0


def _cmd_minimize(args) -> int:
    report = load_report(args.report)
    record, violation = report.find_violation(args.violation)
    cfg = report.config

    # regenerate the full test case from its stored seeds; a violation is a
    # property of the whole input sequence, not of the named pair alone
    from .campaign import _pipeline_settings, _round_seeds, config_fingerprint
    from .generator import generate_inputs, generate_program

    if violation["config_fingerprint"] != config_fingerprint(cfg):
        raise SeedMismatch("report fingerprint does not match this build")
    seeds = _round_seeds(cfg.seed, record["round"])
    gen_cfg = cfg.gen_config(seeds["generator"])
    program = generate_program(gen_cfg)
    inputs = generate_inputs(cfg.inputs_per_program, gen_cfg)
    settings = _pipeline_settings(cfg, seeds)
    uarch = cfg.dut

    def still_speculates(candidate, case_inputs) -> bool:
        keep, _ = speculation_filter(candidate, case_inputs, uarch)
        return keep

    def still_violates(candidate, case_inputs) -> bool:
        return bool(run_test_case(candidate, case_inputs, settings).violations)

    predicate = still_speculates if args.predicate == "speculation" else still_violates
    minimized = minimize(program, inputs, predicate)
    print(minimized.render())
    return 0


def _cmd_reproduce(args) -> int:
    report = load_report(args.report)
    overrides = {name: False for name in (args.disable or [])}
    verdict = reproduce(report, args.violation, clause_overrides=overrides or None)
    status = "confirmed" if verdict.confirmed else "refuted"
    if overrides:
        status += f" (with {', '.join(overrides)} disabled)"
    print(f"{status}: {verdict.reason}")
    return 0


def _cmd_stats(args) -> int:
    report = load_report(args.report)
    print(f"config fingerprint: {report.fingerprint} "
          f"(current build: {config_fingerprint(report.config)})")
    print(format_stats(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specleak",
        description="relational fuzzer for speculative information leaks on a simulated CPU")
    sub = parser.add_subparsers(dest="command", required=True)

    fuzz = sub.add_parser("fuzz", help="run a fuzzing campaign")
    fuzz.add_argument("-c", "--config", help="campaign configuration file")
    fuzz.add_argument("-n", "--num-programs", type=int, dest="num_programs")
    fuzz.add_argument("-i", "--inputs-per-program", type=int, dest="inputs_per_program")
    fuzz.add_argument("--seed", type=int)
    fuzz.add_argument("--out", help="report path (line-delimited JSON)")
    fuzz.add_argument("-q", "--quiet", action="store_true")
    fuzz.set_defaults(func=_cmd_fuzz)

    mini = sub.add_parser("minimize", help="shrink a violating test case")
    mini.add_argument("-c", "--config", help="campaign configuration file")
    mini.add_argument("--report", required=True)
    mini.add_argument("--violation", required=True)
    mini.add_argument("--predicate", choices=("violation", "speculation"),
                      default="violation",
                      help="keep shrinking while the case still violates (default) "
                           "or still passes the speculation filter")
    mini.set_defaults(func=_cmd_minimize)

    rep = sub.add_parser("reproduce", help="re-run a stored violation from its seeds")
    rep.add_argument("--report", required=True)
    rep.add_argument("--violation", required=True)
    rep.add_argument("--disable", action="append", metavar="CLAUSE",
                     help="toggle a device clause off before re-running")
    rep.set_defaults(func=_cmd_reproduce)

    stats = sub.add_parser("stats", help="print the metrics of a report")
    stats.add_argument("--report", required=True)
    stats.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, InfeasibleConfig, SeedMismatch, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
