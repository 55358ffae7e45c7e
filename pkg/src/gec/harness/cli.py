"""Command line: ``gec run <config>``, ``gec check <suite>``, ``gec report <records>``.

Exit codes: 0 all pass, 1 any failure, 2 usage or configuration error.
"""
import argparse
import json
import sys

from ..errors import ConfigError
from .checks import SUITES, check_suite
from .config import REPORT_FORMATS, load_config
from .report import load_records, report, summary_text, WRITERS
from .runner import run_experiment

# reduced sizes for a fast smoke run of every suite
QUICK = {
    "fixed_points": {"n_gaussian": 5, "n_map": 5},
    "curvature": {"n_diag": 4, "n_free": 128, "free_trials": 1},
    "first_order": {"n_pairs": 1, "n_inits": 3, "n_gamma": 2},
    "second_order": {"n_pairs": 1, "n_map_cases": 20},
    "replica": {"n_seeds": 3, "n": 200, "m": 100, "extra_priors": False},
    "admm": {"n_instances": 4},
    "bfe_moments": {"n_random": 3},
}


def _parser():
    p = argparse.ArgumentParser(prog="gec", description="GEC experiments and invariant checks")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run an experiment config over its seeds")
    r.add_argument("config")
    r.add_argument("--out", help="override [output].dir")
    c = sub.add_parser("check", help="run an invariant suite and print one JSON verdict per line")
    c.add_argument("suite", choices=list(SUITES) + ["all"])
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--quick", action="store_true", help="reduced instance counts")
    c.add_argument("--summary", action="store_true", help="print a table instead of JSON lines")
    rep = sub.add_parser("report", help="re-render a results file")
    rep.add_argument("records")
    rep.add_argument("--format", required=True, choices=REPORT_FORMATS)
    rep.add_argument("--output", help="write here instead of stdout")
    return p


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    records = run_experiment(cfg)
    sys.stdout.write(summary_text(records))
    ok = sum(1 for r in records if r["status"] == "ok")
    return 0 if ok else 1


def _cmd_check(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    for name in names:
        kw = dict(QUICK[name]) if args.quick else {}
        rep = check_suite(name, seed=args.seed, **kw)
        reports.append(rep)
        if not args.summary:
            for v in rep.verdicts:
                print(json.dumps(v.as_dict(), default=str))
    if args.summary:
        for rep in reports:
            for inv, (n, nfail) in rep.table().items():
                print(f"{rep.name:<14} {inv:<44} {n:>6} {nfail:>5}  {'PASS' if nfail == 0 else 'FAIL'}")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_report(args):
    records = load_records(args.records)
    if not records:
        raise ConfigError(f"{args.records} holds no records")
    if args.output:
        report(records, args.format, args.output)
    elif args.format == "text":
        sys.stdout.write(summary_text(records))
    else:
        WRITERS[args.format](records, "/dev/stdout")
    return 0


COMMANDS = {"run": _cmd_run, "check": _cmd_check, "report": _cmd_report}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"gec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
